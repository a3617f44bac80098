#pragma once

// The sixteen per-(citing document, reference) features and their
// within-document normalization.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "citerank/corpus.hpp"
#include "citerank/error.hpp"
#include "citerank/textsim.hpp"
#include "json.hpp"

namespace citerank {

// Similarity features are named sim_<citing section><reference section> with
// citing sections a(bstract) t(itle) f(ull text) c(ontext windows)
// d(iscussion) cd (discussion context windows) and reference sections a, t.
enum class Feature : std::size_t {
  sim_aa,
  sim_at,
  sim_ta,
  sim_tt,
  sim_fa,
  sim_ft,
  sim_ca,
  sim_ct,
  sim_da,
  sim_dt,
  sim_cda,
  sim_cdt,
  age_years,
  mention_full,
  mention_discussion,
  citation_impact,
};

inline constexpr std::size_t kFeatureCount = 16;
inline constexpr std::size_t kSimilarityCount = 12;

inline constexpr std::array<std::string_view, kFeatureCount> kFeatureNames = {
    "sim_aa", "sim_at", "sim_ta", "sim_tt", "sim_fa",    "sim_ft",       "sim_ca",             "sim_ct",
    "sim_da", "sim_dt", "sim_cda", "sim_cdt", "age_years", "mention_full", "mention_discussion", "citation_impact",
};

inline constexpr std::array<Feature, 4> kCitationFeatures = {
    Feature::age_years, Feature::mention_full, Feature::mention_discussion, Feature::citation_impact};

constexpr std::size_t index_of(Feature f) noexcept { return static_cast<std::size_t>(f); }
constexpr Feature feature_at(std::size_t i) noexcept { return static_cast<Feature>(i); }
constexpr bool is_similarity(Feature f) noexcept { return index_of(f) < kSimilarityCount; }
constexpr std::string_view feature_name(Feature f) noexcept { return kFeatureNames[index_of(f)]; }

inline std::optional<Feature> feature_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    if (kFeatureNames[i] == name) return feature_at(i);
  }
  return std::nullopt;
}

inline Feature parse_feature(std::string_view name) {
  if (auto f = feature_from_name(name)) return *f;
  throw ValidationError("unknown feature '" + std::string(name) + "'");
}

struct RawScale {};
struct NormalizedScale {};

// Fixed-size feature record. The scale tag keeps raw and normalized values
// from being mixed.
template <typename Scale>
class FeatureVector {
 public:
  using Values = std::array<double, kFeatureCount>;

  FeatureVector() { values_.fill(0.0); }
  explicit FeatureVector(const Values& v) : values_(v) {}

  double& operator[](Feature f) noexcept { return values_[index_of(f)]; }
  double operator[](Feature f) const noexcept { return values_[index_of(f)]; }
  const Values& values() const noexcept { return values_; }

  bool all_finite() const noexcept {
    return std::all_of(values_.begin(), values_.end(), [](double x) { return std::isfinite(x); });
  }

  bool operator==(const FeatureVector&) const = default;

 private:
  Values values_;
};

using RawFeatures = FeatureVector<RawScale>;
using NormalizedFeatures = FeatureVector<NormalizedScale>;

// Ordered, duplicate-free subset of features. Model weights follow this order.
class FeatureMask {
 public:
  FeatureMask() = default;
  explicit FeatureMask(std::vector<Feature> features) : features_(std::move(features)) {
    std::array<bool, kFeatureCount> seen{};
    for (Feature f : features_) {
      if (seen[index_of(f)]) throw ValidationError("feature '" + std::string(feature_name(f)) + "' repeated in mask");
      seen[index_of(f)] = true;
    }
  }

  static FeatureMask all() {
    std::vector<Feature> f;
    for (std::size_t i = 0; i < kFeatureCount; ++i) f.push_back(feature_at(i));
    return FeatureMask(std::move(f));
  }

  static FeatureMask text_only() {
    std::vector<Feature> f;
    for (std::size_t i = 0; i < kSimilarityCount; ++i) f.push_back(feature_at(i));
    return FeatureMask(std::move(f));
  }

  // Comma-separated names; "all" and "text" are shorthands.
  static FeatureMask parse(std::string_view spec) {
    if (spec == "all") return all();
    if (spec == "text") return text_only();
    std::vector<Feature> f;
    std::size_t pos = 0;
    while (pos <= spec.size()) {
      const std::size_t comma = std::min(spec.find(',', pos), spec.size());
      const auto name = spec.substr(pos, comma - pos);
      if (!name.empty()) f.push_back(parse_feature(name));
      pos = comma + 1;
    }
    return FeatureMask(std::move(f));
  }

  const std::vector<Feature>& features() const noexcept { return features_; }
  std::size_t size() const noexcept { return features_.size(); }
  bool empty() const noexcept { return features_.empty(); }
  bool contains(Feature f) const { return std::find(features_.begin(), features_.end(), f) != features_.end(); }

  FeatureMask with(Feature f) const {
    auto copy = features_;
    copy.push_back(f);
    return FeatureMask(std::move(copy));
  }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (Feature f : features_) out.emplace_back(feature_name(f));
    return out;
  }

  std::string to_string() const {
    std::string s;
    for (Feature f : features_) {
      if (!s.empty()) s += ',';
      s += feature_name(f);
    }
    return s;
  }

  bool operator==(const FeatureMask&) const = default;

 private:
  std::vector<Feature> features_;
};

struct Candidate {
  std::string ref_id;
  RawFeatures raw;
  NormalizedFeatures normalized;
  std::optional<int> grade;

  bool operator==(const Candidate&) const = default;
};

// The candidates of one citing document. Grades are all present or all absent.
struct QueryGroup {
  std::string doc_id;
  std::vector<Candidate> candidates;

  std::size_t size() const noexcept { return candidates.size(); }

  bool graded() const {
    return !candidates.empty() &&
           std::all_of(candidates.begin(), candidates.end(), [](const Candidate& c) { return c.grade.has_value(); });
  }

  std::vector<int> grades() const {
    std::vector<int> out;
    out.reserve(candidates.size());
    for (const auto& c : candidates) {
      if (!c.grade) throw ValidationError("group '" + doc_id + "' has ungraded candidate '" + c.ref_id + "'");
      out.push_back(*c.grade);
    }
    return out;
  }

  std::vector<double> raw_values(Feature f) const {
    std::vector<double> out;
    for (const auto& c : candidates) out.push_back(c.raw[f]);
    return out;
  }

  bool operator==(const QueryGroup&) const = default;
};

// ---------------------------------------------------------------------------
// Extraction

namespace detail {

inline Tokens concat(const std::vector<Tokens>& windows) {
  Tokens out;
  for (const auto& w : windows) out.insert(out.end(), w.begin(), w.end());
  return out;
}

}  // namespace detail

// Per-document term vectors, computed once and reused for every reference.
class DocumentFeaturizer {
 public:
  DocumentFeaturizer(const Document& doc, const Vocabulary& vocab)
      : doc_(doc),
        vocab_(vocab),
        abstract_(tfidf_vector(doc.abstract, vocab)),
        title_(tfidf_vector(doc.title, vocab)),
        full_(tfidf_vector(strip_markers(doc.full_text), vocab)),
        discussion_(tfidf_vector(strip_markers(doc.discussion), vocab)),
        markers_full_(find_markers(doc.full_text).size()),
        markers_discussion_(find_markers(doc.discussion).size()) {}

  RawFeatures extract(const std::string& ref_id, const CitationContexts& ctx) const {
    const Reference* ref = doc_.find_reference(ref_id);
    if (ref == nullptr) {
      throw ValidationError("reference '" + ref_id + "' not found in document '" + doc_.doc_id + "'");
    }
    const TermVector ra = tfidf_vector(ref->abstract, vocab_);
    const TermVector rt = tfidf_vector(ref->title, vocab_);
    const TermVector cf = tfidf_vector(detail::concat(ctx.contexts_full), vocab_);
    const TermVector cd = tfidf_vector(detail::concat(ctx.contexts_discussion), vocab_);

    RawFeatures f;
    f[Feature::sim_aa] = cosine(abstract_, ra);
    f[Feature::sim_at] = cosine(abstract_, rt);
    f[Feature::sim_ta] = cosine(title_, ra);
    f[Feature::sim_tt] = cosine(title_, rt);
    f[Feature::sim_fa] = cosine(full_, ra);
    f[Feature::sim_ft] = cosine(full_, rt);
    f[Feature::sim_ca] = cosine(cf, ra);
    f[Feature::sim_ct] = cosine(cf, rt);
    f[Feature::sim_da] = cosine(discussion_, ra);
    f[Feature::sim_dt] = cosine(discussion_, rt);
    f[Feature::sim_cda] = cosine(cd, ra);
    f[Feature::sim_cdt] = cosine(cd, rt);
    f[Feature::age_years] = static_cast<double>(doc_.year - ref->year);
    f[Feature::mention_full] =
        markers_full_ == 0 ? 0.0 : static_cast<double>(ctx.mention_count_full) / static_cast<double>(markers_full_);
    f[Feature::mention_discussion] =
        markers_discussion_ == 0
            ? 0.0
            : static_cast<double>(ctx.mention_count_discussion) / static_cast<double>(markers_discussion_);
    f[Feature::citation_impact] = static_cast<double>(ref->citation_impact);
    return f;
  }

 private:
  const Document& doc_;
  const Vocabulary& vocab_;
  TermVector abstract_, title_, full_, discussion_;
  std::size_t markers_full_, markers_discussion_;
};

inline RawFeatures extract_features(const Document& doc, const std::string& ref_id, const CitationContexts& contexts,
                                    const Vocabulary& vocab) {
  return DocumentFeaturizer(doc, vocab).extract(ref_id, contexts);
}

// ---------------------------------------------------------------------------
// Normalization

// Evenly spaced ranks in [0, 1]: the k-th smallest of n values maps to
// k/(n-1), tied values share the mean of their slots, n = 1 maps to 0.5.
inline std::vector<double> spread_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<double> out(n, 0.5);
  if (n < 2) return out;
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  const double denom = static_cast<double>(n - 1);
  for (std::size_t lo = 0; lo < n;) {
    std::size_t hi = lo;
    while (hi + 1 < n && values[order[hi + 1]] == values[order[lo]]) ++hi;
    const double v = (static_cast<double>(lo) + static_cast<double>(hi)) / 2.0 / denom;
    for (std::size_t k = lo; k <= hi; ++k) out[order[k]] = v;
    lo = hi + 1;
  }
  return out;
}

// Similarity features pass through; the four citation features are spread
// over [0, 1] within the group.
inline std::vector<NormalizedFeatures> normalize_features(std::span<const RawFeatures> raw) {
  if (raw.empty()) throw ValidationError("cannot normalize an empty group");
  std::vector<NormalizedFeatures> out;
  out.reserve(raw.size());
  for (const auto& r : raw) out.emplace_back(r.values());
  for (Feature f : kCitationFeatures) {
    std::vector<double> col;
    col.reserve(raw.size());
    for (const auto& r : raw) col.push_back(r[f]);
    const auto spread = spread_ranks(col);
    for (std::size_t i = 0; i < raw.size(); ++i) out[i][f] = spread[i];
  }
  return out;
}

// Fills every candidate's normalized vector from its raw vector.
inline QueryGroup normalize_group(QueryGroup group) {
  std::vector<RawFeatures> raw;
  raw.reserve(group.size());
  for (const auto& c : group.candidates) raw.push_back(c.raw);
  const auto norm = normalize_features(raw);
  for (std::size_t i = 0; i < group.size(); ++i) group.candidates[i].normalized = norm[i];
  return group;
}

// ---------------------------------------------------------------------------
// Corpus featurization

enum class CandidateSelection {
  all,        // every reference, in document order
  top5,       // five most abstract-similar references
  annotated,  // annotated references, in document order
};

inline std::string_view to_string(CandidateSelection s) {
  switch (s) {
    case CandidateSelection::all: return "all";
    case CandidateSelection::top5: return "top5";
    case CandidateSelection::annotated: return "annotated";
  }
  return "?";
}

inline CandidateSelection parse_candidate_selection(std::string_view s) {
  if (s == "all") return CandidateSelection::all;
  if (s == "top5") return CandidateSelection::top5;
  if (s == "annotated") return CandidateSelection::annotated;
  throw ValidationError("unknown candidate selection '" + std::string(s) + "'");
}

inline std::vector<std::string> candidate_ids(const Document& doc, const Vocabulary& vocab, CandidateSelection sel) {
  std::vector<std::string> ids;
  switch (sel) {
    case CandidateSelection::all:
      for (const auto& r : doc.references) ids.push_back(r.ref_id);
      break;
    case CandidateSelection::top5:
      ids = select_candidates(doc, vocab, 5);
      break;
    case CandidateSelection::annotated:
      if (!doc.annotations) throw ValidationError("document '" + doc.doc_id + "' has no annotations");
      for (const auto& r : doc.references) {
        if (doc.annotations->contains(r.ref_id)) ids.push_back(r.ref_id);
      }
      break;
  }
  return ids;
}

inline QueryGroup featurize_document(const Document& doc, const Vocabulary& vocab, CandidateSelection sel) {
  const auto contexts = extract_citation_contexts(doc);
  const DocumentFeaturizer fz(doc, vocab);
  QueryGroup g;
  g.doc_id = doc.doc_id;
  for (auto& id : candidate_ids(doc, vocab, sel)) {
    Candidate c;
    c.raw = fz.extract(id, contexts.at(id));
    if (doc.annotations) {
      auto it = doc.annotations->find(id);
      if (it == doc.annotations->end()) {
        throw ValidationError("document '" + doc.doc_id + "': candidate '" + id + "' has no annotation");
      }
      c.grade = it->second;
    }
    c.ref_id = std::move(id);
    g.candidates.push_back(std::move(c));
  }
  if (g.candidates.empty()) throw ValidationError("document '" + doc.doc_id + "' has no candidates");
  return normalize_group(std::move(g));
}

inline std::vector<QueryGroup> featurize_corpus(const Corpus& corpus, const Vocabulary& vocab,
                                                CandidateSelection sel = CandidateSelection::all) {
  std::vector<QueryGroup> out;
  out.reserve(corpus.size());
  for (const auto& doc : corpus) out.push_back(featurize_document(doc, vocab, sel));
  return out;
}

// ---------------------------------------------------------------------------
// Feature matrix file: one candidate per line,
// {"doc_id", "ref_id", "grade"?, "features": {normalized}, "raw": {raw}}.

namespace detail {

template <typename Scale>
nlohmann::ordered_json named_values(const FeatureVector<Scale>& v) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < kFeatureCount; ++i) j[std::string(kFeatureNames[i])] = v.values()[i];
  return j;
}

template <typename Scale>
FeatureVector<Scale> values_from_json(const nlohmann::json& j, const char* key, std::size_t line) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_object()) throw ParseError(line, std::string("field '") + key + "' must be an object");
  typename FeatureVector<Scale>::Values v{};
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    auto f = it->find(std::string(kFeatureNames[i]));
    if (f == it->end() || !f->is_number()) {
      throw ParseError(line, std::string("field '") + key + "' lacks numeric '" + std::string(kFeatureNames[i]) + "'");
    }
    v[i] = f->get<double>();
  }
  if (it->size() != kFeatureCount) throw ParseError(line, std::string("field '") + key + "' has unknown features");
  return FeatureVector<Scale>(v);
}

}  // namespace detail

inline void write_feature_matrix(const std::vector<QueryGroup>& groups, std::ostream& out) {
  for (const auto& g : groups) {
    for (const auto& c : g.candidates) {
      nlohmann::ordered_json j;
      j["doc_id"] = g.doc_id;
      j["ref_id"] = c.ref_id;
      if (c.grade) j["grade"] = *c.grade;
      j["features"] = detail::named_values(c.normalized);
      j["raw"] = detail::named_values(c.raw);
      out << j.dump() << '\n';
    }
  }
}

// Records of one document must be contiguous.
inline std::vector<QueryGroup> read_feature_matrix(std::istream& in) {
  std::vector<QueryGroup> groups;
  std::map<std::string, std::size_t> closed;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(lineno, std::string("malformed JSON: ") + e.what());
    }
    if (!j.is_object()) throw ParseError(lineno, "record is not a JSON object");
    Candidate c;
    auto doc_id = detail::required<std::string>(j, "doc_id", lineno);
    c.ref_id = detail::required<std::string>(j, "ref_id", lineno);
    if (j.contains("grade")) c.grade = detail::required<int>(j, "grade", lineno);
    c.normalized = detail::values_from_json<NormalizedScale>(j, "features", lineno);
    c.raw = detail::values_from_json<RawScale>(j, "raw", lineno);
    if (groups.empty() || groups.back().doc_id != doc_id) {
      if (closed.contains(doc_id)) throw ParseError(lineno, "records of document '" + doc_id + "' are not contiguous");
      closed[doc_id] = groups.size();
      groups.push_back(QueryGroup{doc_id, {}});
    }
    auto& g = groups.back();
    if (!g.candidates.empty() && g.candidates.front().grade.has_value() != c.grade.has_value()) {
      throw ParseError(lineno, "document '" + doc_id + "' mixes graded and ungraded candidates");
    }
    g.candidates.push_back(std::move(c));
  }
  return groups;
}

}  // namespace citerank
