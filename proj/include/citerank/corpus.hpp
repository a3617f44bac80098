#pragma once

// Citing documents, their references, citation markers and external rankings.
//
// Citation markers are inline tokens of the form [[cite:<ref_id>]] inside the
// full_text and discussion fields.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <vector>

#include "citerank/error.hpp"
#include "citerank/textsim.hpp"
#include "json.hpp"

namespace citerank {

struct Reference {
  std::string ref_id;
  std::string title;
  std::string abstract;
  int year = 0;
  std::int64_t citation_impact = 0;

  bool operator==(const Reference&) const = default;
};

using Grades = std::map<std::string, int>;

struct Document {
  std::string doc_id;
  std::string title;
  std::string abstract;
  std::string full_text;
  std::string discussion;
  int year = 0;
  std::vector<Reference> references;
  std::optional<Grades> annotations;

  const Reference* find_reference(std::string_view ref_id) const {
    for (const auto& r : references) {
      if (r.ref_id == ref_id) return &r;
    }
    return nullptr;
  }

  bool operator==(const Document&) const = default;
};

using Corpus = std::vector<Document>;

struct ParsedCorpus {
  Corpus corpus;
  std::vector<std::string> warnings;
};

inline constexpr std::string_view kMarkerOpen = "[[cite:";
inline constexpr std::string_view kMarkerClose = "]]";

struct CitationMarker {
  std::string ref_id;
  std::size_t begin;  // byte offset of "[[cite:"
  std::size_t end;    // one past "]]"
};

// All markers in order of appearance. Throws on an unterminated or empty marker.
inline std::vector<CitationMarker> find_markers(std::string_view text) {
  std::vector<CitationMarker> out;
  std::size_t pos = 0;
  while ((pos = text.find(kMarkerOpen, pos)) != std::string_view::npos) {
    const std::size_t id_begin = pos + kMarkerOpen.size();
    const std::size_t close = text.find(kMarkerClose, id_begin);
    if (close == std::string_view::npos) {
      throw ValidationError("unterminated citation marker at offset " + std::to_string(pos));
    }
    std::string id(text.substr(id_begin, close - id_begin));
    if (id.empty()) throw ValidationError("empty citation marker at offset " + std::to_string(pos));
    out.push_back({std::move(id), pos, close + kMarkerClose.size()});
    pos = close + kMarkerClose.size();
  }
  return out;
}

// Replaces every marker by a single space.
inline std::string strip_markers(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  std::size_t last = 0;
  for (const auto& m : find_markers(text)) {
    out.append(text.substr(last, m.begin - last));
    out.push_back(' ');
    last = m.end;
  }
  out.append(text.substr(last));
  return out;
}

// ---------------------------------------------------------------------------
// Validation

namespace detail {

inline void check_markers(const Document& doc, std::string_view field, std::string_view text) {
  std::vector<CitationMarker> markers;
  try {
    markers = find_markers(text);
  } catch (const ValidationError& e) {
    throw ValidationError("document '" + doc.doc_id + "' " + std::string(field) + ": " + e.what());
  }
  for (const auto& m : markers) {
    if (doc.find_reference(m.ref_id) == nullptr) {
      throw ValidationError("document '" + doc.doc_id + "' " + std::string(field) +
                            " cites unknown reference '" + m.ref_id + "'");
    }
  }
}

}  // namespace detail

// Throws ValidationError on hard invariant violations. Annotation sets that are
// not a permutation of 1..5 are accepted and reported through `warnings`.
inline void validate_document(const Document& doc, std::vector<std::string>* warnings = nullptr) {
  if (doc.doc_id.empty()) throw ValidationError("document with empty doc_id");
  if (doc.year <= 0) throw ValidationError("document '" + doc.doc_id + "' has non-positive year");
  std::set<std::string_view> ids;
  for (const auto& r : doc.references) {
    if (r.ref_id.empty()) throw ValidationError("document '" + doc.doc_id + "' has a reference with empty ref_id");
    if (!ids.insert(r.ref_id).second) {
      throw ValidationError("document '" + doc.doc_id + "' has duplicate ref_id '" + r.ref_id + "'");
    }
    if (r.year <= 0) {
      throw ValidationError("document '" + doc.doc_id + "' reference '" + r.ref_id + "' has non-positive year");
    }
    if (r.citation_impact < 0) {
      throw ValidationError("document '" + doc.doc_id + "' reference '" + r.ref_id + "' has negative citation_impact");
    }
  }
  detail::check_markers(doc, "full_text", doc.full_text);
  detail::check_markers(doc, "discussion", doc.discussion);

  if (!doc.annotations) return;
  std::set<int> grades;
  for (const auto& [ref_id, grade] : *doc.annotations) {
    if (!ids.contains(ref_id)) {
      throw ValidationError("document '" + doc.doc_id + "' annotates unknown reference '" + ref_id + "'");
    }
    if (grade < 1 || grade > 5) {
      throw ValidationError("document '" + doc.doc_id + "' has grade " + std::to_string(grade) +
                            " outside 1..5 for '" + ref_id + "'");
    }
    grades.insert(grade);
  }
  if (warnings && (doc.annotations->size() != 5 || grades.size() != 5)) {
    warnings->push_back("document '" + doc.doc_id + "': annotations are not a permutation of 1..5 (" +
                        std::to_string(doc.annotations->size()) + " entries, " +
                        std::to_string(grades.size()) + " distinct grades)");
  }
}

// ---------------------------------------------------------------------------
// Line-delimited JSON corpus format

namespace detail {

template <typename T>
T required(const nlohmann::json& j, const char* key, std::size_t line) {
  auto it = j.find(key);
  if (it == j.end()) throw ParseError(line, std::string("missing field '") + key + "'");
  try {
    if constexpr (std::is_same_v<T, std::string>) {
      if (!it->is_string()) throw ParseError(line, std::string("field '") + key + "' must be a string");
    } else if constexpr (std::is_integral_v<T>) {
      if (!it->is_number_integer()) throw ParseError(line, std::string("field '") + key + "' must be an integer");
    }
    return it->get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(line, std::string("field '") + key + "': " + e.what());
  }
}

inline void reject_unknown(const nlohmann::json& j, std::initializer_list<std::string_view> allowed,
                           std::size_t line, std::string_view what) {
  for (const auto& [key, _] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ParseError(line, "unknown " + std::string(what) + " field '" + key + "'");
    }
  }
}

inline Document document_from_json(const nlohmann::json& j, std::size_t line) {
  if (!j.is_object()) throw ParseError(line, "record is not a JSON object");
  reject_unknown(j, {"doc_id", "title", "abstract", "full_text", "discussion", "year", "references", "annotations"},
                 line, "document");
  Document d;
  d.doc_id = required<std::string>(j, "doc_id", line);
  d.title = required<std::string>(j, "title", line);
  d.abstract = required<std::string>(j, "abstract", line);
  d.full_text = required<std::string>(j, "full_text", line);
  d.discussion = required<std::string>(j, "discussion", line);
  d.year = required<int>(j, "year", line);
  const auto refs = j.find("references");
  if (refs == j.end() || !refs->is_array()) throw ParseError(line, "field 'references' must be an array");
  for (const auto& r : *refs) {
    if (!r.is_object()) throw ParseError(line, "reference is not a JSON object");
    reject_unknown(r, {"ref_id", "title", "abstract", "year", "citation_impact"}, line, "reference");
    Reference ref;
    ref.ref_id = required<std::string>(r, "ref_id", line);
    ref.title = required<std::string>(r, "title", line);
    ref.abstract = required<std::string>(r, "abstract", line);
    ref.year = required<int>(r, "year", line);
    ref.citation_impact = required<std::int64_t>(r, "citation_impact", line);
    d.references.push_back(std::move(ref));
  }
  if (auto ann = j.find("annotations"); ann != j.end() && !ann->is_null()) {
    if (!ann->is_object()) throw ParseError(line, "field 'annotations' must be an object");
    Grades g;
    for (const auto& [ref_id, grade] : ann->items()) {
      if (!grade.is_number_integer()) throw ParseError(line, "grade for '" + ref_id + "' must be an integer");
      g[ref_id] = grade.get<int>();
    }
    d.annotations = std::move(g);
  }
  return d;
}

}  // namespace detail

inline nlohmann::ordered_json to_json(const Document& d) {
  nlohmann::ordered_json j;
  j["doc_id"] = d.doc_id;
  j["title"] = d.title;
  j["abstract"] = d.abstract;
  j["full_text"] = d.full_text;
  j["discussion"] = d.discussion;
  j["year"] = d.year;
  auto refs = nlohmann::ordered_json::array();
  for (const auto& r : d.references) {
    nlohmann::ordered_json rj;
    rj["ref_id"] = r.ref_id;
    rj["title"] = r.title;
    rj["abstract"] = r.abstract;
    rj["year"] = r.year;
    rj["citation_impact"] = r.citation_impact;
    refs.push_back(std::move(rj));
  }
  j["references"] = std::move(refs);
  if (d.annotations) {
    nlohmann::ordered_json a = nlohmann::ordered_json::object();
    for (const auto& [id, g] : *d.annotations) a[id] = g;
    j["annotations"] = std::move(a);
  }
  return j;
}

// One document per line. Blank lines are skipped. Errors carry the line number.
inline ParsedCorpus parse_corpus(std::istream& in) {
  ParsedCorpus out;
  std::set<std::string> seen;
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
    Document d = detail::document_from_json(j, lineno);
    if (!seen.insert(d.doc_id).second) throw ParseError(lineno, "duplicate doc_id '" + d.doc_id + "'");
    try {
      validate_document(d, &out.warnings);
    } catch (const ValidationError& e) {
      throw ParseError(lineno, e.what());
    }
    out.corpus.push_back(std::move(d));
  }
  return out;
}

inline void serialize_corpus(const Corpus& corpus, std::ostream& out) {
  for (const auto& d : corpus) out << to_json(d).dump() << '\n';
}

// ---------------------------------------------------------------------------
// Citation contexts

struct CitationContexts {
  std::string ref_id;
  std::vector<Tokens> contexts_full;
  std::vector<Tokens> contexts_discussion;
  std::size_t mention_count_full = 0;
  std::size_t mention_count_discussion = 0;
};

namespace detail {

// Word tokens of `text` with each marker recorded at its word position.
struct MarkedText {
  Tokens words;
  std::vector<std::pair<std::string, std::size_t>> markers;  // (ref_id, number of words before it)
};

inline MarkedText split_marked(std::string_view text) {
  MarkedText out;
  std::size_t last = 0;
  for (const auto& m : find_markers(text)) {
    for (auto& t : tokenize(text.substr(last, m.begin - last))) out.words.push_back(std::move(t));
    out.markers.emplace_back(m.ref_id, out.words.size());
    last = m.end;
  }
  for (auto& t : tokenize(text.substr(last))) out.words.push_back(std::move(t));
  return out;
}

inline void collect_windows(std::string_view text, std::size_t window,
                            std::map<std::string, CitationContexts>& out, bool discussion) {
  const MarkedText mt = split_marked(text);
  for (const auto& [ref_id, at] : mt.markers) {
    auto it = out.find(ref_id);
    if (it == out.end()) continue;
    const std::size_t lo = at >= window ? at - window : 0;
    const std::size_t hi = std::min(mt.words.size(), at + window);
    Tokens ctx(mt.words.begin() + static_cast<std::ptrdiff_t>(lo), mt.words.begin() + static_cast<std::ptrdiff_t>(hi));
    auto& c = it->second;
    if (discussion) {
      c.contexts_discussion.push_back(std::move(ctx));
      ++c.mention_count_discussion;
    } else {
      c.contexts_full.push_back(std::move(ctx));
      ++c.mention_count_full;
    }
  }
}

}  // namespace detail

// Up to `window` word tokens either side of each marker. Other markers inside a
// window are not words and are skipped. Every reference gets an entry.
inline std::map<std::string, CitationContexts> extract_citation_contexts(const Document& doc,
                                                                         std::size_t window = 10) {
  std::map<std::string, CitationContexts> out;
  for (const auto& r : doc.references) out[r.ref_id].ref_id = r.ref_id;
  detail::collect_windows(doc.full_text, window, out, false);
  detail::collect_windows(doc.discussion, window, out, true);
  return out;
}

// ---------------------------------------------------------------------------
// IDF corpus and candidate selection

// One text unit per citing full text (markers stripped) and one per reference
// (title + abstract).
inline std::vector<Tokens> idf_units(const Corpus& corpus) {
  std::vector<Tokens> units;
  for (const auto& d : corpus) {
    units.push_back(tokenize(strip_markers(d.full_text)));
    for (const auto& r : d.references) units.push_back(tokenize(r.title + " " + r.abstract));
  }
  return units;
}

inline Vocabulary build_corpus_vocabulary(const Corpus& corpus) {
  const auto units = idf_units(corpus);
  return Vocabulary::build(units);
}

struct ScoredReference {
  std::string ref_id;
  double similarity;
};

// References with a non-empty abstract, by descending abstract-abstract
// TF*IDF cosine to the citing abstract; equal cosines by ascending ref_id.
inline std::vector<ScoredReference> rank_by_abstract_similarity(const Document& doc, const Vocabulary& vocab) {
  const TermVector query = tfidf_vector(doc.abstract, vocab);
  std::vector<ScoredReference> scored;
  for (const auto& r : doc.references) {
    const Tokens toks = tokenize(r.abstract);
    if (toks.empty()) continue;
    scored.push_back({r.ref_id, cosine(query, tfidf_vector(toks, vocab))});
  }
  std::sort(scored.begin(), scored.end(), [](const ScoredReference& a, const ScoredReference& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return a.ref_id < b.ref_id;
  });
  return scored;
}

inline std::vector<std::string> select_candidates(const Document& doc, const Vocabulary& vocab, std::size_t k = 5) {
  auto scored = rank_by_abstract_similarity(doc, vocab);
  if (scored.size() < k) {
    throw ValidationError("document '" + doc.doc_id + "' has " + std::to_string(scored.size()) +
                          " references with abstracts, fewer than the " + std::to_string(k) + " candidates required");
  }
  std::vector<std::string> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) out.push_back(std::move(scored[i].ref_id));
  return out;
}

// ---------------------------------------------------------------------------
// External related-article rankings

struct ExternalRanking {
  std::string doc_id;
  std::map<std::string, std::size_t> positions;  // 1-based; first occurrence wins
  std::size_t list_length = 0;

  std::optional<std::size_t> position(const std::string& id) const {
    auto it = positions.find(id);
    if (it == positions.end()) return std::nullopt;
    return it->second;
  }
};

inline ExternalRanking make_external_ranking(std::string doc_id, const std::vector<std::string>& ranked_list) {
  ExternalRanking ext;
  ext.doc_id = std::move(doc_id);
  ext.list_length = ranked_list.size();
  for (std::size_t i = 0; i < ranked_list.size(); ++i) ext.positions.try_emplace(ranked_list[i], i + 1);
  return ext;
}

// Lines of {"doc_id": ..., "ranked_list": [...]}.
inline std::map<std::string, ExternalRanking> parse_external_rankings(std::istream& in) {
  std::map<std::string, ExternalRanking> out;
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
    auto doc_id = detail::required<std::string>(j, "doc_id", lineno);
    auto list = j.find("ranked_list");
    if (list == j.end() || !list->is_array()) throw ParseError(lineno, "field 'ranked_list' must be an array");
    std::vector<std::string> ids;
    for (const auto& e : *list) {
      if (!e.is_string()) throw ParseError(lineno, "ranked_list entries must be strings");
      ids.push_back(e.get<std::string>());
    }
    if (out.contains(doc_id)) throw ParseError(lineno, "duplicate doc_id '" + doc_id + "'");
    auto ext = make_external_ranking(doc_id, ids);
    out.emplace(std::move(doc_id), std::move(ext));
  }
  return out;
}

struct ExternalRelevance {
  std::map<std::string, int> relevance;
  bool none_found = false;
};

// Found candidates, by ascending external position, get n, n-1, ...; every
// absent candidate gets one below the lowest assigned value. With no matches
// at all every candidate gets 1 and none_found is set.
inline ExternalRelevance external_to_relevance(const std::vector<std::string>& candidates, const ExternalRanking& ext) {
  if (candidates.empty()) throw ValidationError("external_to_relevance needs at least one candidate");
  std::vector<std::pair<std::size_t, std::string>> found;
  std::vector<std::string> absent;
  for (const auto& c : candidates) {
    if (auto p = ext.position(c)) {
      found.emplace_back(*p, c);
    } else {
      absent.push_back(c);
    }
  }
  ExternalRelevance out;
  if (found.empty()) {
    out.none_found = true;
    for (const auto& c : candidates) out.relevance[c] = 1;
    return out;
  }
  std::sort(found.begin(), found.end());
  int rel = static_cast<int>(candidates.size());
  for (const auto& [_, id] : found) out.relevance[id] = rel--;
  for (const auto& id : absent) out.relevance[id] = rel;
  return out;
}

}  // namespace citerank
