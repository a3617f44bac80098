#pragma once

// Seeded synthetic corpora whose annotations follow a planted linear model
// over the normalized features.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "citerank/corpus.hpp"
#include "citerank/error.hpp"
#include "citerank/features.hpp"
#include "citerank/random.hpp"

namespace citerank {

struct SynthConfig {
  std::size_t documents = 90;
  std::size_t references_per_document = 5;
  std::size_t annotated_per_document = 5;
  std::size_t vocabulary_size = 2000;
  std::array<double, kFeatureCount> planted_weights{};
  // Standard deviation of Gaussian noise added to each planted score.
  double score_noise = 0.0;
  // Minimum gap between consecutive sorted planted scores within a document.
  // Enforced by redrawing reference years and citation counts, which leaves
  // the text and hence the vocabulary untouched.
  double min_score_gap = 0.0;
  int max_redraws = 200;

  void validate() const {
    if (documents == 0) throw ValidationError("synthetic corpus needs at least one document");
    if (vocabulary_size == 0) throw ValidationError("synthetic corpus needs a non-empty vocabulary");
    if (references_per_document == 0) throw ValidationError("synthetic documents need references");
    if (annotated_per_document == 0 || annotated_per_document > std::min<std::size_t>(5, references_per_document)) {
      throw ValidationError("annotated references must be between 1 and min(5, reference count)");
    }
    for (double w : planted_weights) {
      if (!std::isfinite(w)) throw ValidationError("planted weights must be finite");
    }
    if (!(score_noise >= 0.0) || !(min_score_gap >= 0.0)) {
      throw ValidationError("noise and gap must be non-negative");
    }
  }
};

namespace detail {

class TextSampler {
 public:
  TextSampler(std::size_t vocab, Rng& rng) : vocab_(vocab), rng_(rng) {}

  std::string word(std::size_t id) const { return "w" + std::to_string(id); }

  std::vector<std::size_t> topic(std::size_t size) {
    std::vector<std::size_t> t;
    for (std::size_t i = 0; i < size; ++i) t.push_back(rng_.index(vocab_));
    return t;
  }

  // Draws from `pool` with probability p_pool, else uniformly; a few function
  // words appear everywhere.
  std::string draw(const std::vector<std::size_t>& pool, double p_pool) {
    static constexpr std::array<const char*, 4> kCommon = {"the", "of", "and", "in"};
    const double u = rng_.uniform();
    if (u < 0.12) return kCommon[rng_.index(kCommon.size())];
    if (!pool.empty() && rng_.uniform() < p_pool) return word(pool[rng_.index(pool.size())]);
    return word(rng_.index(vocab_));
  }

  std::vector<std::string> words(std::size_t n, const std::vector<std::size_t>& pool, double p_pool) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(draw(pool, p_pool));
    return out;
  }

 private:
  std::size_t vocab_;
  Rng& rng_;
};

inline std::string join(const std::vector<std::string>& words) {
  std::string s;
  for (const auto& w : words) {
    if (!s.empty()) s += ' ';
    s += w;
  }
  return s;
}

// Text of `length` background words with `mentions[r]` markers for reference
// r at random slots; the words around each marker lean towards that
// reference's vocabulary.
inline std::string marked_text(TextSampler& ts, Rng& rng, std::size_t length, const std::vector<std::size_t>& doc_topic,
                               const std::vector<std::vector<std::size_t>>& ref_pools,
                               const std::vector<std::string>& ref_ids, const std::vector<std::size_t>& mentions) {
  std::vector<std::string> tokens = ts.words(length, doc_topic, 0.5);
  std::vector<std::pair<std::size_t, std::size_t>> slots;  // (insert-before index, reference)
  for (std::size_t r = 0; r < mentions.size(); ++r) {
    for (std::size_t m = 0; m < mentions[r]; ++m) slots.emplace_back(rng.index(length + 1), r);
  }
  std::sort(slots.begin(), slots.end());
  for (const auto& [at, r] : slots) {
    const std::size_t lo = at >= 4 ? at - 4 : 0;
    const std::size_t hi = std::min(length, at + 4);
    for (std::size_t k = lo; k < hi; ++k) tokens[k] = ts.draw(ref_pools[r], 0.8);
  }
  std::string out;
  std::size_t next_slot = 0;
  for (std::size_t i = 0; i <= length; ++i) {
    while (next_slot < slots.size() && slots[next_slot].first == i) {
      if (!out.empty()) out += ' ';
      out += "[[cite:" + ref_ids[slots[next_slot].second] + "]]";
      ++next_slot;
    }
    if (i < length) {
      if (!out.empty()) out += ' ';
      out += tokens[i];
    }
  }
  return out;
}

inline void draw_citation_data(Document& doc, Rng& rng) {
  for (auto& r : doc.references) {
    r.year = doc.year - static_cast<int>(rng.between(0, 30));
    r.citation_impact = static_cast<std::int64_t>(std::floor(std::exp(rng.uniform(0.0, 9.0))));
  }
}

inline double min_gap(std::vector<double> scores) {
  std::sort(scores.begin(), scores.end());
  double gap = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < scores.size(); ++i) gap = std::min(gap, scores[i] - scores[i - 1]);
  return gap;
}

}  // namespace detail

inline double planted_score(const std::array<double, kFeatureCount>& w, const NormalizedFeatures& x) {
  double s = 0.0;
  for (std::size_t k = 0; k < kFeatureCount; ++k) s += w[k] * x.values()[k];
  return s;
}

// Deterministic in (config, seed). Annotated references are all references
// when every one is annotated, otherwise the top abstract-similarity
// candidates; grades follow descending planted score (earlier candidate wins
// exact ties).
inline Corpus generate_synthetic_corpus(const SynthConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  detail::TextSampler ts(cfg.vocabulary_size, rng);
  Corpus corpus;
  corpus.reserve(cfg.documents);

  for (std::size_t d = 0; d < cfg.documents; ++d) {
    Document doc;
    doc.doc_id = "D" + std::to_string(d + 1);
    doc.year = 2016;
    const auto topic = ts.topic(40);
    doc.title = detail::join(ts.words(8, topic, 0.9));
    doc.abstract = detail::join(ts.words(60, topic, 0.7));

    std::vector<std::vector<std::size_t>> pools;
    std::vector<std::string> ids;
    for (std::size_t r = 0; r < cfg.references_per_document; ++r) {
      const double related = rng.uniform(0.1, 0.9);
      auto own = ts.topic(25);
      std::vector<std::size_t> pool;
      for (std::size_t k = 0; k < 30; ++k) {
        pool.push_back(rng.uniform() < related ? topic[rng.index(topic.size())] : own[rng.index(own.size())]);
      }
      Reference ref;
      ref.ref_id = "R" + std::to_string(r + 1);
      ref.title = detail::join(ts.words(8, pool, 0.85));
      ref.abstract = detail::join(ts.words(50, pool, 0.75));
      ids.push_back(ref.ref_id);
      pools.push_back(std::move(pool));
      doc.references.push_back(std::move(ref));
    }

    std::vector<std::size_t> full_mentions, disc_mentions;
    std::size_t total = 0;
    for (std::size_t r = 0; r < cfg.references_per_document; ++r) {
      full_mentions.push_back(static_cast<std::size_t>(rng.between(0, 6)));
      disc_mentions.push_back(static_cast<std::size_t>(rng.between(0, 3)));
      total += full_mentions.back();
    }
    if (total == 0) full_mentions[rng.index(full_mentions.size())] = 1;
    doc.full_text = detail::marked_text(ts, rng, 400, topic, pools, ids, full_mentions);
    doc.discussion = detail::marked_text(ts, rng, 150, topic, pools, ids, disc_mentions);
    detail::draw_citation_data(doc, rng);
    corpus.push_back(std::move(doc));
  }

  const Vocabulary vocab = build_corpus_vocabulary(corpus);
  const CandidateSelection sel = cfg.annotated_per_document == cfg.references_per_document
                                     ? CandidateSelection::all
                                     : CandidateSelection::annotated;
  for (auto& doc : corpus) {
    std::vector<std::string> cands;
    if (sel == CandidateSelection::all) {
      for (const auto& r : doc.references) cands.push_back(r.ref_id);
    } else {
      cands = select_candidates(doc, vocab, cfg.annotated_per_document);
    }
    doc.annotations = Grades{};
    for (const auto& id : cands) (*doc.annotations)[id] = 1;

    std::vector<double> scores;
    for (int attempt = 0;; ++attempt) {
      const QueryGroup g = featurize_document(doc, vocab, CandidateSelection::annotated);
      scores.clear();
      for (const auto& id : cands) {
        const auto it = std::find_if(g.candidates.begin(), g.candidates.end(),
                                     [&](const Candidate& c) { return c.ref_id == id; });
        scores.push_back(planted_score(cfg.planted_weights, it->normalized) + cfg.score_noise * rng.normal());
      }
      if (cfg.min_score_gap <= 0.0 || detail::min_gap(scores) >= cfg.min_score_gap ||
          attempt >= cfg.max_redraws) {
        break;
      }
      detail::draw_citation_data(doc, rng);
    }

    std::vector<std::size_t> order(cands.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    const int n = static_cast<int>(cands.size());
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
      (*doc.annotations)[cands[order[pos]]] = n - static_cast<int>(pos);
    }
    validate_document(doc);
  }
  return corpus;
}

}  // namespace citerank
