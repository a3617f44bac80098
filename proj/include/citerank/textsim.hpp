#pragma once

// Tokenization, TF*IDF weighting and cosine similarity.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "citerank/error.hpp"

namespace citerank {

using Tokens = std::vector<std::string>;

// Lowercases and splits on every non-alphanumeric byte. No stemming, no stop list.
inline Tokens tokenize(std::string_view text) {
  Tokens out;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

// Document frequencies over a collection of token lists. Immutable once built.
class Vocabulary {
 public:
  struct Entry {
    std::size_t index;
    std::size_t df;
  };

  Vocabulary() = default;

  // Indices are assigned in order of first appearance.
  static Vocabulary build(std::span<const Tokens> docs) {
    if (docs.empty()) throw ValidationError("cannot build a vocabulary from an empty corpus");
    Vocabulary v;
    v.corpus_size_ = docs.size();
    std::unordered_set<std::string_view> seen;
    for (const auto& doc : docs) {
      seen.clear();
      for (const auto& tok : doc) {
        if (!seen.insert(tok).second) continue;
        auto [it, inserted] = v.entries_.try_emplace(tok, Entry{v.terms_.size(), 0});
        if (inserted) v.terms_.push_back(tok);
        ++it->second.df;
      }
    }
    return v;
  }

  std::size_t corpus_size() const noexcept { return corpus_size_; }
  std::size_t size() const noexcept { return terms_.size(); }
  const std::string& term(std::size_t index) const { return terms_.at(index); }

  std::optional<Entry> find(std::string_view term) const {
    auto it = entries_.find(std::string(term));
    if (it == entries_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t df(std::string_view term) const {
    auto e = find(term);
    return e ? e->df : 0;
  }

  // ln(N / (1 + df)). Terms present in every document get a negative weight;
  // unseen terms use df = 0.
  double idf(std::string_view term) const {
    return std::log(static_cast<double>(corpus_size_) / (1.0 + static_cast<double>(df(term))));
  }

  // Header "N=<corpus_size>", then "term\tindex\tdf" per term in index order.
  void write(std::ostream& os) const {
    os << "N=" << corpus_size_ << '\n';
    for (std::size_t i = 0; i < terms_.size(); ++i) {
      os << terms_[i] << '\t' << i << '\t' << entries_.at(terms_[i]).df << '\n';
    }
  }

  static Vocabulary read(std::istream& is) {
    Vocabulary v;
    std::string line;
    if (!std::getline(is, line) || line.rfind("N=", 0) != 0) {
      throw ParseError(1, "vocabulary dump must start with N=<corpus_size>");
    }
    try {
      v.corpus_size_ = std::stoull(line.substr(2));
    } catch (const std::exception&) {
      throw ParseError(1, "bad corpus size '" + line.substr(2) + "'");
    }
    if (v.corpus_size_ == 0) throw ParseError(1, "corpus size must be at least 1");
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
      ++lineno;
      if (line.empty()) continue;
      const auto t1 = line.find('\t');
      const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
      if (t2 == std::string::npos) throw ParseError(lineno, "expected term<TAB>index<TAB>df");
      std::string term = line.substr(0, t1);
      std::size_t index = 0, df = 0;
      try {
        index = std::stoull(line.substr(t1 + 1, t2 - t1 - 1));
        df = std::stoull(line.substr(t2 + 1));
      } catch (const std::exception&) {
        throw ParseError(lineno, "non-numeric index or df");
      }
      if (index != v.terms_.size()) throw ParseError(lineno, "indices must be dense and ascending");
      if (df < 1 || df > v.corpus_size_) throw ParseError(lineno, "df out of range for term '" + term + "'");
      if (!v.entries_.try_emplace(term, Entry{index, df}).second) {
        throw ParseError(lineno, "duplicate term '" + term + "'");
      }
      v.terms_.push_back(std::move(term));
    }
    return v;
  }

 private:
  std::size_t corpus_size_ = 0;
  std::vector<std::string> terms_;
  std::unordered_map<std::string, Entry> entries_;
};

// Sparse weighted term vector, sorted by term. Keyed by the term itself so that
// terms outside the vocabulary (weighted with df = 0) stay representable.
class TermVector {
 public:
  using value_type = std::pair<std::string, double>;

  TermVector() = default;

  // Zero weights are dropped; duplicate terms are summed.
  explicit TermVector(std::vector<value_type> entries) {
    std::sort(entries.begin(), entries.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (auto& e : entries) {
      if (!entries_.empty() && entries_.back().first == e.first) {
        entries_.back().second += e.second;
      } else {
        entries_.push_back(std::move(e));
      }
    }
    std::erase_if(entries_, [](const auto& e) { return e.second == 0.0; });
  }

  const std::vector<value_type>& entries() const noexcept { return entries_; }
  bool empty() const noexcept { return entries_.empty(); }
  std::size_t size() const noexcept { return entries_.size(); }

  double weight(std::string_view term) const {
    auto it = std::lower_bound(entries_.begin(), entries_.end(), term,
                               [](const value_type& e, std::string_view t) { return e.first < t; });
    return (it != entries_.end() && it->first == term) ? it->second : 0.0;
  }

  double norm() const {
    double s = 0.0;
    for (const auto& [_, w] : entries_) s += w * w;
    return std::sqrt(s);
  }

  TermVector scaled(double factor) const {
    std::vector<value_type> e = entries_;
    for (auto& [_, w] : e) w *= factor;
    return TermVector(std::move(e));
  }

 private:
  std::vector<value_type> entries_;
};

// Raw term count times idf.
inline TermVector tfidf_vector(const Tokens& tokens, const Vocabulary& vocab) {
  std::unordered_map<std::string_view, std::size_t> tf;
  for (const auto& t : tokens) ++tf[t];
  std::vector<TermVector::value_type> entries;
  entries.reserve(tf.size());
  for (const auto& [term, count] : tf) {
    entries.emplace_back(std::string(term), static_cast<double>(count) * vocab.idf(term));
  }
  return TermVector(std::move(entries));
}

inline TermVector tfidf_vector(std::string_view text, const Vocabulary& vocab) {
  return tfidf_vector(tokenize(text), vocab);
}

// A.B / (|A||B|); 0 when either side has zero norm.
inline double cosine(const TermVector& a, const TermVector& b) {
  const auto& x = a.entries();
  const auto& y = b.entries();
  double dot = 0.0;
  std::size_t i = 0, j = 0;
  while (i < x.size() && j < y.size()) {
    if (x[i].first < y[j].first) {
      ++i;
    } else if (y[j].first < x[i].first) {
      ++j;
    } else {
      dot += x[i].second * y[j].second;
      ++i;
      ++j;
    }
  }
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (na * nb);
}

}  // namespace citerank
