#pragma once

// NDCG, Kendall's tau and average-precision tau.
//
// `truth` holds graded relevances (higher is better). `system` holds scores or
// gap ranks (higher is better), index-aligned with truth.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "citerank/error.hpp"

namespace citerank {

enum class DcgMode {
  standard,  // sum_i (2^rel_i - 1) / log2(i + 1)
  literal,   // standard plus a leading rel_1 term
};

inline std::string_view to_string(DcgMode m) { return m == DcgMode::literal ? "literal" : "standard"; }

inline DcgMode parse_dcg_mode(std::string_view s) {
  if (s == "standard") return DcgMode::standard;
  if (s == "literal") return DcgMode::literal;
  throw ValidationError("unknown DCG mode '" + std::string(s) + "'");
}

// Relevances listed in presentation order, best slot first.
inline double dcg(std::span<const int> rels, DcgMode mode = DcgMode::standard) {
  if (rels.empty()) throw ValidationError("dcg of an empty list");
  double sum = mode == DcgMode::literal ? static_cast<double>(rels.front()) : 0.0;
  for (std::size_t i = 0; i < rels.size(); ++i) {
    sum += (std::exp2(static_cast<double>(rels[i])) - 1.0) / std::log2(static_cast<double>(i) + 2.0);
  }
  return sum;
}

namespace detail {

inline void check_aligned(std::size_t truth, std::size_t system, std::size_t min_len) {
  if (truth != system) {
    throw ValidationError("truth and system lengths differ (" + std::to_string(truth) + " vs " +
                          std::to_string(system) + ")");
  }
  if (truth < min_len) throw ValidationError("need at least " + std::to_string(min_len) + " items");
}

// Indices by descending system value; equal values keep ascending index.
inline std::vector<std::size_t> system_order(std::span<const double> system) {
  std::vector<std::size_t> order(system.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return system[a] > system[b]; });
  return order;
}

inline int sign(double x) { return (x > 0) - (x < 0); }

}  // namespace detail

// DCG of the truth grades in system order over the ideal DCG. No value when
// the ideal DCG is zero.
inline std::optional<double> ndcg(std::span<const int> truth, std::span<const double> system,
                                  DcgMode mode = DcgMode::standard) {
  detail::check_aligned(truth.size(), system.size(), 1);
  std::vector<int> presented;
  presented.reserve(truth.size());
  for (std::size_t i : detail::system_order(system)) presented.push_back(truth[i]);
  std::vector<int> ideal(truth.begin(), truth.end());
  std::sort(ideal.begin(), ideal.end(), std::greater<>());
  const double idcg = dcg(ideal, mode);
  if (idcg == 0.0) return std::nullopt;
  return dcg(presented, mode) / idcg;
}

// (C - D) / (n(n-1)/2); pairs tied in either list count toward neither.
inline double kendall_tau(std::span<const int> truth, std::span<const double> system) {
  detail::check_aligned(truth.size(), system.size(), 2);
  const std::size_t n = truth.size();
  long long net = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      net += detail::sign(static_cast<double>(truth[i] - truth[j])) * detail::sign(system[i] - system[j]);
    }
  }
  return static_cast<double>(net) / (static_cast<double>(n) * static_cast<double>(n - 1) / 2.0);
}

// 2/(N-1) * sum_{i=2..N} C(i)/(i-1) - 1, where C(i) counts the items ranked
// above position i by the system that truth also places above the item at i.
// Items tied in the system are scored by the exact expectation over uniformly
// random orderings of each tie block. Ties in truth are rejected.
inline double tau_ap(std::span<const int> truth, std::span<const double> system) {
  detail::check_aligned(truth.size(), system.size(), 2);
  const std::size_t n = truth.size();
  {
    std::vector<int> sorted(truth.begin(), truth.end());
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw ValidationError("tau_ap requires strictly ordered truth grades");
    }
  }
  const auto order = detail::system_order(system);
  double sum = 0.0;
  for (std::size_t lo = 0; lo < n;) {
    std::size_t hi = lo;
    while (hi + 1 < n && system[order[hi + 1]] == system[order[lo]]) ++hi;
    const std::size_t m = hi - lo + 1;
    for (std::size_t a = lo; a <= hi; ++a) {
      const int g = truth[order[a]];
      double above = 0.0;  // strictly higher blocks
      for (std::size_t b = 0; b < lo; ++b) above += truth[order[b]] > g ? 1.0 : 0.0;
      double peers = 0.0;  // same block
      for (std::size_t b = lo; b <= hi; ++b) peers += (b != a && truth[order[b]] > g) ? 1.0 : 0.0;
      // Position lo + j (0-based) is equally likely for j in [0, m); given j,
      // the expected number of better peers above is j * peers / (m - 1).
      double expected = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        const std::size_t pos = lo + j;
        if (pos == 0) continue;
        const double c = above + (m > 1 ? static_cast<double>(j) * peers / static_cast<double>(m - 1) : 0.0);
        expected += c / static_cast<double>(pos);
      }
      sum += expected / static_cast<double>(m);
    }
    lo = hi + 1;
  }
  return 2.0 / static_cast<double>(n - 1) * sum - 1.0;
}

// Integer system values (gap ranks) convenience overloads.
namespace detail {
inline std::vector<double> as_doubles(std::span<const int> v) { return {v.begin(), v.end()}; }
}  // namespace detail

inline std::optional<double> ndcg(std::span<const int> truth, std::span<const int> system,
                                  DcgMode mode = DcgMode::standard) {
  return ndcg(truth, std::span<const double>(detail::as_doubles(system)), mode);
}
inline double kendall_tau(std::span<const int> truth, std::span<const int> system) {
  return kendall_tau(truth, std::span<const double>(detail::as_doubles(system)));
}
inline double tau_ap(std::span<const int> truth, std::span<const int> system) {
  return tau_ap(truth, std::span<const double>(detail::as_doubles(system)));
}

}  // namespace citerank
