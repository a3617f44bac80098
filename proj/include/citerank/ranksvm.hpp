#pragma once

// Linear ranking SVM trained on within-group preference pairs.
//
//   minimize  1/2 |w|^2 + C * sum_{groups} sum_{grade_i > grade_j} max(0, 1 - w.(x_i - x_j))
//
// Solved in the dual by coordinate descent over the pairs (box 0 <= a_p <= C,
// w = sum a_p d_p), one shuffled pass per epoch.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <numeric>
#include <ostream>
#include <ranges>
#include <span>
#include <string>
#include <vector>

#include "citerank/error.hpp"
#include "citerank/features.hpp"
#include "citerank/random.hpp"
#include "json.hpp"

namespace citerank {

struct Hyperparams {
  double c = 1.0;
  int epochs = 200;
  std::uint64_t seed = 0;
  FeatureMask mask = FeatureMask::all();

  void validate() const {
    if (!(c > 0.0) || !std::isfinite(c)) throw ValidationError("regularization tradeoff C must be positive");
    if (epochs < 1) throw ValidationError("epochs must be at least 1");
    if (mask.empty()) throw ValidationError("feature mask must not be empty");
  }

  bool operator==(const Hyperparams&) const = default;
};

class RankingModel {
 public:
  RankingModel() = default;
  RankingModel(std::vector<double> weights, Hyperparams hp, double training_objective)
      : weights_(std::move(weights)), hyperparams_(std::move(hp)), training_objective_(training_objective) {
    if (weights_.size() != hyperparams_.mask.size()) {
      throw ValidationError("model has " + std::to_string(weights_.size()) + " weights for a mask of " +
                            std::to_string(hyperparams_.mask.size()) + " features");
    }
    for (double w : weights_) {
      if (!std::isfinite(w)) throw ValidationError("model weights must be finite");
    }
  }

  const std::vector<double>& weights() const noexcept { return weights_; }
  const Hyperparams& hyperparams() const noexcept { return hyperparams_; }
  const FeatureMask& mask() const noexcept { return hyperparams_.mask; }
  double training_objective() const noexcept { return training_objective_; }

  double score(const NormalizedFeatures& fv) const {
    double s = 0.0;
    const auto& feats = hyperparams_.mask.features();
    for (std::size_t k = 0; k < feats.size(); ++k) s += weights_[k] * fv[feats[k]];
    return s;
  }

  std::vector<double> scores(const QueryGroup& g) const {
    std::vector<double> out;
    out.reserve(g.size());
    for (const auto& c : g.candidates) out.push_back(score(c.normalized));
    return out;
  }

  bool operator==(const RankingModel&) const = default;

 private:
  std::vector<double> weights_;
  Hyperparams hyperparams_;
  double training_objective_ = 0.0;
};

inline double score(const RankingModel& model, const NormalizedFeatures& fv) { return model.score(fv); }

// Gap ranking: the highest score gets rank n; a block of equal scores takes the
// rank of the lowest position it occupies and the ranks above it are skipped,
// so scores {0.9, 0.5, 0.5, 0.3, 0.1} rank as {5, 3, 3, 2, 1}.
template <std::ranges::random_access_range R>
std::vector<int> rank_with_ties(const R& scores) {
  const std::size_t n = std::ranges::size(scores);
  if (n == 0) throw ValidationError("cannot rank an empty score list");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto at = [&](std::size_t i) { return scores[static_cast<std::ranges::range_difference_t<R>>(i)]; };
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return at(a) > at(b); });
  std::vector<int> ranks(n);
  for (std::size_t lo = 0; lo < n;) {
    std::size_t hi = lo;
    while (hi + 1 < n && at(order[hi + 1]) == at(order[lo])) ++hi;
    const int rank = static_cast<int>(n - hi);
    for (std::size_t k = lo; k <= hi; ++k) ranks[order[k]] = rank;
    lo = hi + 1;
  }
  return ranks;
}

// ---------------------------------------------------------------------------
// Training

using GroupLabels = std::vector<std::vector<int>>;

// Difference vectors x_better - x_worse over the masked features, one per
// within-group pair with strictly different labels.
class PairSet {
 public:
  PairSet(std::span<const QueryGroup> groups, const GroupLabels& labels, const FeatureMask& mask) : dim_(mask.size()) {
    if (labels.size() != groups.size()) throw ValidationError("label list does not match group count");
    const auto& feats = mask.features();
    for (std::size_t g = 0; g < groups.size(); ++g) {
      const auto& cands = groups[g].candidates;
      if (labels[g].size() != cands.size()) {
        throw ValidationError("group '" + groups[g].doc_id + "' label count does not match its candidates");
      }
      for (const auto& c : cands) {
        if (!c.normalized.all_finite()) {
          throw ValidationError("non-finite feature value in group '" + groups[g].doc_id + "'");
        }
      }
      for (std::size_t i = 0; i < cands.size(); ++i) {
        for (std::size_t j = 0; j < cands.size(); ++j) {
          if (labels[g][i] <= labels[g][j]) continue;
          for (Feature f : feats) diffs_.push_back(cands[i].normalized[f] - cands[j].normalized[f]);
        }
      }
    }
  }

  // Pairs given directly as difference vectors of dimension `dim`.
  PairSet(std::size_t dim, std::vector<double> flat_diffs) : dim_(dim), diffs_(std::move(flat_diffs)) {
    if (dim_ == 0 || diffs_.size() % dim_ != 0) throw ValidationError("malformed pair difference list");
  }

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return dim_ == 0 ? 0 : diffs_.size() / dim_; }
  std::span<const double> pair(std::size_t p) const { return {diffs_.data() + p * dim_, dim_}; }

  double objective(std::span<const double> w, double c) const {
    double reg = 0.0;
    for (double x : w) reg += x * x;
    double loss = 0.0;
    for (std::size_t p = 0; p < size(); ++p) loss += std::max(0.0, 1.0 - dot(w, pair(p)));
    return 0.5 * reg + c * loss;
  }

  static double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s;
  }

 private:
  std::size_t dim_;
  std::vector<double> diffs_;
};

inline GroupLabels group_grades(std::span<const QueryGroup> groups) {
  GroupLabels out;
  out.reserve(groups.size());
  for (const auto& g : groups) out.push_back(g.grades());
  return out;
}

// Stops early once a full pass leaves every projected gradient below 1e-10.
// Deterministic in (pairs, c, epochs, seed).
inline std::vector<double> solve_rank_svm(const PairSet& pairs, double c, int epochs, std::uint64_t seed) {
  const std::size_t dim = pairs.dim();
  const std::size_t count = pairs.size();
  if (count == 0) throw ValidationError("no trainable pairs: every group has uniform grades");

  std::vector<double> w(dim, 0.0), alpha(count, 0.0), sq(count);
  for (std::size_t p = 0; p < count; ++p) sq[p] = PairSet::dot(pairs.pair(p), pairs.pair(p));
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  for (int epoch = 0; epoch < epochs; ++epoch) {
    rng.shuffle(order);
    double worst = 0.0;
    for (std::size_t p : order) {
      if (sq[p] == 0.0) continue;  // identical vectors: loss is 1 whatever w is
      const auto d = pairs.pair(p);
      const double g = PairSet::dot(w, d) - 1.0;
      double pg = g;
      if (alpha[p] == 0.0) pg = std::min(g, 0.0);
      if (alpha[p] == c) pg = std::max(g, 0.0);
      worst = std::max(worst, std::abs(pg));
      if (pg == 0.0) continue;
      const double next = std::clamp(alpha[p] - g / sq[p], 0.0, c);
      const double delta = next - alpha[p];
      alpha[p] = next;
      for (std::size_t k = 0; k < dim; ++k) w[k] += delta * d[k];
    }
    if (worst < 1e-10) break;
  }
  return w;
}

// Trains on explicit labels (one list per group, aligned with candidates).
inline RankingModel train(std::span<const QueryGroup> groups, const GroupLabels& labels, const Hyperparams& hp) {
  hp.validate();
  const PairSet pairs(groups, labels, hp.mask);
  auto w = solve_rank_svm(pairs, hp.c, hp.epochs, hp.seed);
  const double obj = pairs.objective(w, hp.c);
  return RankingModel(std::move(w), hp, obj);
}

inline RankingModel train(std::span<const QueryGroup> groups, const Hyperparams& hp) {
  return train(groups, group_grades(groups), hp);
}

inline double objective(const RankingModel& model, std::span<const QueryGroup> groups) {
  const PairSet pairs(groups, group_grades(groups), model.mask());
  return pairs.objective(model.weights(), model.hyperparams().c);
}

inline std::vector<int> rank_group(const RankingModel& model, const QueryGroup& g) {
  return rank_with_ties(model.scores(g));
}

// ---------------------------------------------------------------------------
// Model file

inline nlohmann::ordered_json to_json(const RankingModel& m) {
  nlohmann::ordered_json j;
  j["feature_mask"] = m.mask().names();
  j["weights"] = m.weights();
  nlohmann::ordered_json hp;
  hp["c"] = m.hyperparams().c;
  hp["epochs"] = m.hyperparams().epochs;
  hp["seed"] = m.hyperparams().seed;
  j["hyperparams"] = std::move(hp);
  j["training_objective"] = m.training_objective();
  return j;
}

inline void write_model(const RankingModel& m, std::ostream& out) { out << to_json(m).dump(2) << '\n'; }

inline RankingModel read_model(std::istream& in) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(0, std::string("malformed model file: ") + e.what());
  }
  try {
    Hyperparams hp;
    std::vector<Feature> feats;
    for (const auto& name : j.at("feature_mask")) feats.push_back(parse_feature(name.get<std::string>()));
    hp.mask = FeatureMask(std::move(feats));
    const auto& h = j.at("hyperparams");
    hp.c = h.at("c").get<double>();
    hp.epochs = h.at("epochs").get<int>();
    hp.seed = h.at("seed").get<std::uint64_t>();
    hp.validate();
    return RankingModel(j.at("weights").get<std::vector<double>>(), hp, j.at("training_objective").get<double>());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(0, std::string("invalid model file: ") + e.what());
  }
}

}  // namespace citerank
