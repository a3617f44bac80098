#pragma once

// Baselines, random sub-sampling evaluation, forward feature selection,
// cross-label training and paired significance testing.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <iomanip>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <variant>
#include <vector>

#include "citerank/corpus.hpp"
#include "citerank/error.hpp"
#include "citerank/features.hpp"
#include "citerank/metrics.hpp"
#include "citerank/random.hpp"
#include "citerank/ranksvm.hpp"
#include "json.hpp"

namespace citerank {

using Rankings = std::vector<std::vector<int>>;

// ---------------------------------------------------------------------------
// Per-query evaluation

struct QueryMetrics {
  std::string doc_id;
  std::optional<double> ndcg;
  std::optional<double> tau;
  std::optional<double> tau_ap;  // absent when truth grades tie

  bool operator==(const QueryMetrics&) const = default;
};

inline QueryMetrics evaluate_query(const std::string& doc_id, std::span<const int> truth, std::span<const int> ranks,
                                   DcgMode mode) {
  QueryMetrics m;
  m.doc_id = doc_id;
  m.ndcg = ndcg(truth, ranks, mode);
  if (truth.size() >= 2) {
    m.tau = kendall_tau(truth, ranks);
    std::vector<int> sorted(truth.begin(), truth.end());
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end()) m.tau_ap = tau_ap(truth, ranks);
  }
  return m;
}

// Metrics of `rankings` against each group's author grades.
inline std::vector<QueryMetrics> evaluate_rankings(std::span<const QueryGroup> groups, const Rankings& rankings,
                                                   DcgMode mode = DcgMode::standard) {
  if (rankings.size() != groups.size()) throw ValidationError("ranking count does not match group count");
  std::vector<QueryMetrics> out;
  out.reserve(groups.size());
  for (std::size_t g = 0; g < groups.size(); ++g) {
    out.push_back(evaluate_query(groups[g].doc_id, groups[g].grades(), rankings[g], mode));
  }
  return out;
}

struct MetricMeans {
  double ndcg = 0.0;
  double tau = 0.0;
  double tau_ap = 0.0;
};

namespace detail {

inline double mean_of(const std::vector<QueryMetrics>& qs, std::optional<double> QueryMetrics::*field) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& q : qs) {
    if (const auto& v = q.*field) {
      sum += *v;
      ++n;
    }
  }
  return n == 0 ? std::numeric_limits<double>::quiet_NaN() : sum / static_cast<double>(n);
}

inline double mean_of(const std::vector<double>& v) {
  double sum = 0.0;
  for (double x : v) sum += x;
  return v.empty() ? std::numeric_limits<double>::quiet_NaN() : sum / static_cast<double>(v.size());
}

}  // namespace detail

inline MetricMeans mean_metrics(const std::vector<QueryMetrics>& qs) {
  return {detail::mean_of(qs, &QueryMetrics::ndcg), detail::mean_of(qs, &QueryMetrics::tau),
          detail::mean_of(qs, &QueryMetrics::tau_ap)};
}

// ---------------------------------------------------------------------------
// Baselines

enum class Direction { descending, ascending };

// Gap ranking of each group's raw values of one feature.
inline Rankings baseline_rank_by_feature(std::span<const QueryGroup> groups, Feature feature,
                                         Direction dir = Direction::descending) {
  Rankings out;
  out.reserve(groups.size());
  for (const auto& g : groups) {
    auto v = g.raw_values(feature);
    if (dir == Direction::ascending) {
      for (double& x : v) x = -x;
    }
    out.push_back(rank_with_ties(v));
  }
  return out;
}

// A uniformly random permutation of 1..n per group; group g draws from its own
// stream so the result does not depend on which other groups are present.
inline std::vector<int> random_ranking(std::size_t n, std::uint64_t seed, std::uint64_t stream) {
  std::vector<int> ranks(n);
  for (std::size_t i = 0; i < n; ++i) ranks[i] = static_cast<int>(i + 1);
  Rng rng(mix_seed(seed, stream));
  rng.shuffle(ranks);
  return ranks;
}

inline Rankings random_baseline(std::span<const QueryGroup> groups, std::uint64_t seed) {
  Rankings out;
  out.reserve(groups.size());
  for (std::size_t g = 0; g < groups.size(); ++g) out.push_back(random_ranking(groups[g].size(), seed, g));
  return out;
}

// ---------------------------------------------------------------------------
// Ranker configurations

struct SvmRanker {
  Hyperparams hp;
};
struct FeatureRanker {
  Feature feature;
  Direction direction = Direction::descending;
};
struct RandomRanker {
  std::uint64_t seed = 0;
};
// A fixed, already trained model.
struct FrozenRanker {
  RankingModel model;
};

using RankerConfig = std::variant<SvmRanker, FeatureRanker, RandomRanker, FrozenRanker>;

inline std::string describe(const RankerConfig& cfg) {
  struct {
    std::string operator()(const SvmRanker& r) const { return "svm[" + r.hp.mask.to_string() + "]"; }
    std::string operator()(const FeatureRanker& r) const {
      return std::string(r.direction == Direction::ascending ? "feature-asc:" : "feature:") +
             std::string(feature_name(r.feature));
    }
    std::string operator()(const RandomRanker&) const { return "random"; }
    std::string operator()(const FrozenRanker& r) const { return "model[" + r.model.mask().to_string() + "]"; }
  } visitor;
  return std::visit(visitor, cfg);
}

// Rankings for every group from a ranker that needs no training.
inline Rankings frozen_rankings(std::span<const QueryGroup> groups, const RankerConfig& cfg) {
  if (const auto* f = std::get_if<FeatureRanker>(&cfg)) return baseline_rank_by_feature(groups, f->feature, f->direction);
  if (const auto* r = std::get_if<RandomRanker>(&cfg)) return random_baseline(groups, r->seed);
  if (const auto* m = std::get_if<FrozenRanker>(&cfg)) {
    Rankings out;
    for (const auto& g : groups) out.push_back(rank_group(m->model, g));
    return out;
  }
  throw ValidationError("ranker '" + describe(cfg) + "' must be trained");
}

// ---------------------------------------------------------------------------
// Random sub-sampling

struct SplitPlan {
  std::size_t repeats = 100;
  double train_fraction = 0.7;
  std::uint64_t seed = 0;

  void validate() const {
    if (repeats < 1) throw ValidationError("split plan needs at least one repeat");
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
      throw ValidationError("train fraction must lie strictly between 0 and 1");
    }
  }

  bool operator==(const SplitPlan&) const = default;
};

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Document-level split for one repeat; train size is round(fraction * n).
inline Split make_split(std::size_t n, const SplitPlan& plan, std::size_t repeat) {
  plan.validate();
  const auto n_train = static_cast<std::size_t>(std::llround(plan.train_fraction * static_cast<double>(n)));
  if (n_train == 0 || n_train >= n) {
    throw ValidationError("degenerate split: " + std::to_string(n_train) + " of " + std::to_string(n) +
                          " groups for training");
  }
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  Rng rng(mix_seed(plan.seed, repeat));
  rng.shuffle(idx);
  Split s;
  s.train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.test.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

struct SplitResult {
  std::size_t repeat = 0;
  std::vector<std::size_t> test_groups;
  std::vector<QueryMetrics> queries;
  MetricMeans means;
};

struct MetricSummary {
  std::string model;
  SplitPlan plan;
  std::vector<double> split_ndcg;
  std::vector<double> split_tau;
  std::vector<double> split_tau_ap;
  std::vector<SplitResult> splits;
  MetricMeans mean;    // of the per-split arrays
  MetricMeans pooled;  // over every test query of every split
};

struct RunOptions {
  DcgMode dcg_mode = DcgMode::standard;
  unsigned jobs = 1;
};

namespace detail {

// Runs fn(r) for r in [0, count) on up to `jobs` threads. The first exception
// is rethrown after all workers stop.
template <typename Fn>
void parallel_for(std::size_t count, unsigned jobs, Fn&& fn) {
  if (jobs <= 1 || count <= 1) {
    for (std::size_t r = 0; r < count; ++r) fn(r);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> workers;
  const unsigned n = static_cast<unsigned>(std::min<std::size_t>(jobs, count));
  for (unsigned w = 0; w < n; ++w) {
    workers.emplace_back([&] {
      for (std::size_t r; (r = next.fetch_add(1)) < count;) {
        try {
          fn(r);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          next = count;
        }
      }
    });
  }
  for (auto& t : workers) t.join();
  if (error) std::rethrow_exception(error);
}

inline std::vector<QueryGroup> pick(std::span<const QueryGroup> groups, const std::vector<std::size_t>& idx) {
  std::vector<QueryGroup> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(groups[i]);
  return out;
}

}  // namespace detail

// Repeated document-level train/test splits. Trained rankers learn from
// `train_labels`; test metrics always use the groups' author grades. Results
// are assembled in repeat order regardless of `opts.jobs`.
inline MetricSummary run_subsampling(std::span<const QueryGroup> groups, const GroupLabels& train_labels,
                                     const RankerConfig& cfg, const SplitPlan& plan, const RunOptions& opts = {}) {
  plan.validate();
  if (train_labels.size() != groups.size()) throw ValidationError("training labels do not match group count");
  for (const auto& g : groups) {
    if (!g.graded()) throw ValidationError("group '" + g.doc_id + "' is not annotated");
  }
  std::optional<Rankings> fixed;
  if (!std::holds_alternative<SvmRanker>(cfg)) fixed = frozen_rankings(groups, cfg);

  MetricSummary summary;
  summary.model = describe(cfg);
  summary.plan = plan;
  summary.splits.resize(plan.repeats);

  detail::parallel_for(plan.repeats, opts.jobs, [&](std::size_t r) {
    const Split split = make_split(groups.size(), plan, r);
    SplitResult& res = summary.splits[r];
    res.repeat = r;
    res.test_groups = split.test;
    std::optional<RankingModel> model;
    if (const auto* svm = std::get_if<SvmRanker>(&cfg)) {
      GroupLabels labels;
      for (std::size_t i : split.train) labels.push_back(train_labels[i]);
      model = train(detail::pick(groups, split.train), labels, svm->hp);
    }
    for (std::size_t i : split.test) {
      const auto ranks = model ? rank_group(*model, groups[i]) : (*fixed)[i];
      res.queries.push_back(evaluate_query(groups[i].doc_id, groups[i].grades(), ranks, opts.dcg_mode));
    }
    res.means = mean_metrics(res.queries);
  });

  std::vector<QueryMetrics> pooled;
  for (const auto& s : summary.splits) {
    summary.split_ndcg.push_back(s.means.ndcg);
    summary.split_tau.push_back(s.means.tau);
    summary.split_tau_ap.push_back(s.means.tau_ap);
    pooled.insert(pooled.end(), s.queries.begin(), s.queries.end());
  }
  summary.mean = {detail::mean_of(summary.split_ndcg), detail::mean_of(summary.split_tau),
                  detail::mean_of(summary.split_tau_ap)};
  summary.pooled = mean_metrics(pooled);
  return summary;
}

inline MetricSummary run_subsampling(std::span<const QueryGroup> groups, const RankerConfig& cfg,
                                     const SplitPlan& plan, const RunOptions& opts = {}) {
  return run_subsampling(groups, group_grades(groups), cfg, plan, opts);
}

// ---------------------------------------------------------------------------
// Forward feature selection

struct SelectionRound {
  Feature chosen;
  double mean_ndcg;
  std::vector<std::pair<Feature, double>> tried;  // every candidate evaluated this round
};

struct FeatureSelection {
  std::vector<SelectionRound> trajectory;
  std::size_t best_prefix = 0;  // number of leading trajectory features in the best model
  double best_ndcg = 0.0;

  FeatureMask best_mask() const {
    std::vector<Feature> f;
    for (std::size_t i = 0; i < best_prefix; ++i) f.push_back(trajectory[i].chosen);
    return FeatureMask(std::move(f));
  }
};

// Greedy forward selection on mean per-split NDCG. Each round adds the
// candidate with the highest score; equal scores go to the earlier feature.
// Runs until every feature is selected unless `max_rounds` is smaller.
inline FeatureSelection forward_feature_selection(std::span<const QueryGroup> groups, const SplitPlan& plan,
                                                  const Hyperparams& base, const RunOptions& opts = {},
                                                  std::size_t max_rounds = kFeatureCount) {
  FeatureSelection out;
  FeatureMask selected{std::vector<Feature>{}};
  const auto labels = group_grades(groups);
  for (std::size_t round = 0; round < std::min(max_rounds, kFeatureCount); ++round) {
    SelectionRound best{Feature::sim_aa, -std::numeric_limits<double>::infinity(), {}};
    bool found = false;
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
      const Feature f = feature_at(i);
      if (selected.contains(f)) continue;
      Hyperparams hp = base;
      hp.mask = selected.with(f);
      const double score = run_subsampling(groups, labels, SvmRanker{hp}, plan, opts).mean.ndcg;
      best.tried.emplace_back(f, score);
      if (!found || score > best.mean_ndcg) {
        best.chosen = f;
        best.mean_ndcg = score;
        found = true;
      }
    }
    selected = selected.with(best.chosen);
    out.trajectory.push_back(std::move(best));
  }
  for (std::size_t i = 0; i < out.trajectory.size(); ++i) {
    if (i == 0 || out.trajectory[i].mean_ndcg > out.best_ndcg) {
      out.best_ndcg = out.trajectory[i].mean_ndcg;
      out.best_prefix = i + 1;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Cross-label training

enum class LabelSource { author, external, text_similarity };

inline std::string_view to_string(LabelSource s) {
  switch (s) {
    case LabelSource::author: return "author";
    case LabelSource::external: return "external";
    case LabelSource::text_similarity: return "text_similarity";
  }
  return "?";
}

inline LabelSource parse_label_source(std::string_view s) {
  if (s == "author") return LabelSource::author;
  if (s == "external") return LabelSource::external;
  if (s == "text_similarity") return LabelSource::text_similarity;
  throw ValidationError("unknown label source '" + std::string(s) + "'");
}

struct SourcedLabels {
  GroupLabels labels;
  std::vector<std::string> warnings;
};

// Training labels from the requested source: author grades, relevances
// derived from external rankings, or gap ranks of raw sim_aa.
inline SourcedLabels labels_from_source(std::span<const QueryGroup> groups, LabelSource source,
                                        const std::map<std::string, ExternalRanking>* externals = nullptr) {
  SourcedLabels out;
  switch (source) {
    case LabelSource::author:
      out.labels = group_grades(groups);
      break;
    case LabelSource::text_similarity:
      for (const auto& g : groups) out.labels.push_back(rank_with_ties(g.raw_values(Feature::sim_aa)));
      break;
    case LabelSource::external:
      if (externals == nullptr) throw ValidationError("external label source requested without external rankings");
      for (const auto& g : groups) {
        auto it = externals->find(g.doc_id);
        if (it == externals->end()) throw ValidationError("no external ranking for document '" + g.doc_id + "'");
        std::vector<std::string> ids;
        for (const auto& c : g.candidates) ids.push_back(c.ref_id);
        const auto rel = external_to_relevance(ids, it->second);
        if (rel.none_found) {
          out.warnings.push_back("document '" + g.doc_id +
                                 "': no candidate found in the external ranking; all relevances set to 1");
        }
        std::vector<int> labels;
        for (const auto& id : ids) labels.push_back(rel.relevance.at(id));
        out.labels.push_back(std::move(labels));
      }
      break;
  }
  return out;
}

struct CrossTrainResult {
  MetricSummary summary;
  std::vector<std::string> warnings;
};

// Trains on labels from `train_source`, tests against author grades.
inline CrossTrainResult cross_train_eval(std::span<const QueryGroup> groups, LabelSource train_source,
                                         const Hyperparams& hp, const SplitPlan& plan, const RunOptions& opts = {},
                                         const std::map<std::string, ExternalRanking>* externals = nullptr) {
  auto src = labels_from_source(groups, train_source, externals);
  CrossTrainResult out;
  out.summary = run_subsampling(groups, src.labels, SvmRanker{hp}, plan, opts);
  out.summary.model = std::string(to_string(train_source)) + "->author " + out.summary.model;
  out.warnings = std::move(src.warnings);
  return out;
}

// ---------------------------------------------------------------------------
// Significance

// Two-sided paired sign-flip permutation test on per-split differences. Exact
// enumeration when 2^n <= resamples, otherwise seeded Monte Carlo with the
// (hits + 1) / (resamples + 1) estimate.
inline double significance_test(std::span<const double> a, std::span<const double> b, std::size_t resamples = 10000,
                                std::uint64_t seed = 0) {
  if (a.size() != b.size()) throw ValidationError("significance test needs paired samples of equal length");
  if (a.size() < 2) throw ValidationError("significance test needs at least two pairs");
  const std::size_t n = a.size();
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = a[i] - b[i];
  auto stat = [&](auto&& sign_of) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += sign_of(i) * d[i];
    return std::abs(s) / static_cast<double>(n);
  };
  const double observed = stat([](std::size_t) { return 1.0; });
  const double tol = 1e-12 * std::max(1.0, observed);

  if (n < 63 && (std::uint64_t{1} << n) <= resamples) {
    const std::uint64_t total = std::uint64_t{1} << n;
    std::uint64_t hits = 0;
    for (std::uint64_t mask = 0; mask < total; ++mask) {
      if (stat([&](std::size_t i) { return ((mask >> i) & 1U) ? -1.0 : 1.0; }) >= observed - tol) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(total);
  }
  Rng rng(seed);
  std::size_t hits = 0;
  std::vector<double> signs(n);
  for (std::size_t r = 0; r < resamples; ++r) {
    for (auto& s : signs) s = rng.coin() ? -1.0 : 1.0;
    if (stat([&](std::size_t i) { return signs[i]; }) >= observed - tol) ++hits;
  }
  return static_cast<double>(hits + 1) / static_cast<double>(resamples + 1);
}

// ---------------------------------------------------------------------------
// Reports

struct ReportRow {
  std::string label;
  MetricMeans means;
  std::string marker;
};

// Fixed-width table: one row per model with NDCG, tau and tau_ap.
inline std::string format_table(const std::vector<ReportRow>& rows, const std::string& title = "") {
  std::size_t width = 5;
  for (const auto& r : rows) width = std::max(width, r.label.size() + r.marker.size());
  std::ostringstream os;
  if (!title.empty()) os << title << '\n';
  auto cell = [&](double v) {
    std::ostringstream c;
    if (std::isnan(v)) {
      c << "n/a";
    } else {
      c << std::fixed << std::setprecision(3) << v;
    }
    return c.str();
  };
  os << std::left << std::setw(static_cast<int>(width) + 2) << "model" << std::right << std::setw(8) << "NDCG"
     << std::setw(8) << "tau" << std::setw(8) << "tau_ap" << '\n';
  for (const auto& r : rows) {
    os << std::left << std::setw(static_cast<int>(width) + 2) << (r.label + r.marker) << std::right << std::setw(8)
       << cell(r.means.ndcg) << std::setw(8) << cell(r.means.tau) << std::setw(8) << cell(r.means.tau_ap) << '\n';
  }
  return os.str();
}

namespace detail {
inline nlohmann::ordered_json opt_json(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}
inline nlohmann::ordered_json num_json(double v) {
  return std::isnan(v) ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(v);
}
}  // namespace detail

// One JSON record per split (and its per-query values).
inline void write_split_records(const MetricSummary& s, std::ostream& out) {
  for (const auto& split : s.splits) {
    nlohmann::ordered_json j;
    j["model"] = s.model;
    j["repeat"] = split.repeat;
    j["ndcg"] = detail::num_json(split.means.ndcg);
    j["tau"] = detail::num_json(split.means.tau);
    j["tau_ap"] = detail::num_json(split.means.tau_ap);
    auto qs = nlohmann::ordered_json::array();
    for (const auto& q : split.queries) {
      nlohmann::ordered_json qj;
      qj["doc_id"] = q.doc_id;
      qj["ndcg"] = detail::opt_json(q.ndcg);
      qj["tau"] = detail::opt_json(q.tau);
      qj["tau_ap"] = detail::opt_json(q.tau_ap);
      qs.push_back(std::move(qj));
    }
    j["queries"] = std::move(qs);
    out << j.dump() << '\n';
  }
}

inline nlohmann::ordered_json summary_json(const MetricSummary& s) {
  nlohmann::ordered_json j;
  j["model"] = s.model;
  j["repeats"] = s.plan.repeats;
  j["train_fraction"] = s.plan.train_fraction;
  j["seed"] = s.plan.seed;
  j["mean"] = {{"ndcg", detail::num_json(s.mean.ndcg)},
               {"tau", detail::num_json(s.mean.tau)},
               {"tau_ap", detail::num_json(s.mean.tau_ap)}};
  j["pooled"] = {{"ndcg", detail::num_json(s.pooled.ndcg)},
                 {"tau", detail::num_json(s.pooled.tau)},
                 {"tau_ap", detail::num_json(s.pooled.tau_ap)}};
  return j;
}

}  // namespace citerank
