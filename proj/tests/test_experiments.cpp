#include <gtest/gtest.h>

#include <sstream>

#include "citerank/experiments.hpp"
#include "citerank/synthetic.hpp"
#include "oracles.hpp"

using namespace citerank;

namespace {

std::vector<QueryGroup> planted_groups(std::size_t docs, Feature informative, std::uint64_t seed, double noise = 0.0) {
  SynthConfig cfg;
  cfg.documents = docs;
  cfg.vocabulary_size = 400;
  cfg.planted_weights[index_of(informative)] = 1.0;
  cfg.score_noise = noise;
  const auto corpus = generate_synthetic_corpus(cfg, seed);
  return featurize_corpus(corpus, build_corpus_vocabulary(corpus), CandidateSelection::annotated);
}

SplitPlan small_plan(std::size_t repeats, std::uint64_t seed = 0) {
  SplitPlan p;
  p.repeats = repeats;
  p.seed = seed;
  return p;
}

Hyperparams quick_hp(FeatureMask mask = FeatureMask::all()) {
  Hyperparams hp;
  hp.epochs = 30;
  hp.mask = std::move(mask);
  return hp;
}

}  // namespace

TEST(Split, PartitionsDocuments) {
  for (std::size_t n : {2u, 5u, 10u, 90u}) {
    for (std::size_t r = 0; r < 5; ++r) {
      const auto s = make_split(n, small_plan(5, 3), r);
      std::vector<std::size_t> all = s.train;
      all.insert(all.end(), s.test.begin(), s.test.end());
      std::sort(all.begin(), all.end());
      for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(all[i], i);
      EXPECT_EQ(s.train.size(), static_cast<std::size_t>(std::llround(0.7 * static_cast<double>(n))));
    }
  }
}

TEST(Split, OneTestGroupWhenFractionLeavesOneOut) {
  const std::size_t n = 10;
  SplitPlan plan = small_plan(1);
  plan.train_fraction = 1.0 - 1.0 / static_cast<double>(n);
  EXPECT_EQ(make_split(n, plan, 0).test.size(), 1u);
}

TEST(Split, DegenerateAndInvalid) {
  EXPECT_THROW(make_split(1, small_plan(1), 0), ValidationError);
  SplitPlan bad = small_plan(1);
  bad.train_fraction = 1.0;
  EXPECT_THROW(bad.validate(), ValidationError);
  bad = small_plan(0);
  EXPECT_THROW(bad.validate(), ValidationError);
}

TEST(Split, RepeatsDiffer) {
  const auto a = make_split(40, small_plan(2), 0);
  const auto b = make_split(40, small_plan(2), 1);
  EXPECT_NE(a.test, b.test);
}

TEST(Evaluate, QueryMetricsMatchDirectComputation) {
  const std::vector<int> truth{5, 4, 3, 2, 1};
  const std::vector<int> ranks{5, 3, 3, 2, 1};
  const auto q = evaluate_query("D", truth, ranks, DcgMode::standard);
  EXPECT_EQ(*q.ndcg, *ndcg(truth, ranks));
  EXPECT_EQ(*q.tau, 0.9);
  EXPECT_EQ(*q.tau_ap, tau_ap(truth, ranks));
  const auto tied = evaluate_query("D", std::vector<int>{2, 2, 1}, std::vector<int>{1, 2, 3}, DcgMode::standard);
  EXPECT_FALSE(tied.tau_ap.has_value());
  EXPECT_TRUE(tied.tau.has_value());
}

TEST(Baselines, FeatureOrderAndConstantFeature) {
  auto groups = planted_groups(6, Feature::mention_full, 2);
  const auto r = baseline_rank_by_feature(groups, Feature::mention_full);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    EXPECT_EQ(r[g], rank_with_ties(groups[g].raw_values(Feature::mention_full)));
  }
  for (auto& g : groups) {
    for (auto& c : g.candidates) c.raw[Feature::age_years] = 3.0;
  }
  for (const auto& ranks : baseline_rank_by_feature(groups, Feature::age_years)) {
    for (int x : ranks) EXPECT_EQ(x, 1);
  }
}

TEST(Baselines, MentionOrderEqualToGradesGivesTauOne) {
  // With mention_full as the only planted weight and distinct mention counts,
  // mention order is grade order.
  const auto groups = planted_groups(20, Feature::mention_full, 5);
  const auto r = baseline_rank_by_feature(groups, Feature::mention_full);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    auto v = groups[g].raw_values(Feature::mention_full);
    std::sort(v.begin(), v.end());
    if (std::adjacent_find(v.begin(), v.end()) != v.end()) continue;
    EXPECT_EQ(kendall_tau(groups[g].grades(), r[g]), 1.0) << groups[g].doc_id;
  }
}

TEST(Baselines, RandomIsDeterministicAndUnbiased) {
  const auto groups = planted_groups(10, Feature::sim_aa, 1);
  EXPECT_EQ(random_baseline(groups, 4), random_baseline(groups, 4));
  EXPECT_NE(random_baseline(groups, 4), random_baseline(groups, 5));
  EXPECT_EQ(random_ranking(1, 9, 0), std::vector<int>{1});
  double sum = 0.0;
  const int trials = 4000;
  const std::vector<int> truth{1, 2, 3, 4, 5};
  for (int t = 0; t < trials; ++t) sum += kendall_tau(truth, random_ranking(5, 77, static_cast<std::uint64_t>(t)));
  EXPECT_NEAR(sum / trials, 0.0, 0.03);
}

TEST(Subsampling, DeterministicAndJobCountIndependent) {
  const auto groups = planted_groups(20, Feature::citation_impact, 3);
  const auto plan = small_plan(6, 11);
  const RankerConfig cfg = SvmRanker{quick_hp()};
  const auto a = run_subsampling(groups, cfg, plan);
  const auto b = run_subsampling(groups, cfg, plan, RunOptions{DcgMode::standard, 3});
  EXPECT_EQ(a.split_ndcg, b.split_ndcg);
  EXPECT_EQ(a.split_tau, b.split_tau);
  EXPECT_EQ(a.split_tau_ap, b.split_tau_ap);
  std::stringstream sa, sb;
  write_split_records(a, sa);
  write_split_records(b, sb);
  EXPECT_EQ(sa.str(), sb.str());
  EXPECT_EQ(a.split_ndcg.size(), plan.repeats);
  EXPECT_EQ(a.splits.size(), plan.repeats);
}

TEST(Subsampling, MeansAreMeansOfSplitArrays) {
  const auto groups = planted_groups(15, Feature::age_years, 4);
  const auto s = run_subsampling(groups, SvmRanker{quick_hp()}, small_plan(5));
  double sum = 0.0;
  for (double x : s.split_tau) sum += x;
  EXPECT_DOUBLE_EQ(s.mean.tau, sum / 5.0);
  std::vector<QueryMetrics> pooled;
  for (const auto& sp : s.splits) pooled.insert(pooled.end(), sp.queries.begin(), sp.queries.end());
  EXPECT_EQ(pooled.size(), 5u * 4u);  // 15 - round(0.7 * 15) = 4 test groups per split
  EXPECT_DOUBLE_EQ(s.pooled.ndcg, mean_metrics(pooled).ndcg);
}

TEST(Subsampling, FrozenBaselineEqualsDirectMetrics) {
  const auto groups = planted_groups(30, Feature::mention_full, 8);
  const auto plan = small_plan(7, 2);
  for (const RankerConfig& cfg : {RankerConfig{FeatureRanker{Feature::mention_full}}, RankerConfig{RandomRanker{3}},
                                 RankerConfig{FeatureRanker{Feature::age_years, Direction::ascending}}}) {
    const auto rankings = frozen_rankings(groups, cfg);
    const auto summary = run_subsampling(groups, cfg, plan);
    for (std::size_t r = 0; r < plan.repeats; ++r) {
      const auto split = make_split(groups.size(), plan, r);
      double nd = 0, ta = 0, tap = 0;
      for (std::size_t i : split.test) {
        const auto truth = groups[i].grades();
        nd += *ndcg(truth, rankings[i]);
        ta += kendall_tau(truth, rankings[i]);
        tap += tau_ap(truth, rankings[i]);
      }
      const double k = static_cast<double>(split.test.size());
      EXPECT_EQ(summary.split_ndcg[r], nd / k);
      EXPECT_EQ(summary.split_tau[r], ta / k);
      EXPECT_EQ(summary.split_tau_ap[r], tap / k);
    }
  }
}

TEST(Subsampling, SeparableCorpusIsRankedPerfectly) {
  SynthConfig cfg;
  cfg.documents = 30;
  cfg.vocabulary_size = 400;
  cfg.planted_weights[index_of(Feature::citation_impact)] = 1.0;
  cfg.min_score_gap = 0.2;
  const auto corpus = generate_synthetic_corpus(cfg, 6);
  const auto groups = featurize_corpus(corpus, build_corpus_vocabulary(corpus), CandidateSelection::annotated);
  Hyperparams hp = quick_hp(FeatureMask({Feature::citation_impact, Feature::age_years}));
  const auto s = run_subsampling(groups, SvmRanker{hp}, small_plan(5));
  EXPECT_EQ(s.mean.tau, 1.0);
  EXPECT_EQ(s.mean.ndcg, 1.0);
}

TEST(Subsampling, RejectsUngradedGroups) {
  auto groups = planted_groups(5, Feature::sim_aa, 1);
  groups[2].candidates[0].grade.reset();
  EXPECT_THROW(run_subsampling(groups, RandomRanker{0}, small_plan(2)), ValidationError);
}

TEST(FeatureSelection, FirstRoundMatchesIndependentArgmax) {
  const auto groups = planted_groups(20, Feature::citation_impact, 12);
  const auto plan = small_plan(3);
  const Hyperparams hp = quick_hp();
  const auto fs = forward_feature_selection(groups, plan, hp, {}, 2);
  ASSERT_EQ(fs.trajectory.size(), 2u);
  double best = -1;
  Feature arg = Feature::sim_aa;
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    Hyperparams h = hp;
    h.mask = FeatureMask({feature_at(i)});
    const double v = run_subsampling(groups, SvmRanker{h}, plan).mean.ndcg;
    if (v > best) {
      best = v;
      arg = feature_at(i);
    }
  }
  EXPECT_EQ(fs.trajectory[0].chosen, arg);
  EXPECT_EQ(fs.trajectory[0].mean_ndcg, best);
  EXPECT_EQ(fs.trajectory[0].tried.size(), 16u);
  EXPECT_EQ(fs.trajectory[1].tried.size(), 15u);
  EXPECT_EQ(arg, Feature::citation_impact);
}

TEST(FeatureSelection, FullTrajectoryCoversEveryFeature) {
  const auto groups = planted_groups(10, Feature::mention_full, 2);
  Hyperparams hp = quick_hp();
  hp.epochs = 5;
  const auto fs = forward_feature_selection(groups, small_plan(1), hp);
  ASSERT_EQ(fs.trajectory.size(), 16u);
  std::set<Feature> seen;
  for (const auto& r : fs.trajectory) seen.insert(r.chosen);
  EXPECT_EQ(seen.size(), 16u);
  EXPECT_GE(fs.best_prefix, 1u);
  EXPECT_EQ(fs.best_ndcg, fs.trajectory[fs.best_prefix - 1].mean_ndcg);
  for (const auto& r : fs.trajectory) EXPECT_LE(r.mean_ndcg, fs.best_ndcg);
  EXPECT_EQ(fs.best_mask().size(), fs.best_prefix);
}

TEST(CrossTrain, AuthorLabelsEqualPlainRun) {
  const auto groups = planted_groups(15, Feature::age_years, 7);
  const auto plan = small_plan(3);
  const auto hp = quick_hp();
  const auto cross = cross_train_eval(groups, LabelSource::author, hp, plan);
  const auto plain = run_subsampling(groups, SvmRanker{hp}, plan);
  EXPECT_EQ(cross.summary.split_ndcg, plain.split_ndcg);
  EXPECT_EQ(cross.summary.split_tau_ap, plain.split_tau_ap);
  EXPECT_TRUE(cross.warnings.empty());
}

TEST(CrossTrain, ExternalLabelsWarnWhenNothingFound) {
  const auto groups = planted_groups(6, Feature::age_years, 7);
  std::map<std::string, ExternalRanking> ext;
  for (const auto& g : groups) {
    std::vector<std::string> list;
    for (auto it = g.candidates.rbegin(); it != g.candidates.rend(); ++it) list.push_back(it->ref_id);
    ext.emplace(g.doc_id, make_external_ranking(g.doc_id, list));
  }
  ext[groups[0].doc_id] = make_external_ranking(groups[0].doc_id, {"nothing"});
  const auto src = labels_from_source(groups, LabelSource::external, &ext);
  ASSERT_EQ(src.warnings.size(), 1u);
  EXPECT_NE(src.warnings[0].find(groups[0].doc_id), std::string::npos);
  EXPECT_EQ(src.labels[0], std::vector<int>(groups[0].size(), 1));
  EXPECT_EQ(src.labels[1], (std::vector<int>{1, 2, 3, 4, 5}));
  EXPECT_THROW(labels_from_source(groups, LabelSource::external), ValidationError);

  const auto text = labels_from_source(groups, LabelSource::text_similarity);
  EXPECT_EQ(text.labels[2], rank_with_ties(groups[2].raw_values(Feature::sim_aa)));
}

TEST(Significance, IdenticalSamplesGiveOne) {
  const std::vector<double> a{0.1, 0.5, 0.3, 0.9, 0.2};
  EXPECT_EQ(significance_test(a, a), 1.0);
  std::vector<double> many(100, 0.4);
  EXPECT_EQ(significance_test(many, many), 1.0);
}

TEST(Significance, ConsistentShiftIsSignificant) {
  Rng rng(1);
  std::vector<double> a(100), b(100);
  for (std::size_t i = 0; i < 100; ++i) {
    b[i] = rng.uniform();
    a[i] = b[i] + 1.0;
  }
  EXPECT_LE(significance_test(a, b), 0.001);
}

TEST(Significance, ExactEnumerationMatchesOracle) {
  Rng rng(13);
  for (std::size_t n = 2; n <= 13; ++n) {
    std::vector<double> a(n), b(n), d(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = rng.uniform();
      b[i] = rng.uniform() * 0.8;
      d[i] = a[i] - b[i];
    }
    EXPECT_DOUBLE_EQ(significance_test(a, b), oracle::sign_flip_exact(d)) << n;
  }
}

TEST(Significance, NoiseIsNotSignificant) {
  Rng rng(77);
  std::vector<double> a(100), b(100);
  for (std::size_t i = 0; i < 100; ++i) {
    a[i] = rng.normal();
    b[i] = rng.normal();
  }
  EXPECT_GT(significance_test(a, b), 0.01);
  EXPECT_EQ(significance_test(a, b, 5000, 3), significance_test(a, b, 5000, 3));
}

TEST(Significance, InputErrors) {
  EXPECT_THROW(significance_test(std::vector<double>{1, 2}, std::vector<double>{1}), ValidationError);
  EXPECT_THROW(significance_test(std::vector<double>{1}, std::vector<double>{1}), ValidationError);
}

TEST(Report, TableLayout) {
  const std::string t = format_table({{"random", {0.5, 0.0, std::nan("")}, ""}, {"svm", {0.9, 0.8, 0.7}, " *"}}, "T");
  EXPECT_NE(t.find("T\n"), std::string::npos);
  EXPECT_NE(t.find("n/a"), std::string::npos);
  EXPECT_NE(t.find("svm *"), std::string::npos);
  EXPECT_NE(t.find("0.900"), std::string::npos);
}
