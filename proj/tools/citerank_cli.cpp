// citerank: command-line pipeline for citation ranking experiments.
//
//   citerank ingest           --corpus corpus.jsonl --out DIR
//   citerank train            --features DIR/features.jsonl --out DIR
//   citerank evaluate         --features F [--model M | --baseline NAME | --suite] --out DIR
//   citerank select-features  --features F --out DIR
//   citerank compare-external --features F --external E --out DIR
//   citerank synth            --out DIR
//
// Every flag may also be given through the environment as CITERANK_<FLAG>
// (upper case, dashes as underscores).

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "citerank/citerank.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace citerank;

namespace {

struct RunConfig {
  std::string subcommand;
  std::string corpus;
  std::string features;
  std::string model;
  std::string external;
  std::string baseline;
  bool suite = false;
  std::string out;
  std::uint64_t seed = 0;
  std::size_t repeats = 100;
  double train_fraction = 0.7;
  double c = 1.0;
  int epochs = 200;
  std::string features_mask = "all";
  std::string dcg_mode = "standard";
  std::string candidates = "all";
  unsigned jobs = 1;
  std::size_t rounds = kFeatureCount;
  // synth
  std::size_t docs = 90;
  std::size_t refs = 5;
  std::size_t annotated = 5;
  std::size_t vocab = 2000;
  std::string weights = "mention_full=1,mention_discussion=0.5,age_years=-0.7,citation_impact=-0.8,sim_aa=0.3";
  double noise = 0.0;
  double min_gap = 0.0;

  SplitPlan plan() const { return {repeats, train_fraction, seed}; }
  RunOptions options() const { return {parse_dcg_mode(dcg_mode), jobs}; }
  Hyperparams hyperparams() const { return {c, epochs, seed, FeatureMask::parse(features_mask)}; }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["subcommand"] = subcommand;
    auto put = [&](const char* key, const std::string& v) {
      if (!v.empty()) j[key] = v;
    };
    put("corpus", corpus);
    put("features", features);
    put("model", model);
    put("external", external);
    put("baseline", baseline);
    if (suite) j["suite"] = true;
    j["out"] = out;
    j["seed"] = seed;
    j["repeats"] = repeats;
    j["train_fraction"] = train_fraction;
    j["c"] = c;
    j["epochs"] = epochs;
    j["features_mask"] = features_mask;
    j["dcg_mode"] = dcg_mode;
    j["candidates"] = candidates;
    j["jobs"] = jobs;
    if (subcommand == "select-features") j["rounds"] = rounds;
    if (subcommand == "synth") {
      j["docs"] = docs;
      j["refs"] = refs;
      j["annotated"] = annotated;
      j["vocab"] = vocab;
      j["weights"] = weights;
      j["noise"] = noise;
      j["min_gap"] = min_gap;
    }
    return j;
  }
};

std::ifstream open_in(const std::string& path, const char* what) {
  if (path.empty()) throw Error(std::string("missing --") + what);
  std::ifstream in(path);
  if (!in) throw Error(std::string("cannot open ") + what + " file '" + path + "'");
  return in;
}

class OutDir {
 public:
  explicit OutDir(const std::string& path) : path_(path) {
    if (path.empty()) throw Error("missing --out");
    fs::create_directories(path_);
  }

  void write(const std::string& name, const std::string& content) const {
    std::ofstream out(path_ / name, std::ios::binary);
    if (!out) throw Error("cannot write '" + (path_ / name).string() + "'");
    out << content;
  }

 private:
  fs::path path_;
};

void save_config(const OutDir& out, const RunConfig& cfg) { out.write("run_config.json", cfg.to_json().dump(2) + "\n"); }

std::vector<QueryGroup> load_features(const RunConfig& cfg) {
  auto in = open_in(cfg.features, "features");
  auto groups = read_feature_matrix(in);
  if (groups.empty()) throw ValidationError("feature file '" + cfg.features + "' has no records");
  return groups;
}

void require_annotated(const std::vector<QueryGroup>& groups) {
  for (const auto& g : groups) {
    if (!g.graded()) throw ValidationError("document '" + g.doc_id + "' has no annotations; training needs grades");
  }
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << v;
  return os.str();
}

// ---------------------------------------------------------------------------

int cmd_ingest(const RunConfig& cfg) {
  auto in = open_in(cfg.corpus, "corpus");
  auto parsed = parse_corpus(in);
  if (parsed.corpus.empty()) throw ValidationError("corpus '" + cfg.corpus + "' contains no documents");
  const Vocabulary vocab = build_corpus_vocabulary(parsed.corpus);
  const auto groups = featurize_corpus(parsed.corpus, vocab, parse_candidate_selection(cfg.candidates));

  const OutDir out(cfg.out);
  std::ostringstream features, contexts, vocab_dump;
  write_feature_matrix(groups, features);
  vocab.write(vocab_dump);
  for (const auto& doc : parsed.corpus) {
    for (const auto& [ref_id, ctx] : extract_citation_contexts(doc)) {
      nlohmann::ordered_json j;
      j["doc_id"] = doc.doc_id;
      j["ref_id"] = ref_id;
      j["mention_count_full"] = ctx.mention_count_full;
      j["mention_count_discussion"] = ctx.mention_count_discussion;
      j["contexts_full"] = ctx.contexts_full;
      j["contexts_discussion"] = ctx.contexts_discussion;
      contexts << j.dump() << '\n';
    }
  }
  std::size_t rows = 0, annotated = 0;
  for (const auto& g : groups) {
    rows += g.size();
    if (g.graded()) ++annotated;
  }
  std::ostringstream report;
  report << parsed.corpus.size() << " documents, " << rows << " candidate rows\n";
  report << annotated << " annotated documents, " << vocab.size() << " terms over " << vocab.corpus_size()
         << " text units\n";
  for (const auto& w : parsed.warnings) report << "warning: " << w << '\n';

  out.write("features.jsonl", features.str());
  out.write("contexts.jsonl", contexts.str());
  out.write("vocab.tsv", vocab_dump.str());
  out.write("report.txt", report.str());
  save_config(out, cfg);
  std::cout << report.str();
  return 0;
}

int cmd_train(const RunConfig& cfg) {
  const auto groups = load_features(cfg);
  require_annotated(groups);
  const auto model = train(groups, cfg.hyperparams());
  std::vector<QueryMetrics> qs;
  for (const auto& g : groups) {
    qs.push_back(evaluate_query(g.doc_id, g.grades(), rank_group(model, g), parse_dcg_mode(cfg.dcg_mode)));
  }
  const auto m = mean_metrics(qs);
  std::ostringstream report;
  report << "trained on " << groups.size() << " documents, objective " << fmt(model.training_objective(), 6) << '\n';
  report << format_table({{"training set", m, ""}});

  const OutDir out(cfg.out);
  std::ostringstream model_text;
  write_model(model, model_text);
  out.write("model.json", model_text.str());
  out.write("report.txt", report.str());
  save_config(out, cfg);
  std::cout << report.str();
  return 0;
}

RankerConfig baseline_ranker(const std::string& name, std::uint64_t seed) {
  if (name == "random") return RandomRanker{seed};
  if (name == "mention") return FeatureRanker{Feature::mention_full};
  if (name == "impact") return FeatureRanker{Feature::citation_impact};
  return FeatureRanker{parse_feature(name)};
}

std::string pairwise_pvalues(const std::vector<MetricSummary>& models, std::uint64_t seed, std::ostream& records) {
  std::ostringstream os;
  os << "pairwise sign-flip p-values (ndcg / tau / tau_ap)\n";
  for (std::size_t a = 0; a < models.size(); ++a) {
    for (std::size_t b = a + 1; b < models.size(); ++b) {
      const double pn = significance_test(models[a].split_ndcg, models[b].split_ndcg, 10000, seed);
      const double pt = significance_test(models[a].split_tau, models[b].split_tau, 10000, seed);
      const double pa = significance_test(models[a].split_tau_ap, models[b].split_tau_ap, 10000, seed);
      os << "  " << models[a].model << " vs " << models[b].model << ": " << fmt(pn) << " / " << fmt(pt) << " / "
         << fmt(pa) << '\n';
      nlohmann::ordered_json j;
      j["a"] = models[a].model;
      j["b"] = models[b].model;
      j["p_ndcg"] = pn;
      j["p_tau"] = pt;
      j["p_tau_ap"] = pa;
      records << j.dump() << '\n';
    }
  }
  return os.str();
}

int cmd_evaluate(const RunConfig& cfg) {
  const auto groups = load_features(cfg);
  require_annotated(groups);
  const auto plan = cfg.plan();
  const auto opts = cfg.options();
  std::ostringstream report, splits, summaries, pvalues;

  auto run = [&](const RankerConfig& r, const GroupLabels* labels = nullptr, std::string label = "") {
    auto s = labels ? run_subsampling(groups, *labels, r, plan, opts) : run_subsampling(groups, r, plan, opts);
    if (!label.empty()) s.model = std::move(label);
    write_split_records(s, splits);
    summaries << summary_json(s).dump() << '\n';
    return s;
  };
  auto row = [](const MetricSummary& s) { return ReportRow{s.model, s.mean, ""}; };

  if (cfg.suite) {
    std::vector<MetricSummary> models;
    std::vector<ReportRow> baseline_rows, feature_rows, model_rows;
    for (const char* name : {"random", "mention", "impact"}) {
      models.push_back(run(baseline_ranker(name, cfg.seed), nullptr, name));
      baseline_rows.push_back(row(models.back()));
    }
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
      feature_rows.push_back(row(run(FeatureRanker{feature_at(i)})));
    }
    const auto text_labels = labels_from_source(groups, LabelSource::text_similarity).labels;
    Hyperparams hp = cfg.hyperparams();
    for (const auto& [name, mask] : {std::pair{"text features", FeatureMask::text_only()},
                                     std::pair{"all features", FeatureMask::all()}}) {
      hp.mask = mask;
      models.push_back(run(SvmRanker{hp}, nullptr, std::string("annotated: ") + name));
      model_rows.push_back(row(models.back()));
      models.push_back(run(SvmRanker{hp}, &text_labels, std::string("text-similarity: ") + name));
      model_rows.push_back(row(models.back()));
    }
    report << format_table(baseline_rows, "baselines") << '\n'
           << format_table(feature_rows, "single features (raw values, highest first)") << '\n'
           << format_table(model_rows, "ranking SVM models (trained on annotated or text-similarity labels)") << '\n'
           << pairwise_pvalues(models, cfg.seed, pvalues);
  } else {
    RankerConfig ranker = SvmRanker{cfg.hyperparams()};
    if (!cfg.model.empty() && !cfg.baseline.empty()) throw ValidationError("give either --model or --baseline");
    if (!cfg.model.empty()) {
      auto in = open_in(cfg.model, "model");
      ranker = FrozenRanker{read_model(in)};
    } else if (!cfg.baseline.empty()) {
      ranker = baseline_ranker(cfg.baseline, cfg.seed);
    }
    const auto s = run(ranker);
    report << format_table({row(s)}) << "pooled per-query means: ndcg " << fmt(s.pooled.ndcg) << ", tau "
           << fmt(s.pooled.tau) << ", tau_ap " << fmt(s.pooled.tau_ap) << '\n';
  }

  const OutDir out(cfg.out);
  out.write("report.txt", report.str());
  out.write("splits.jsonl", splits.str());
  out.write("summary.jsonl", summaries.str());
  if (cfg.suite) out.write("pvalues.jsonl", pvalues.str());
  save_config(out, cfg);
  std::cout << report.str();
  return 0;
}

int cmd_select_features(const RunConfig& cfg) {
  const auto groups = load_features(cfg);
  require_annotated(groups);
  const auto sel = forward_feature_selection(groups, cfg.plan(), cfg.hyperparams(), cfg.options(), cfg.rounds);
  std::ostringstream report, records;
  report << "round  feature              mean NDCG\n";
  for (std::size_t i = 0; i < sel.trajectory.size(); ++i) {
    const auto& r = sel.trajectory[i];
    report << std::setw(5) << i + 1 << "  " << std::left << std::setw(20) << feature_name(r.chosen) << std::right
           << " " << fmt(r.mean_ndcg) << '\n';
    nlohmann::ordered_json j;
    j["round"] = i + 1;
    j["feature"] = feature_name(r.chosen);
    j["mean_ndcg"] = r.mean_ndcg;
    auto tried = nlohmann::ordered_json::object();
    for (const auto& [f, v] : r.tried) tried[std::string(feature_name(f))] = v;
    j["tried"] = std::move(tried);
    records << j.dump() << '\n';
  }
  report << "best prefix: " << sel.best_prefix << " features [" << sel.best_mask().to_string() << "], mean NDCG "
         << fmt(sel.best_ndcg) << '\n';

  const OutDir out(cfg.out);
  out.write("trajectory.txt", report.str());
  out.write("trajectory.jsonl", records.str());
  save_config(out, cfg);
  std::cout << report.str();
  return 0;
}

int cmd_compare_external(const RunConfig& cfg) {
  const auto groups = load_features(cfg);
  require_annotated(groups);
  auto ext_in = open_in(cfg.external, "external");
  const auto externals = parse_external_rankings(ext_in);
  const auto hp = cfg.hyperparams();
  const auto author = cross_train_eval(groups, LabelSource::author, hp, cfg.plan(), cfg.options());
  const auto external = cross_train_eval(groups, LabelSource::external, hp, cfg.plan(), cfg.options(), &externals);

  std::ostringstream report, splits, summaries;
  report << format_table({{"train author, test author", author.summary.mean, ""},
                          {"train external, test author", external.summary.mean, ""}});
  const double p = significance_test(author.summary.split_tau_ap, external.summary.split_tau_ap, 10000, cfg.seed);
  report << "tau_ap sign-flip p-value: " << fmt(p) << '\n';
  for (const auto& w : external.warnings) report << "warning: " << w << '\n';
  for (const auto* s : {&author.summary, &external.summary}) {
    write_split_records(*s, splits);
    summaries << summary_json(*s).dump() << '\n';
  }

  const OutDir out(cfg.out);
  out.write("report.txt", report.str());
  out.write("splits.jsonl", splits.str());
  out.write("summary.jsonl", summaries.str());
  save_config(out, cfg);
  std::cout << report.str();
  return 0;
}

std::array<double, kFeatureCount> parse_weights(const std::string& spec) {
  std::array<double, kFeatureCount> w{};
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ValidationError("weight '" + item + "' must be name=value");
    try {
      w[index_of(parse_feature(item.substr(0, eq)))] = std::stod(item.substr(eq + 1));
    } catch (const std::invalid_argument&) {
      throw ValidationError("weight '" + item + "' has a non-numeric value");
    }
  }
  return w;
}

int cmd_synth(const RunConfig& cfg) {
  SynthConfig sc;
  sc.documents = cfg.docs;
  sc.references_per_document = cfg.refs;
  sc.annotated_per_document = cfg.annotated;
  sc.vocabulary_size = cfg.vocab;
  sc.planted_weights = parse_weights(cfg.weights);
  sc.score_noise = cfg.noise;
  sc.min_score_gap = cfg.min_gap;
  const Corpus corpus = generate_synthetic_corpus(sc, cfg.seed);

  // External lists: the references by descending full-text similarity, mixed
  // with unrelated entries, with the last reference left out.
  const Vocabulary vocab = build_corpus_vocabulary(corpus);
  std::ostringstream corpus_text, external;
  serialize_corpus(corpus, corpus_text);
  Rng rng(mix_seed(cfg.seed, 0xe17e));
  for (const auto& doc : corpus) {
    const auto g = featurize_document(doc, vocab, CandidateSelection::all);
    std::vector<std::pair<double, std::string>> order;
    for (const auto& c : g.candidates) order.emplace_back(-c.raw[Feature::sim_fa], c.ref_id);
    std::sort(order.begin(), order.end());
    order.pop_back();
    nlohmann::ordered_json list = nlohmann::ordered_json::array();
    std::size_t filler = 0;
    for (const auto& [_, id] : order) {
      for (long long k = rng.between(0, 4); k > 0; --k) list.push_back("X" + std::to_string(++filler));
      list.push_back(id);
    }
    nlohmann::ordered_json j;
    j["doc_id"] = doc.doc_id;
    j["ranked_list"] = std::move(list);
    external << j.dump() << '\n';
  }

  const OutDir out(cfg.out);
  out.write("corpus.jsonl", corpus_text.str());
  out.write("external.jsonl", external.str());
  save_config(out, cfg);
  std::cout << corpus.size() << " synthetic documents written\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"citerank: query-by-document citation ranking"};
  app.require_subcommand(1);
  RunConfig cfg;

  auto env = [](const std::string& flag) {
    std::string name = "CITERANK_";
    for (char ch : flag) name += ch == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    return name;
  };
  auto add_string = [&](CLI::App* sub, const std::string& flag, std::string& target, const std::string& help) {
    sub->add_option("--" + flag, target, help)->envname(env(flag));
  };
  auto add_plan = [&](CLI::App* sub) {
    sub->add_option("--seed", cfg.seed, "seed for every random choice")->envname(env("seed"));
    sub->add_option("--repeats", cfg.repeats, "random sub-sampling repeats")->envname(env("repeats"));
    sub->add_option("--train-fraction", cfg.train_fraction, "fraction of documents used for training")
        ->envname(env("train-fraction"));
    sub->add_option("--c", cfg.c, "SVM regularization tradeoff")->envname(env("c"));
    sub->add_option("--epochs", cfg.epochs, "passes over the training pairs")->envname(env("epochs"));
    add_string(sub, "features-mask", cfg.features_mask, "comma-separated features, or all / text");
    add_string(sub, "dcg-mode", cfg.dcg_mode, "standard or literal");
    sub->add_option("--jobs", cfg.jobs, "concurrent repeats")->envname(env("jobs"));
  };

  auto* ingest = app.add_subcommand("ingest", "validate a corpus and write contexts, vocabulary and features");
  add_string(ingest, "corpus", cfg.corpus, "corpus file (JSON lines)");
  add_string(ingest, "candidates", cfg.candidates, "all, top5 or annotated");
  add_string(ingest, "out", cfg.out, "output directory");
  ingest->add_option("--seed", cfg.seed, "recorded in the run configuration")->envname(env("seed"));

  auto* train_cmd = app.add_subcommand("train", "train a ranking SVM on every annotated document");
  add_string(train_cmd, "features", cfg.features, "feature matrix from ingest");
  add_string(train_cmd, "out", cfg.out, "output directory");
  add_plan(train_cmd);

  auto* evaluate = app.add_subcommand("evaluate", "evaluate a model or baseline under random sub-sampling");
  add_string(evaluate, "features", cfg.features, "feature matrix from ingest");
  add_string(evaluate, "model", cfg.model, "frozen model file");
  add_string(evaluate, "baseline", cfg.baseline, "random, mention, impact or a feature name");
  evaluate->add_flag("--suite", cfg.suite, "baselines, single features and SVM models with p-values");
  add_string(evaluate, "out", cfg.out, "output directory");
  add_plan(evaluate);

  auto* select = app.add_subcommand("select-features", "greedy forward feature selection on mean NDCG");
  add_string(select, "features", cfg.features, "feature matrix from ingest");
  add_string(select, "out", cfg.out, "output directory");
  select->add_option("--rounds", cfg.rounds, "stop after this many rounds")->envname(env("rounds"));
  add_plan(select);

  auto* compare = app.add_subcommand("compare-external", "author-trained vs externally-trained models");
  add_string(compare, "features", cfg.features, "feature matrix from ingest");
  add_string(compare, "external", cfg.external, "external rankings (JSON lines)");
  add_string(compare, "out", cfg.out, "output directory");
  add_plan(compare);

  auto* synth = app.add_subcommand("synth", "write a synthetic annotated corpus and external rankings");
  add_string(synth, "out", cfg.out, "output directory");
  synth->add_option("--seed", cfg.seed, "generator seed")->envname(env("seed"));
  synth->add_option("--docs", cfg.docs, "documents")->envname(env("docs"));
  synth->add_option("--refs", cfg.refs, "references per document")->envname(env("refs"));
  synth->add_option("--annotated", cfg.annotated, "annotated references per document")->envname(env("annotated"));
  synth->add_option("--vocab", cfg.vocab, "synthetic vocabulary size")->envname(env("vocab"));
  add_string(synth, "weights", cfg.weights, "planted weights as name=value,...");
  synth->add_option("--noise", cfg.noise, "planted score noise")->envname(env("noise"));
  synth->add_option("--min-gap", cfg.min_gap, "minimum planted score gap")->envname(env("min-gap"));

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest) {
      cfg.subcommand = "ingest";
      return cmd_ingest(cfg);
    }
    if (*train_cmd) {
      cfg.subcommand = "train";
      return cmd_train(cfg);
    }
    if (*evaluate) {
      cfg.subcommand = "evaluate";
      return cmd_evaluate(cfg);
    }
    if (*select) {
      cfg.subcommand = "select-features";
      return cmd_select_features(cfg);
    }
    if (*compare) {
      cfg.subcommand = "compare-external";
      return cmd_compare_external(cfg);
    }
    if (*synth) {
      cfg.subcommand = "synth";
      return cmd_synth(cfg);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
