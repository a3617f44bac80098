#include <gtest/gtest.h>

#include <regex>
#include <sstream>

#include "citerank/corpus.hpp"
#include "citerank/random.hpp"
#include "citerank/synthetic.hpp"
#include "oracles.hpp"

using namespace citerank;

namespace {

Document five_ref_doc() {
  Document d;
  d.doc_id = "P1";
  d.title = "Adult neurogenesis in the hippocampus";
  d.abstract = "We study adult neurogenesis and memory in mice.";
  d.full_text = "Prior work [[cite:R1]] showed growth. Others [[cite:R2]] and [[cite:R1]] disagree.";
  d.discussion = "Our results extend [[cite:R3]].";
  d.year = 2016;
  for (int i = 1; i <= 5; ++i) {
    d.references.push_back(
        {"R" + std::to_string(i), "Title " + std::to_string(i), "abstract words " + std::to_string(i), 2000 + i, i * 10});
  }
  d.annotations = Grades{{"R1", 5}, {"R2", 4}, {"R3", 3}, {"R4", 2}, {"R5", 1}};
  return d;
}

std::string line_of(const Document& d) { return to_json(d).dump(); }

}  // namespace

TEST(ParseCorpus, EmptyStream) {
  std::istringstream in("");
  const auto parsed = parse_corpus(in);
  EXPECT_TRUE(parsed.corpus.empty());
  EXPECT_TRUE(parsed.warnings.empty());
}

TEST(ParseCorpus, MinimalWellFormedRecord) {
  std::istringstream in(line_of(five_ref_doc()) + "\n");
  const auto parsed = parse_corpus(in);
  ASSERT_EQ(parsed.corpus.size(), 1u);
  EXPECT_EQ(parsed.corpus[0], five_ref_doc());
  EXPECT_TRUE(parsed.warnings.empty());
}

TEST(ParseCorpus, UnknownMarkerNamesDocumentAndId) {
  auto d = five_ref_doc();
  d.full_text += " see [[cite:X9]]";
  std::istringstream in("\n" + line_of(d) + "\n");
  try {
    parse_corpus(in);
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("P1"), std::string::npos) << msg;
    EXPECT_NE(msg.find("X9"), std::string::npos) << msg;
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(ParseCorpus, MalformedLineReportsLineNumber) {
  std::istringstream in(line_of(five_ref_doc()) + "\n{not json\n");
  try {
    parse_corpus(in);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(ParseCorpus, DuplicateDocId) {
  std::istringstream in(line_of(five_ref_doc()) + "\n" + line_of(five_ref_doc()) + "\n");
  EXPECT_THROW(parse_corpus(in), ParseError);
}

TEST(ParseCorpus, StructuralErrors) {
  auto bad = [](const std::string& line) {
    std::istringstream in(line);
    EXPECT_THROW(parse_corpus(in), ParseError) << line;
  };
  auto j = to_json(five_ref_doc());
  auto missing = j;
  missing.erase("year");
  bad(missing.dump());
  auto extra = j;
  extra["authors"] = "x";
  bad(extra.dump());
  auto wrong_type = j;
  wrong_type["year"] = "2016";
  bad(wrong_type.dump());
  auto negative = j;
  negative["references"][0]["citation_impact"] = -1;
  bad(negative.dump());
  auto dup_ref = j;
  dup_ref["references"][1]["ref_id"] = "R1";
  bad(dup_ref.dump());
  auto grade = j;
  grade["annotations"]["R1"] = 9;
  bad(grade.dump());
  auto unterminated = j;
  unterminated["discussion"] = "see [[cite:R1";
  bad(unterminated.dump());
}

TEST(ParseCorpus, NonPermutationAnnotationsWarnButLoad) {
  auto d = five_ref_doc();
  d.annotations = Grades{{"R1", 5}, {"R2", 5}, {"R3", 1}};
  std::istringstream in(line_of(d));
  const auto parsed = parse_corpus(in);
  ASSERT_EQ(parsed.corpus.size(), 1u);
  ASSERT_EQ(parsed.warnings.size(), 1u);
  EXPECT_NE(parsed.warnings[0].find("P1"), std::string::npos);
}

TEST(ParseCorpus, SerializeRoundTripOnSyntheticCorpora) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    SynthConfig cfg;
    cfg.documents = 6;
    cfg.references_per_document = 7;
    cfg.annotated_per_document = 5;
    cfg.vocabulary_size = 300;
    cfg.planted_weights[index_of(Feature::sim_aa)] = 1.0;
    const auto corpus = generate_synthetic_corpus(cfg, seed);
    std::stringstream ss;
    serialize_corpus(corpus, ss);
    const auto back = parse_corpus(ss);
    EXPECT_EQ(back.corpus, corpus);
    std::stringstream again;
    serialize_corpus(back.corpus, again);
    std::stringstream first;
    serialize_corpus(corpus, first);
    EXPECT_EQ(again.str(), first.str());
  }
}

TEST(CitationContexts, BoundaryTruncatedWindow) {
  Document d;
  d.doc_id = "D";
  d.year = 2000;
  d.references = {{"R1", "t", "a", 1990, 0}};
  d.full_text = "a b c [[cite:R1]] d e";
  const auto ctx = extract_citation_contexts(d, 10);
  ASSERT_EQ(ctx.at("R1").contexts_full.size(), 1u);
  EXPECT_EQ(ctx.at("R1").contexts_full[0], (Tokens{"a", "b", "c", "d", "e"}));
  EXPECT_EQ(ctx.at("R1").mention_count_full, 1u);
}

TEST(CitationContexts, CountsAndZeroCase) {
  auto d = five_ref_doc();
  const auto ctx = extract_citation_contexts(d);
  EXPECT_EQ(ctx.at("R1").mention_count_full, 2u);
  EXPECT_EQ(ctx.at("R1").mention_count_discussion, 0u);
  EXPECT_EQ(ctx.at("R3").mention_count_full, 0u);
  EXPECT_EQ(ctx.at("R3").mention_count_discussion, 1u);
  EXPECT_EQ(ctx.at("R5").mention_count_full, 0u);
  EXPECT_EQ(ctx.at("R5").mention_count_discussion, 0u);
  EXPECT_TRUE(ctx.at("R5").contexts_full.empty());

  d.discussion = "x [[cite:R1]] y";
  EXPECT_EQ(extract_citation_contexts(d).at("R1").mention_count_discussion, 1u);
}

TEST(CitationContexts, WindowLimitsAndAdjacentMarkers) {
  Document d;
  d.doc_id = "D";
  d.year = 2000;
  d.references = {{"A", "t", "a", 1990, 0}, {"B", "t", "a", 1990, 0}};
  std::string text;
  for (int i = 0; i < 30; ++i) text += "w" + std::to_string(i) + " ";
  text += "[[cite:A]][[cite:B]] ";
  for (int i = 30; i < 60; ++i) text += "w" + std::to_string(i) + " ";
  d.full_text = text;
  const auto ctx = extract_citation_contexts(d, 10);
  const auto& a = ctx.at("A").contexts_full.at(0);
  ASSERT_EQ(a.size(), 20u);
  EXPECT_EQ(a.front(), "w20");
  EXPECT_EQ(a[9], "w29");
  EXPECT_EQ(a[10], "w30");
  EXPECT_EQ(a.back(), "w39");
  EXPECT_EQ(ctx.at("B").contexts_full.at(0), a);
}

TEST(CitationContexts, InvariantUnderWhitespaceNormalization) {
  SynthConfig cfg;
  cfg.documents = 5;
  cfg.vocabulary_size = 200;
  const auto corpus = generate_synthetic_corpus(cfg, 9);
  Rng rng(4);
  for (const auto& doc : corpus) {
    Document messy = doc;
    std::string widened;
    for (char ch : doc.full_text) {
      widened += ch;
      if (ch == ' ') widened += rng.coin() ? "\t\n " : "  ";
    }
    messy.full_text = "  \n" + widened + "   ";
    const auto a = extract_citation_contexts(doc);
    const auto b = extract_citation_contexts(messy);
    for (const auto& [id, ctx] : a) {
      EXPECT_EQ(ctx.mention_count_full, b.at(id).mention_count_full);
      EXPECT_EQ(ctx.contexts_full, b.at(id).contexts_full);
      EXPECT_EQ(ctx.mention_count_full, ctx.contexts_full.size());
      EXPECT_EQ(ctx.mention_count_discussion, ctx.contexts_discussion.size());
      for (const auto& w : ctx.contexts_full) EXPECT_LE(w.size(), 20u);
    }
  }
}

TEST(StripMarkers, RemovesMarkersOnly) {
  EXPECT_EQ(tokenize(strip_markers("a [[cite:R1]] b[[cite:R2]]")), (Tokens{"a", "b"}));
}

// ---------------------------------------------------------------------------

namespace {

Document doc_with_abstracts(const std::vector<std::string>& abstracts, const std::string& query) {
  Document d;
  d.doc_id = "Q";
  d.year = 2010;
  d.abstract = query;
  for (std::size_t i = 0; i < abstracts.size(); ++i) {
    d.references.push_back({"R" + std::to_string(i + 1), "", abstracts[i], 2000, 0});
  }
  return d;
}

}  // namespace

TEST(SelectCandidates, HandBuiltOverlapsMatchBruteForce) {
  const std::string query = "alpha beta gamma delta epsilon";
  const std::vector<std::string> abstracts = {
      "alpha beta gamma", "zeta eta theta", "alpha zeta", "beta gamma delta epsilon iota", "delta kappa lambda",
      "alpha beta gamma delta epsilon mu mu"};
  const Document d = doc_with_abstracts(abstracts, query);
  Corpus corpus{d};
  corpus[0].full_text = query;
  const Vocabulary vocab = build_corpus_vocabulary(corpus);

  // Brute force: cosine of every reference against the query with an
  // independently computed TF*IDF.
  const auto units = idf_units(corpus);
  const auto q = oracle::tfidf(tokenize(query), units);
  std::vector<std::pair<double, std::string>> expected;
  for (std::size_t i = 0; i < abstracts.size(); ++i) {
    expected.emplace_back(-oracle::cosine(q, oracle::tfidf(tokenize(abstracts[i]), units)), "R" + std::to_string(i + 1));
  }
  std::sort(expected.begin(), expected.end());
  std::vector<std::string> top5;
  for (int i = 0; i < 5; ++i) top5.push_back(expected[i].second);

  EXPECT_EQ(select_candidates(d, vocab, 5), top5);
  EXPECT_EQ(select_candidates(d, vocab, 5).size(), 5u);
  EXPECT_EQ(std::find(top5.begin(), top5.end(), "R2"), top5.end());
}

TEST(SelectCandidates, IdenticalAbstractRanksFirst) {
  const Document d = doc_with_abstracts({"cells divide", "neurons fire rapidly", "cells grow"}, "neurons fire rapidly");
  const Vocabulary vocab = build_corpus_vocabulary(Corpus{d});
  const auto ranked = rank_by_abstract_similarity(d, vocab);
  EXPECT_EQ(ranked[0].ref_id, "R2");
  EXPECT_NEAR(ranked[0].similarity, 1.0, 1e-12);
}

TEST(SelectCandidates, ExhaustiveIsTotalOrderConsistentWithPairwiseCosines) {
  SynthConfig cfg;
  cfg.documents = 4;
  cfg.references_per_document = 9;
  cfg.vocabulary_size = 150;
  const auto corpus = generate_synthetic_corpus(cfg, 21);
  const Vocabulary vocab = build_corpus_vocabulary(corpus);
  for (const auto& doc : corpus) {
    const auto all = select_candidates(doc, vocab, doc.references.size());
    ASSERT_EQ(all.size(), doc.references.size());
    const auto q = tfidf_vector(doc.abstract, vocab);
    for (std::size_t i = 0; i + 1 < all.size(); ++i) {
      const double a = cosine(q, tfidf_vector(doc.find_reference(all[i])->abstract, vocab));
      const double b = cosine(q, tfidf_vector(doc.find_reference(all[i + 1])->abstract, vocab));
      EXPECT_TRUE(a > b || (a == b && all[i] < all[i + 1]));
    }
  }
}

TEST(SelectCandidates, EqualCosinesBreakByRefId) {
  Document d = doc_with_abstracts({"same words", "same words", "other"}, "same words");
  std::swap(d.references[0].ref_id, d.references[1].ref_id);
  const Vocabulary vocab = build_corpus_vocabulary(Corpus{d});
  EXPECT_EQ(select_candidates(d, vocab, 2), (std::vector<std::string>{"R1", "R2"}));
}

TEST(SelectCandidates, TooFewEligibleReferences) {
  const Document d = doc_with_abstracts({"a b", "", "c"}, "a");
  const Vocabulary vocab = build_corpus_vocabulary(Corpus{d});
  EXPECT_THROW(select_candidates(d, vocab, 3), ValidationError);
  EXPECT_NO_THROW(select_candidates(d, vocab, 2));
}

// ---------------------------------------------------------------------------

TEST(ExternalRelevance, QuotedRuleExample) {
  const auto ext = make_external_ranking("D", [] {
    std::vector<std::string> list(60);
    for (std::size_t i = 0; i < list.size(); ++i) list[i] = "X" + std::to_string(i);
    list[2] = "A";
    list[9] = "B";
    list[56] = "C";
    return list;
  }());
  const auto rel = external_to_relevance({"A", "B", "C", "D", "E"}, ext);
  EXPECT_FALSE(rel.none_found);
  EXPECT_EQ(rel.relevance, (std::map<std::string, int>{{"A", 5}, {"B", 4}, {"C", 3}, {"D", 2}, {"E", 2}}));
}

TEST(ExternalRelevance, AllPresentGivesPermutation) {
  const auto ext = make_external_ranking("D", {"E", "C", "A", "D", "B"});
  const auto rel = external_to_relevance({"A", "B", "C", "D", "E"}, ext);
  EXPECT_EQ(rel.relevance, (std::map<std::string, int>{{"E", 5}, {"C", 4}, {"A", 3}, {"D", 2}, {"B", 1}}));
}

TEST(ExternalRelevance, NoneFoundIsUniformOne) {
  const auto ext = make_external_ranking("D", {"X", "Y"});
  const auto rel = external_to_relevance({"A", "B", "C"}, ext);
  EXPECT_TRUE(rel.none_found);
  for (const auto& [_, r] : rel.relevance) EXPECT_EQ(r, 1);
  EXPECT_THROW(external_to_relevance({}, ext), ValidationError);
}

TEST(ExternalRelevance, ContiguousRangeAndInvertedOrder) {
  Rng rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.index(7);
    std::vector<std::string> cands;
    for (std::size_t i = 0; i < n; ++i) cands.push_back("C" + std::to_string(i));
    std::vector<std::string> list;
    for (std::size_t i = 0; i < 20; ++i) list.push_back("X" + std::to_string(i));
    for (const auto& c : cands) {
      if (rng.coin()) list.insert(list.begin() + static_cast<std::ptrdiff_t>(rng.index(list.size() + 1)), c);
    }
    const auto ext = make_external_ranking("D", list);
    const auto rel = external_to_relevance(cands, ext);
    std::set<int> values;
    for (const auto& [_, r] : rel.relevance) values.insert(r);
    EXPECT_EQ(*values.rbegin() - *values.begin() + 1, static_cast<int>(values.size()));
    for (const auto& a : cands) {
      for (const auto& b : cands) {
        const auto pa = ext.position(a), pb = ext.position(b);
        if (pa && pb && *pa < *pb) { EXPECT_GT(rel.relevance.at(a), rel.relevance.at(b)); }
        if (pa && !pb) { EXPECT_GT(rel.relevance.at(a), rel.relevance.at(b)); }
      }
    }
  }
}

TEST(ExternalRankings, ParseFile) {
  std::istringstream in(
      R"({"doc_id":"D1","ranked_list":["X1","R2","R1","R2"]})"
      "\n\n"
      R"({"doc_id":"D2","ranked_list":[]})"
      "\n");
  const auto ext = parse_external_rankings(in);
  ASSERT_EQ(ext.size(), 2u);
  EXPECT_EQ(ext.at("D1").list_length, 4u);
  EXPECT_EQ(*ext.at("D1").position("R2"), 2u);
  EXPECT_EQ(*ext.at("D1").position("R1"), 3u);
  EXPECT_FALSE(ext.at("D2").position("R1"));

  std::istringstream dup(R"({"doc_id":"D1","ranked_list":[]})" "\n" R"({"doc_id":"D1","ranked_list":[]})");
  EXPECT_THROW(parse_external_rankings(dup), ParseError);
  std::istringstream bad(R"({"doc_id":"D1","ranked_list":[1]})");
  EXPECT_THROW(parse_external_rankings(bad), ParseError);
}
