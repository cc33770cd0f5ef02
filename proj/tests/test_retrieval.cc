#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "prfrl/error.h"
#include "prfrl/retrieval.h"

namespace prfrl {
namespace {

std::vector<ExternalPost> posts_of(const std::vector<std::pair<std::int64_t, std::string>>& raw) {
  std::vector<ExternalPost> out;
  const Tokenizer tok;
  for (const auto& [id, text] : raw) out.push_back({id, text, tok(text)});
  return out;
}

InvertedIndex fruit_index() { return InvertedIndex::build(posts_of({{1, "apple banana"}, {2, "banana banana"}})); }

TEST(Index, DocumentStatistics) {
  const InvertedIndex idx = fruit_index();
  EXPECT_EQ(idx.doc_count(), 2u);
  EXPECT_EQ(idx.df("banana"), 2u);
  EXPECT_EQ(idx.df("apple"), 1u);
  EXPECT_EQ(idx.df("cherry"), 0u);
  EXPECT_DOUBLE_EQ(idx.avg_doc_length(), 2.0);
  EXPECT_EQ(idx.doc_tokens(2), (TokenList{"banana", "banana"}));
}

TEST(Index, DuplicateDocIdRejected) {
  EXPECT_THROW(InvertedIndex::build(posts_of({{1, "a"}, {1, "b"}})), InvalidArgument);
}

TEST(Bm25, HandEvaluatedScore) {
  const InvertedIndex idx = fruit_index();
  EXPECT_NEAR(idx.idf("banana"), std::log(1.2), 1e-12);
  EXPECT_NEAR(idx.idf("banana"), 0.18232, 1e-5);
  const TokenList q = {"banana"};
  // tf part 2 * 2.2 / (2 + 1.2) = 1.375
  EXPECT_NEAR(bm25_score(idx, q, 2), std::log(1.2) * 1.375, 1e-12);
  EXPECT_NEAR(bm25_score(idx, q, 2), 0.25069, 1e-5);
}

TEST(Bm25, AbsentTermsAndEmptyQuery) {
  const InvertedIndex idx = fruit_index();
  EXPECT_EQ(bm25_score(idx, TokenList{"cherry"}, 1), 0.0);
  EXPECT_EQ(bm25_score(idx, TokenList{}, 1), 0.0);
  EXPECT_EQ(bm25_score(idx, TokenList{"cherry", "apple"}, 1),
            bm25_score(idx, TokenList{"apple"}, 1));
  EXPECT_THROW(bm25_score(idx, TokenList{"apple"}, 99), InvalidArgument);
}

TEST(Bm25, RepeatedQueryTermsCountOnce) {
  const InvertedIndex idx = fruit_index();
  EXPECT_EQ(bm25_score(idx, TokenList{"banana", "banana"}, 2),
            bm25_score(idx, TokenList{"banana"}, 2));
}

TEST(Retrieve, TopOne) {
  const InvertedIndex idx = fruit_index();
  const auto hits = retrieve_top_k(idx, TokenList{"banana"}, 1);
  ASSERT_EQ(hits.size(), 1u);
  EXPECT_EQ(hits[0].first, 2);
  EXPECT_NEAR(hits[0].second, 0.25069, 1e-5);
}

TEST(Retrieve, OnlyMatchingDocuments) {
  const InvertedIndex idx = fruit_index();
  const auto hits = retrieve_top_k(idx, TokenList{"apple"}, 5);
  ASSERT_EQ(hits.size(), 1u);
  EXPECT_EQ(hits[0].first, 1);
}

TEST(Retrieve, TiesByDocId) {
  const InvertedIndex idx = InvertedIndex::build(posts_of({{9, "x y"}, {4, "x y"}, {6, "z z"}}));
  const auto hits = retrieve_top_k(idx, TokenList{"x"}, 5);
  ASSERT_EQ(hits.size(), 2u);
  EXPECT_EQ(hits[0].first, 4);
  EXPECT_EQ(hits[1].first, 9);
  EXPECT_EQ(hits[0].second, hits[1].second);
}

TEST(Index, SaveLoadRoundTrip) {
  const InvertedIndex idx = fruit_index();
  const auto path = std::filesystem::temp_directory_path() / "prfrl_index_roundtrip.bin";
  idx.save(path);
  const InvertedIndex back = InvertedIndex::load(path);
  std::filesystem::remove(path);
  EXPECT_TRUE(back == idx);
  EXPECT_EQ(bm25_score(back, TokenList{"banana"}, 2), bm25_score(idx, TokenList{"banana"}, 2));
}

TEST(Index, LoadRejectsGarbage) {
  const auto path = std::filesystem::temp_directory_path() / "prfrl_index_garbage.bin";
  {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    std::fputs("not an index", f);
    std::fclose(f);
  }
  EXPECT_THROW(InvertedIndex::load(path), Error);
  std::filesystem::remove(path);
  EXPECT_THROW(InvertedIndex::load(path), IoError);
}

// Independent brute force over the forward index.
double brute_score(const std::vector<ExternalPost>& posts, const std::set<std::string>& q,
                   std::size_t doc) {
  const double n = static_cast<double>(posts.size());
  double avg = 0;
  for (const auto& p : posts) avg += static_cast<double>(p.tokens.size());
  avg /= n;
  double s = 0;
  for (const auto& t : q) {
    double df = 0;
    for (const auto& p : posts) df += std::count(p.tokens.begin(), p.tokens.end(), t) > 0;
    const double tf = static_cast<double>(std::count(posts[doc].tokens.begin(), posts[doc].tokens.end(), t));
    if (tf == 0 || df == 0) continue;
    const double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
    const double dl = static_cast<double>(posts[doc].tokens.size());
    s += idf * tf * 2.2 / (tf + 1.2 * (0.25 + 0.75 * dl / avg));
  }
  return s;
}

TEST(RetrieveProperty, MatchesBruteForceOnRandomCorpora) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<ExternalPost> posts;
    const std::size_t docs = 5 + rng() % 60;
    for (std::size_t d = 0; d < docs; ++d) {
      ExternalPost p;
      p.doc_id = static_cast<std::int64_t>(d * 3 + rng() % 3);
      const std::size_t len = 1 + rng() % 12;
      for (std::size_t i = 0; i < len; ++i) p.tokens.push_back("w" + std::to_string(rng() % 15));
      posts.push_back(p);
    }
    const InvertedIndex idx = InvertedIndex::build(posts);
    TokenList query;
    for (int i = 0; i < 3; ++i) query.push_back("w" + std::to_string(rng() % 18));
    const std::set<std::string> qset(query.begin(), query.end());
    std::vector<std::pair<std::int64_t, double>> expect;
    for (std::size_t d = 0; d < posts.size(); ++d) {
      const double s = brute_score(posts, qset, d);
      EXPECT_NEAR(bm25_score(idx, query, posts[d].doc_id), s, 1e-12);
      if (s > 0) expect.emplace_back(posts[d].doc_id, s);
    }
    std::sort(expect.begin(), expect.end(), [](const auto& a, const auto& b) {
      return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    const auto got = retrieve_top_k(idx, query, posts.size());
    ASSERT_EQ(got.size(), expect.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      EXPECT_EQ(got[i].first, expect[i].first);
      EXPECT_NEAR(got[i].second, expect[i].second, 1e-12);
    }
  }
}

TEST(TermLm, MaximumLikelihood) {
  const std::vector<TokenList> posts = {{"a", "b", "a"}};
  const TermLanguageModel lm = build_term_lm(posts);
  EXPECT_DOUBLE_EQ(lm.probability("a"), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(lm.probability("b"), 1.0 / 3.0);
  EXPECT_EQ(lm.probability("z"), 0.0);
  EXPECT_DOUBLE_EQ(build_term_lm(std::vector<TokenList>{{"x"}}).probability("x"), 1.0);
  EXPECT_DOUBLE_EQ(build_term_lm(std::vector<TokenList>{{"a", "a"}, {"b", "c"}}).probability("a"), 0.5);
  EXPECT_THROW(build_term_lm(std::vector<TokenList>{{}}), InvalidArgument);
}

TEST(TermLmProperty, ProbabilitiesSumToOne) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<TokenList> posts(1 + rng() % 5);
    for (auto& p : posts) {
      for (std::size_t i = 0, n = 1 + rng() % 30; i < n; ++i) p.push_back("t" + std::to_string(rng() % 20));
    }
    const TermLanguageModel lm = build_term_lm(posts);
    double sum = 0;
    for (const auto& [t, c] : lm.counts) sum += lm.probability(t);
    EXPECT_NEAR(sum, 1.0, 1e-9);
  }
}

TEST(Extraction, FrequencyModeAndTies) {
  const InvertedIndex idx = fruit_index();
  PrfConfig c;
  c.k2 = 2;
  const auto lm = build_term_lm(std::vector<TokenList>{{"c", "b", "a", "a", "b", "a"}});
  EXPECT_EQ(extract_prf_terms(lm, c, idx).terms, (std::vector<std::string>{"a", "b"}));
  c.k2 = 1;
  const auto tie = build_term_lm(std::vector<TokenList>{{"b", "a"}});
  EXPECT_EQ(extract_prf_terms(tie, c, idx).terms, (std::vector<std::string>{"a"}));
}

TEST(Extraction, IdfModePrefersRareTerms) {
  std::vector<std::pair<std::int64_t, std::string>> raw;
  for (int i = 0; i < 20; ++i) raw.emplace_back(i, "common filler");
  raw.emplace_back(100, "rare");
  const InvertedIndex idx = InvertedIndex::build(posts_of(raw));
  TokenList evidence;
  for (int i = 0; i < 5; ++i) evidence.push_back("common");
  for (int i = 0; i < 4; ++i) evidence.push_back("rare");
  const auto lm = build_term_lm(std::vector<TokenList>{evidence});
  // 5 * ln(1 + 1.5/20.5) against 4 * ln(1 + 20.5/1.5)
  ASSERT_GT(4 * idx.idf("rare"), 5 * idx.idf("common"));
  PrfConfig c;
  c.k2 = 1;
  c.mode = ExtractionMode::kIdf;
  EXPECT_EQ(extract_prf_terms(lm, c, idx).terms, (std::vector<std::string>{"rare"}));
  c.mode = ExtractionMode::kFrequency;
  EXPECT_EQ(extract_prf_terms(lm, c, idx).terms, (std::vector<std::string>{"common"}));
}

TEST(Expander, NoEvidenceGivesEmptySet) {
  const InvertedIndex idx = fruit_index();
  PrfExpander ex(idx, {}, Tokenizer());
  const Tokenizer tok;
  EXPECT_TRUE(ex.expand({"r1", "zebra quagga", tok("zebra quagga")}).terms.empty());
  EXPECT_EQ(ex.stats().empty_sets, 1u);
}

TEST(Expander, CooccurringTermIsProposed) {
  const InvertedIndex idx = InvertedIndex::build(posts_of({
      {1, "router firmware upgrade"}, {2, "router firmware reset"}, {3, "printer toner"},
      {4, "router firmware"}, {5, "toner cartridge"}}));
  PrfConfig c;
  c.k1 = 3;
  c.k2 = 3;
  PrfExpander ex(idx, c, Tokenizer());
  const Tokenizer tok;
  const auto terms = ex.expand({"r", "my router is broken", tok("my router is broken")}).terms;
  EXPECT_NE(std::find(terms.begin(), terms.end(), "firmware"), terms.end());
}

TEST(ExpanderProperty, CachedAndFreshAgree) {
  std::mt19937_64 rng(8);
  std::vector<std::pair<std::int64_t, std::string>> raw;
  for (int d = 0; d < 80; ++d) {
    std::string text;
    for (int i = 0; i < 8; ++i) text += "w" + std::to_string(rng() % 30) + " ";
    raw.emplace_back(d, text);
  }
  const InvertedIndex idx = InvertedIndex::build(posts_of(raw));
  const Tokenizer tok;
  PrfConfig c;
  c.k1 = 4;
  c.k2 = 5;
  PrfExpander shared(idx, c, tok);
  for (int q = 0; q < 30; ++q) {
    const std::string text = "w" + std::to_string(rng() % 35) + " w" + std::to_string(rng() % 35);
    const ResponseCandidate r{"a", text, tok(text)};
    const ResponseCandidate twin{"b", text, tok(text)};
    PrfExpander fresh(idx, c, tok);
    const auto first = shared.expand(r);
    EXPECT_EQ(shared.expand(twin).terms, first.terms);
    EXPECT_EQ(fresh.expand(r).terms, first.terms);
  }
  EXPECT_EQ(shared.stats().examples, 60u);
  EXPECT_LE(shared.stats().distinct_responses, 30u);
}

}  // namespace
}  // namespace prfrl
