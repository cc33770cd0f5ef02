#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "prfrl/error.h"
#include "prfrl/metrics.h"

namespace prfrl {
namespace {

// Labels in ranked order; scores descend so the order is kept.
RankedGroup ranked(const std::vector<int>& labels) {
  std::vector<ScoredCandidate> c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    c.push_back({"r" + std::to_string(i), 1.0 - 0.01 * static_cast<double>(i), labels[i]});
  }
  return RankedGroup::from_scores("ctx", std::move(c));
}

TEST(Recall, SinglePositiveAtRankTwo) {
  const RankedGroup g = ranked({0, 1, 0, 0});
  EXPECT_EQ(recall_at_k(g, 1), 0.0);
  EXPECT_EQ(recall_at_k(g, 2), 1.0);
}

TEST(Recall, TwoPositives) {
  EXPECT_DOUBLE_EQ(recall_at_k(ranked({1, 0, 0, 1, 0}), 2), 0.5);
}

TEST(Recall, CutoffBeyondGroup) {
  EXPECT_EQ(recall_at_k(ranked({0, 0, 1}), 10), 1.0);
}

TEST(Recall, NoPositiveIsAnError) {
  EXPECT_THROW(recall_at_k(ranked({0, 0}), 1), InvalidArgument);
}

TEST(Precision, AtOne) {
  EXPECT_EQ(precision_at_1(ranked({1, 0, 0})), 1.0);
  EXPECT_EQ(precision_at_1(ranked({0, 0, 1})), 0.0);
}

TEST(AveragePrecision, Examples) {
  EXPECT_DOUBLE_EQ(average_precision(ranked({0, 1, 0, 0, 0})), 0.5);
  EXPECT_DOUBLE_EQ(average_precision(ranked({1, 0, 1})), (1.0 + 2.0 / 3.0) / 2.0);
  EXPECT_NEAR(average_precision(ranked({1, 0, 1})), 0.8333, 1e-4);
  EXPECT_EQ(average_precision(ranked({1, 1, 0, 0})), 1.0);
}

TEST(Ranking, TiesBrokenByCandidateId) {
  const RankedGroup g = RankedGroup::from_scores(
      "c", {{"b", 0.5, 0}, {"a", 0.5, 1}, {"c", 0.9, 0}});
  ASSERT_EQ(g.ranked.size(), 3u);
  EXPECT_EQ(g.ranked[0].candidate_id, "c");
  EXPECT_EQ(g.ranked[1].candidate_id, "a");
  EXPECT_EQ(g.ranked[2].candidate_id, "b");
}

TEST(Report, SkipsGroupsWithoutPositives) {
  const MetricsReport r = compute_metrics({ranked({1, 0}), ranked({0, 0}), ranked({0, 1})});
  EXPECT_EQ(r.groups, 2u);
  EXPECT_EQ(r.skipped_groups, 1u);
  EXPECT_DOUBLE_EQ(r.recall_1, 0.5);
  EXPECT_DOUBLE_EQ(r.map, 0.75);
}

TEST(Report, PerfectScores) {
  std::vector<RankedGroup> groups;
  for (int i = 0; i < 5; ++i) groups.push_back(ranked({1, 0, 0, 0, 0, 0}));
  const MetricsReport r = compute_metrics(groups);
  for (std::size_t col = 0; col < 5; ++col) EXPECT_EQ(metric_value(r, col), 1.0);
}

TEST(Report, JsonAndTable) {
  const MetricsReport r = compute_metrics({ranked({0, 1})});
  const std::string json = r.to_json();
  EXPECT_NE(json.find("\"recall@1\":0.0"), std::string::npos) << json;
  EXPECT_NE(json.find("\"MAP\":0.5"), std::string::npos) << json;
  const std::string table = format_table({{"none", r}, {"rule", r}});
  EXPECT_NE(table.find("recall@1"), std::string::npos);
  EXPECT_NE(table.find("precision@1"), std::string::npos);
  EXPECT_NE(table.find("rule"), std::string::npos);
}

TEST(MetricsProperty, RandomScoresGiveChanceRecall) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u;
  std::vector<RankedGroup> groups;
  for (int g = 0; g < 1000; ++g) {
    std::vector<ScoredCandidate> c;
    const std::size_t pos = rng() % 10;
    for (std::size_t i = 0; i < 10; ++i) {
      c.push_back({"r" + std::to_string(i), u(rng), i == pos ? 1 : 0});
    }
    groups.push_back(RankedGroup::from_scores("c" + std::to_string(g), std::move(c)));
  }
  EXPECT_NEAR(compute_metrics(groups).recall_1, 0.1, 0.03);
}

std::vector<ScoredCandidate> random_group(std::mt19937_64& rng) {
  std::vector<ScoredCandidate> c;
  const std::size_t n = 2 + rng() % 12;
  for (std::size_t i = 0; i < n; ++i) {
    c.push_back({"r" + std::to_string(rng() % 100), static_cast<double>(rng() % 6),
                 static_cast<int>(rng() % 3 == 0)});
  }
  c[rng() % n].label = 1;
  return c;
}

TEST(MetricsProperty, InvariantUnderMonotoneTransform) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    auto c = random_group(rng);
    auto t = c;
    for (auto& x : t) x.score = std::exp(3.0 * x.score) - 7.0;
    const MetricsReport a = compute_metrics({RankedGroup::from_scores("g", c)});
    const MetricsReport b = compute_metrics({RankedGroup::from_scores("g", t)});
    EXPECT_EQ(a, b);
  }
}

TEST(MetricsProperty, RecallMonotoneInCutoff) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const RankedGroup g = RankedGroup::from_scores("g", random_group(rng));
    double prev = 0.0;
    for (std::size_t k = 1; k <= g.ranked.size(); ++k) {
      const double r = recall_at_k(g, k);
      EXPECT_GE(r, prev);
      prev = r;
    }
    EXPECT_EQ(recall_at_k(g, g.ranked.size()), 1.0);
  }
}

TEST(MetricsProperty, SinglePositiveMapIsReciprocalRank) {
  std::mt19937_64 rng(4);
  std::vector<RankedGroup> groups;
  double mrr = 0.0;
  for (int g = 0; g < 100; ++g) {
    auto c = random_group(rng);
    for (auto& x : c) x.label = 0;
    c[rng() % c.size()].label = 1;
    groups.push_back(RankedGroup::from_scores("g" + std::to_string(g), c));
    for (std::size_t i = 0; i < groups.back().ranked.size(); ++i) {
      if (groups.back().ranked[i].label == 1) mrr += 1.0 / static_cast<double>(i + 1);
    }
  }
  const MetricsReport r = compute_metrics(groups);
  EXPECT_NEAR(r.map, mrr / 100.0, 1e-12);
  EXPECT_EQ(r.precision_1, r.recall_1);
}

}  // namespace
}  // namespace prfrl
