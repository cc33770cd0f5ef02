#pragma once

#include <string>
#include <vector>

namespace prfrl {

struct ScoredCandidate {
  std::string candidate_id;
  double score = 0.0;
  int label = 0;
};

// Candidates of one context ordered by score desc, candidate_id asc.
struct RankedGroup {
  std::string context_id;
  std::vector<ScoredCandidate> ranked;

  static RankedGroup from_scores(std::string context_id,
                                 std::vector<ScoredCandidate> candidates);
  std::size_t positives() const;
};

double recall_at_k(const RankedGroup& group, std::size_t k);
double precision_at_1(const RankedGroup& group);
double average_precision(const RankedGroup& group);
double mean_average_precision(const std::vector<RankedGroup>& groups);

struct MetricsReport {
  double recall_1 = 0.0;
  double recall_2 = 0.0;
  double recall_5 = 0.0;
  double map = 0.0;
  double precision_1 = 0.0;
  std::size_t groups = 0;
  std::size_t skipped_groups = 0;

  std::string to_json() const;
  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

// Column order used by reports and the comparison table.
inline constexpr const char* kMetricNames[] = {"recall@1", "recall@2", "recall@5",
                                               "MAP", "precision@1"};

double metric_value(const MetricsReport& report, std::size_t column);

// Groups without a positive candidate are skipped and counted.
MetricsReport compute_metrics(const std::vector<RankedGroup>& groups);

// Aligned plain-text table, one row per labelled report.
std::string format_table(const std::vector<std::pair<std::string, MetricsReport>>& rows);

}  // namespace prfrl
