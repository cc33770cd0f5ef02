#include "prfrl/metrics.h"

#include <fmt/format.h>

#include <algorithm>

#include "json.hpp"
#include "prfrl/error.h"
#include "prfrl/log.h"

namespace prfrl {

RankedGroup RankedGroup::from_scores(std::string context_id,
                                     std::vector<ScoredCandidate> candidates) {
  std::sort(candidates.begin(), candidates.end(),
            [](const ScoredCandidate& a, const ScoredCandidate& b) {
              if (a.score != b.score) return a.score > b.score;
              return a.candidate_id < b.candidate_id;
            });
  return {std::move(context_id), std::move(candidates)};
}

std::size_t RankedGroup::positives() const {
  return static_cast<std::size_t>(std::count_if(
      ranked.begin(), ranked.end(), [](const ScoredCandidate& c) { return c.label == 1; }));
}

namespace {

std::size_t require_positives(const RankedGroup& group) {
  const std::size_t pos = group.positives();
  if (pos == 0) throw InvalidArgument("unratable group: " + group.context_id);
  return pos;
}

}  // namespace

double recall_at_k(const RankedGroup& group, std::size_t k) {
  if (k < 1) throw InvalidArgument("recall@k needs k >= 1");
  const std::size_t pos = require_positives(group);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < std::min(k, group.ranked.size()); ++i) {
    hits += group.ranked[i].label == 1 ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(pos);
}

double precision_at_1(const RankedGroup& group) {
  if (group.ranked.empty()) throw InvalidArgument("empty group");
  return group.ranked.front().label == 1 ? 1.0 : 0.0;
}

double average_precision(const RankedGroup& group) {
  const std::size_t pos = require_positives(group);
  double sum = 0.0;
  std::size_t seen = 0;
  for (std::size_t i = 0; i < group.ranked.size(); ++i) {
    if (group.ranked[i].label != 1) continue;
    ++seen;
    sum += static_cast<double>(seen) / static_cast<double>(i + 1);
  }
  return sum / static_cast<double>(pos);
}

double mean_average_precision(const std::vector<RankedGroup>& groups) {
  if (groups.empty()) throw InvalidArgument("no groups");
  double sum = 0.0;
  for (const RankedGroup& g : groups) sum += average_precision(g);
  return sum / static_cast<double>(groups.size());
}

MetricsReport compute_metrics(const std::vector<RankedGroup>& groups) {
  MetricsReport report;
  std::vector<RankedGroup> rated;
  for (const RankedGroup& g : groups) {
    if (g.ranked.empty() || g.positives() == 0) {
      ++report.skipped_groups;
    } else {
      rated.push_back(g);
    }
  }
  if (report.skipped_groups > 0) {
    log::warning("skipped {} group(s) without a positive candidate", report.skipped_groups);
  }
  if (rated.empty()) throw InvalidArgument("no ratable groups");
  for (const RankedGroup& g : rated) {
    report.recall_1 += recall_at_k(g, 1);
    report.recall_2 += recall_at_k(g, 2);
    report.recall_5 += recall_at_k(g, 5);
    report.precision_1 += precision_at_1(g);
  }
  const double n = static_cast<double>(rated.size());
  report.recall_1 /= n;
  report.recall_2 /= n;
  report.recall_5 /= n;
  report.precision_1 /= n;
  report.map = mean_average_precision(rated);
  report.groups = rated.size();
  return report;
}

double metric_value(const MetricsReport& report, std::size_t column) {
  switch (column) {
    case 0: return report.recall_1;
    case 1: return report.recall_2;
    case 2: return report.recall_5;
    case 3: return report.map;
    case 4: return report.precision_1;
  }
  throw InvalidArgument("unknown metric column");
}

std::string MetricsReport::to_json() const {
  nlohmann::ordered_json j;
  for (std::size_t c = 0; c < std::size(kMetricNames); ++c) {
    j[kMetricNames[c]] = metric_value(*this, c);
  }
  j["groups"] = groups;
  j["skipped_groups"] = skipped_groups;
  return j.dump();
}

std::string format_table(const std::vector<std::pair<std::string, MetricsReport>>& rows) {
  std::size_t width = 6;
  for (const auto& [name, _] : rows) width = std::max(width, name.size());
  std::string out = fmt::format("{:<{}}", "method", width);
  for (const char* m : kMetricNames) out += fmt::format("  {:>11}", m);
  out += '\n';
  for (const auto& [name, report] : rows) {
    out += fmt::format("{:<{}}", name, width);
    for (std::size_t c = 0; c < std::size(kMetricNames); ++c) {
      out += fmt::format("  {:>11.4f}", metric_value(report, c));
    }
    out += '\n';
  }
  return out;
}

}  // namespace prfrl
