#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "tabsearch/corpus.h"

namespace tabsearch {

struct RankedEntry {
  std::string table_id;
  double score = 0.0;

  friend bool operator==(const RankedEntry&, const RankedEntry&) = default;
};

// Per query: entries sorted by descending score, ties by ascending table id.
class RankedRun {
 public:
  // Sorts each query's entries. Throws ValidationError on a duplicate table
  // id within a query.
  void Add(const std::string& query_id, std::vector<RankedEntry> entries);

  const std::map<std::string, std::vector<RankedEntry>>& queries() const {
    return queries_;
  }
  const std::vector<RankedEntry>& Ranking(const std::string& query_id) const;
  bool Contains(const std::string& query_id) const {
    return queries_.count(query_id) != 0;
  }

  friend bool operator==(const RankedRun&, const RankedRun&) = default;

 private:
  std::map<std::string, std::vector<RankedEntry>> queries_;
};

void SortRanking(std::vector<RankedEntry>& entries);

// "qid Q0 table_id rank score tag", one line per entry, queries in id order.
void WriteRunFile(const RankedRun& run, const std::string& tag,
                  const std::filesystem::path& path);
std::string FormatRun(const RankedRun& run, const std::string& tag);
// Each query's lines are read in rank order, then re-sorted like any run.
RankedRun ReadRunFile(const std::filesystem::path& path);

enum class GainType { kExponential, kLinear };

// Judgments of one query: table id -> grade. Unjudged tables are grade 0.
using QueryJudgments = std::map<std::string, int>;

double NdcgAtK(const std::vector<RankedEntry>& ranking,
               const QueryJudgments& judgments, std::size_t k,
               GainType gain = GainType::kExponential);

// Relevance is grade >= 1. Relevant tables missing from the ranking count as
// misses.
double AveragePrecision(const std::vector<RankedEntry>& ranking,
                        const QueryJudgments& judgments);
double ReciprocalRank(const std::vector<RankedEntry>& ranking,
                      const QueryJudgments& judgments);

inline constexpr std::array<std::size_t, 4> kNdcgCutoffs = {5, 10, 15, 20};
inline constexpr std::size_t kNumMetrics = 2 + kNdcgCutoffs.size();
// "map", "mrr", "ndcg@5", "ndcg@10", "ndcg@15", "ndcg@20".
const std::array<std::string, kNumMetrics>& MetricNames();

using MetricValues = std::array<double, kNumMetrics>;

// Aggregates are arithmetic means of the per-query values.
class MetricReport {
 public:
  void Set(const std::string& query_id, const MetricValues& values);

  const std::map<std::string, MetricValues>& per_query() const {
    return per_query_;
  }
  std::size_t num_queries() const { return per_query_.size(); }
  MetricValues Aggregate() const;

  double map() const { return Aggregate()[0]; }
  double mrr() const { return Aggregate()[1]; }

  // Metric column for all queries in id order.
  std::vector<double> Column(std::size_t metric) const;

  friend bool operator==(const MetricReport&, const MetricReport&) = default;

 private:
  std::map<std::string, MetricValues> per_query_;
};

// Evaluates every query present in `run`.
MetricReport Evaluate(const RankedRun& run, const QrelsIndex& qrels,
                      GainType gain = GainType::kExponential);

double MeanAveragePrecision(const RankedRun& run, const QrelsIndex& qrels);
double MeanReciprocalRank(const RankedRun& run, const QrelsIndex& qrels);

// Tab-separated: header "qid<TAB>map<TAB>mrr<TAB>ndcg@5...", one row per
// query, then an "all" row with the means.
std::string FormatReport(const MetricReport& report);
void WriteReport(const MetricReport& report, const std::filesystem::path& path);
MetricReport ReadReport(const std::filesystem::path& path);
// {"queries": {qid: {metric: value}}, "aggregate": {metric: value}}
std::string ReportToJson(const MetricReport& report);

// Seeded Fisher-Yates shuffle, then query i of the shuffled list goes to
// fold i mod k.
std::vector<std::vector<std::string>> KFoldSplit(
    const std::vector<std::string>& query_ids, std::size_t k,
    std::uint64_t seed);

struct TTestResult {
  double t = 0.0;
  double p = 1.0;
  int df = 0;
  double mean_difference = 0.0;
};

// Two-tailed paired t-test on a - b. With zero variance of the differences:
// p = 1 (t = 0) if every difference is zero, else p = 0 and t = +/-inf.
TTestResult PairedTTest(const std::vector<double>& a,
                        const std::vector<double>& b);

struct ComparisonRow {
  std::string metric;
  double mean_a = 0.0;
  double mean_b = 0.0;
  TTestResult test;
  std::string marker;  // "†" (p < 0.05), "‡" (p < 0.005) or ""
};

std::string SignificanceMarker(double p);

// Throws ValidationError unless both reports cover the same query ids.
std::vector<ComparisonRow> Compare(const MetricReport& a,
                                   const MetricReport& b);
std::string FormatComparison(const std::vector<ComparisonRow>& rows);

}  // namespace tabsearch
