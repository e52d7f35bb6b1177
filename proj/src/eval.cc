#include "tabsearch/eval.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <span>
#include <sstream>

#include <boost/math/distributions/students_t.hpp>
#include <json.hpp>

#include "tabsearch/error.h"
#include "tabsearch/random.h"

namespace tabsearch {
namespace {

std::string FormatDouble(double v) {
  char buf[32];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

double ParseDouble(const std::string& s, const std::string& where) {
  double v = 0.0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size()) {
    throw ParseError(where + ": bad number '" + s + "'");
  }
  return v;
}

int GradeOf(const QueryJudgments& judgments, const std::string& table_id) {
  const auto it = judgments.find(table_id);
  return it == judgments.end() ? 0 : it->second;
}

double Gain(int grade, GainType type) {
  return type == GainType::kExponential ? std::exp2(grade) - 1.0
                                        : static_cast<double>(grade);
}

const QueryJudgments& JudgmentsFor(const QrelsIndex& qrels,
                                   const std::string& query_id) {
  static const QueryJudgments kEmpty;
  const auto it = qrels.find(query_id);
  return it == qrels.end() ? kEmpty : it->second;
}

}  // namespace

void SortRanking(std::vector<RankedEntry>& entries) {
  std::sort(entries.begin(), entries.end(),
            [](const RankedEntry& a, const RankedEntry& b) {
              if (a.score != b.score) return a.score > b.score;
              return a.table_id < b.table_id;
            });
}

void RankedRun::Add(const std::string& query_id,
                    std::vector<RankedEntry> entries) {
  std::set<std::string> seen;
  for (const auto& e : entries) {
    if (!seen.insert(e.table_id).second) {
      throw ValidationError("run: duplicate table '" + e.table_id +
                            "' for query '" + query_id + "'");
    }
  }
  if (queries_.count(query_id)) {
    throw ValidationError("run: query '" + query_id + "' added twice");
  }
  SortRanking(entries);
  queries_.emplace(query_id, std::move(entries));
}

const std::vector<RankedEntry>& RankedRun::Ranking(
    const std::string& query_id) const {
  const auto it = queries_.find(query_id);
  if (it == queries_.end()) {
    throw ValidationError("run has no query '" + query_id + "'");
  }
  return it->second;
}

std::string FormatRun(const RankedRun& run, const std::string& tag) {
  std::ostringstream out;
  for (const auto& [qid, entries] : run.queries()) {
    for (std::size_t i = 0; i < entries.size(); ++i) {
      out << qid << " Q0 " << entries[i].table_id << ' ' << (i + 1) << ' '
          << FormatDouble(entries[i].score) << ' ' << tag << '\n';
    }
  }
  return out.str();
}

void WriteRunFile(const RankedRun& run, const std::string& tag,
                  const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write run file " + path.string());
  out << FormatRun(run, tag);
}

RankedRun ReadRunFile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open run file " + path.string());
  std::map<std::string, std::vector<std::pair<long, RankedEntry>>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string qid, q0, tid, rank, score, tag;
    if (!(fields >> qid)) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (!(fields >> q0 >> tid >> rank >> score >> tag)) {
      throw ParseError(where + ": expected 'qid Q0 table_id rank score tag'");
    }
    long rank_value = 0;
    const auto [end, ec] =
        std::from_chars(rank.data(), rank.data() + rank.size(), rank_value);
    if (ec != std::errc() || end != rank.data() + rank.size() || rank_value < 1) {
      throw ParseError(where + ": rank '" + rank + "' is not a positive integer");
    }
    rows[qid].push_back({rank_value, {tid, ParseDouble(score, where)}});
  }
  RankedRun run;
  for (auto& [qid, entries] : rows) {
    std::stable_sort(entries.begin(), entries.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<RankedEntry> ranking;
    for (auto& e : entries) ranking.push_back(std::move(e.second));
    run.Add(qid, std::move(ranking));
  }
  return run;
}

double NdcgAtK(const std::vector<RankedEntry>& ranking,
               const QueryJudgments& judgments, std::size_t k, GainType gain) {
  if (k == 0) throw std::invalid_argument("ndcg cut-off must be >= 1");
  double dcg = 0.0;
  for (std::size_t i = 0; i < std::min(k, ranking.size()); ++i) {
    dcg += Gain(GradeOf(judgments, ranking[i].table_id), gain) /
           std::log2(static_cast<double>(i) + 2.0);
  }
  std::vector<int> ideal;
  for (const auto& [tid, grade] : judgments) ideal.push_back(grade);
  std::sort(ideal.begin(), ideal.end(), std::greater<>());
  double idcg = 0.0;
  for (std::size_t i = 0; i < std::min(k, ideal.size()); ++i) {
    idcg += Gain(ideal[i], gain) / std::log2(static_cast<double>(i) + 2.0);
  }
  return idcg > 0.0 ? dcg / idcg : 0.0;
}

double AveragePrecision(const std::vector<RankedEntry>& ranking,
                        const QueryJudgments& judgments) {
  std::size_t relevant = 0;
  for (const auto& [tid, grade] : judgments) relevant += grade >= 1;
  if (relevant == 0) return 0.0;
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < ranking.size(); ++i) {
    if (GradeOf(judgments, ranking[i].table_id) >= 1) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(i + 1);
    }
  }
  return sum / static_cast<double>(relevant);
}

double ReciprocalRank(const std::vector<RankedEntry>& ranking,
                      const QueryJudgments& judgments) {
  for (std::size_t i = 0; i < ranking.size(); ++i) {
    if (GradeOf(judgments, ranking[i].table_id) >= 1) {
      return 1.0 / static_cast<double>(i + 1);
    }
  }
  return 0.0;
}

const std::array<std::string, kNumMetrics>& MetricNames() {
  static const std::array<std::string, kNumMetrics> kNames = {
      "map", "mrr", "ndcg@5", "ndcg@10", "ndcg@15", "ndcg@20"};
  return kNames;
}

void MetricReport::Set(const std::string& query_id, const MetricValues& values) {
  per_query_[query_id] = values;
}

MetricValues MetricReport::Aggregate() const {
  MetricValues mean{};
  if (per_query_.empty()) return mean;
  for (const auto& [qid, values] : per_query_) {
    for (std::size_t m = 0; m < kNumMetrics; ++m) mean[m] += values[m];
  }
  for (double& v : mean) v /= static_cast<double>(per_query_.size());
  return mean;
}

std::vector<double> MetricReport::Column(std::size_t metric) const {
  std::vector<double> column;
  column.reserve(per_query_.size());
  for (const auto& [qid, values] : per_query_) column.push_back(values.at(metric));
  return column;
}

MetricReport Evaluate(const RankedRun& run, const QrelsIndex& qrels,
                      GainType gain) {
  MetricReport report;
  for (const auto& [qid, ranking] : run.queries()) {
    const QueryJudgments& judged = JudgmentsFor(qrels, qid);
    MetricValues values{};
    values[0] = AveragePrecision(ranking, judged);
    values[1] = ReciprocalRank(ranking, judged);
    for (std::size_t c = 0; c < kNdcgCutoffs.size(); ++c) {
      values[2 + c] = NdcgAtK(ranking, judged, kNdcgCutoffs[c], gain);
    }
    report.Set(qid, values);
  }
  return report;
}

double MeanAveragePrecision(const RankedRun& run, const QrelsIndex& qrels) {
  if (run.queries().empty()) return 0.0;
  double total = 0.0;
  for (const auto& [qid, ranking] : run.queries()) {
    total += AveragePrecision(ranking, JudgmentsFor(qrels, qid));
  }
  return total / static_cast<double>(run.queries().size());
}

double MeanReciprocalRank(const RankedRun& run, const QrelsIndex& qrels) {
  if (run.queries().empty()) return 0.0;
  double total = 0.0;
  for (const auto& [qid, ranking] : run.queries()) {
    total += ReciprocalRank(ranking, JudgmentsFor(qrels, qid));
  }
  return total / static_cast<double>(run.queries().size());
}

std::string FormatReport(const MetricReport& report) {
  std::ostringstream out;
  out << "qid";
  for (const auto& name : MetricNames()) out << '\t' << name;
  out << '\n';
  auto row = [&out](const std::string& label, const MetricValues& values) {
    out << label;
    for (double v : values) out << '\t' << FormatDouble(v);
    out << '\n';
  };
  for (const auto& [qid, values] : report.per_query()) row(qid, values);
  row("all", report.Aggregate());
  return out.str();
}

void WriteReport(const MetricReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write report " + path.string());
  out << FormatReport(report);
}

MetricReport ReadReport(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open report " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("qid\t", 0) != 0) {
    throw ParseError(path.string() + ": missing report header");
  }
  MetricReport report;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    std::istringstream fields(line);
    std::string qid;
    std::getline(fields, qid, '\t');
    MetricValues values{};
    for (std::size_t m = 0; m < kNumMetrics; ++m) {
      std::string cell;
      if (!std::getline(fields, cell, '\t')) {
        throw ParseError(where + ": expected " + std::to_string(kNumMetrics) +
                         " metric columns");
      }
      values[m] = ParseDouble(cell, where);
    }
    if (qid != "all") report.Set(qid, values);
  }
  return report;
}

std::string ReportToJson(const MetricReport& report) {
  nlohmann::ordered_json queries = nlohmann::ordered_json::object();
  auto to_obj = [](const MetricValues& values) {
    nlohmann::ordered_json obj = nlohmann::ordered_json::object();
    for (std::size_t m = 0; m < kNumMetrics; ++m) obj[MetricNames()[m]] = values[m];
    return obj;
  };
  for (const auto& [qid, values] : report.per_query()) queries[qid] = to_obj(values);
  nlohmann::ordered_json root;
  root["aggregate"] = to_obj(report.Aggregate());
  root["queries"] = std::move(queries);
  return root.dump(2) + "\n";
}

std::vector<std::vector<std::string>> KFoldSplit(
    const std::vector<std::string>& query_ids, std::size_t k,
    std::uint64_t seed) {
  if (k == 0) throw ValidationError("fold count must be >= 1");
  if (k > query_ids.size()) {
    throw ValidationError("cannot split " + std::to_string(query_ids.size()) +
                          " queries into " + std::to_string(k) + " folds");
  }
  std::vector<std::string> shuffled = query_ids;
  std::mt19937_64 rng(seed);
  Shuffle(std::span<std::string>(shuffled), rng);
  std::vector<std::vector<std::string>> folds(k);
  for (std::size_t i = 0; i < shuffled.size(); ++i) {
    folds[i % k].push_back(std::move(shuffled[i]));
  }
  return folds;
}

TTestResult PairedTTest(const std::vector<double>& a,
                        const std::vector<double>& b) {
  if (a.size() != b.size()) {
    throw ValidationError("paired t-test: samples differ in length");
  }
  if (a.size() < 2) {
    throw ValidationError("paired t-test needs at least 2 pairs");
  }
  const std::size_t n = a.size();
  std::vector<double> diff(n);
  for (std::size_t i = 0; i < n; ++i) diff[i] = a[i] - b[i];
  const double mean =
      std::accumulate(diff.begin(), diff.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double d : diff) ss += (d - mean) * (d - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));

  TTestResult r;
  r.df = static_cast<int>(n - 1);
  r.mean_difference = mean;
  if (sd == 0.0) {
    if (mean == 0.0) {
      r.t = 0.0;
      r.p = 1.0;
    } else {
      r.t = std::copysign(std::numeric_limits<double>::infinity(), mean);
      r.p = 0.0;
    }
    return r;
  }
  r.t = mean / (sd / std::sqrt(static_cast<double>(n)));
  const boost::math::students_t dist(static_cast<double>(r.df));
  r.p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t)));
  r.p = std::min(1.0, r.p);
  return r;
}

std::string SignificanceMarker(double p) {
  if (p < 0.005) return "‡";
  if (p < 0.05) return "†";
  return "";
}

std::vector<ComparisonRow> Compare(const MetricReport& a,
                                   const MetricReport& b) {
  std::vector<std::string> ids_a, ids_b;
  for (const auto& [qid, v] : a.per_query()) ids_a.push_back(qid);
  for (const auto& [qid, v] : b.per_query()) ids_b.push_back(qid);
  if (ids_a != ids_b) {
    throw ValidationError("compare: reports cover different query sets (" +
                          std::to_string(ids_a.size()) + " vs " +
                          std::to_string(ids_b.size()) + " queries)");
  }
  const MetricValues mean_a = a.Aggregate();
  const MetricValues mean_b = b.Aggregate();
  std::vector<ComparisonRow> rows;
  for (std::size_t m = 0; m < kNumMetrics; ++m) {
    ComparisonRow row;
    row.metric = MetricNames()[m];
    row.mean_a = mean_a[m];
    row.mean_b = mean_b[m];
    row.test = PairedTTest(a.Column(m), b.Column(m));
    row.marker = SignificanceMarker(row.test.p);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string FormatComparison(const std::vector<ComparisonRow>& rows) {
  std::ostringstream out;
  out << "metric\tmean_a\tmean_b\tt\tp\tdf\tsig\n";
  for (const auto& r : rows) {
    out << r.metric << '\t' << FormatDouble(r.mean_a) << '\t'
        << FormatDouble(r.mean_b) << '\t' << FormatDouble(r.test.t) << '\t'
        << FormatDouble(r.test.p) << '\t' << r.test.df << '\t' << r.marker
        << '\n';
  }
  return out.str();
}

}  // namespace tabsearch
