// Acceptance suite: one PASS/FAIL/SKIP line per criterion. Exits nonzero if
// any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "eval_reference.h"
#include "fusion_reference.h"
#include "pack_reference.h"
#include "selector_reference.h"
#include "tabsearch/corpus.h"
#include "tabsearch/encoder.h"
#include "tabsearch/eval.h"
#include "tabsearch/fusion.h"
#include "tabsearch/pipeline.h"
#include "tabsearch/selector.h"
#include "test_support.h"

namespace tabsearch {
namespace {

enum class Outcome { kPass, kFail, kSkip };

struct Verdict {
  Outcome outcome = Outcome::kFail;
  std::string detail;
};

Verdict Check(bool ok, std::string detail) {
  return {ok ? Outcome::kPass : Outcome::kFail, std::move(detail)};
}

bool Near(double got, double want, double tol) { return std::abs(got - want) <= tol; }

Verdict SelectorOracle() {
  const auto store = testing::ToyStore();
  std::mt19937_64 rng(2001);
  const auto start = std::chrono::steady_clock::now();
  int mismatches = 0, selections = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const Table t = testing::RandomTable(rng, "t" + std::to_string(trial), 6, 6, 3);
    const Query q{"q", testing::RandomPhrase(rng, 4, 1)};
    for (auto mode : {SalienceMode::kMean, SalienceMode::kSum, SalienceMode::kMax}) {
      for (auto kind : {ItemKind::kRow, ItemKind::kColumn, ItemKind::kCell}) {
        mismatches += testing::SelectMismatches(t, q, mode, kind, store) != 0;
        ++selections;
      }
    }
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::ostringstream os;
  os << selections << " selections, " << mismatches << " mismatched, " << seconds
     << " s";
  return Check(mismatches == 0 && seconds < 5.0, os.str());
}

Verdict PackingInvariants() {
  const auto vocab = testing::ToyVocab();
  const auto store = testing::ToyStore();
  const Budgets budgets;
  std::mt19937_64 rng(2002);
  std::size_t violations = 0;
  std::string first;
  for (int trial = 0; trial < 1000; ++trial) {
    const Table t = testing::RandomTable(rng, "t", 12, 8, 5);
    const Query q{"q", testing::RandomPhrase(rng, 8, 1)};
    const auto kind = static_cast<ItemKind>(UniformBelow(rng, 3));
    const auto mode = static_cast<SalienceMode>(UniformBelow(rng, 4));
    const auto items = Select(t, q, mode, kind, store, trial);
    const auto packed = Pack(q, t, items, vocab, PackOptions{budgets});
    const auto found = testing::PackViolations(packed, q, t, items, vocab, budgets);
    if (!found.empty() && first.empty()) first = found.front();
    violations += found.size();
  }
  return Check(violations == 0, "1000 packs, " + std::to_string(violations) +
                                    " violations" + (first.empty() ? "" : ": " + first));
}

std::vector<RankedEntry> Ranking(const std::vector<std::string>& ids) {
  std::vector<RankedEntry> out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    out.push_back({ids[i], static_cast<double>(ids.size() - i)});
  }
  return out;
}

Verdict MetricOracle() {
  int failed = 0;
  const QueryJudgments ndcg_judged = {{"t1", 2}, {"t3", 1}};
  failed += !Near(NdcgAtK(Ranking({"t1", "t2", "t3"}), ndcg_judged, 5), 0.9639, 1e-4);
  failed += !Near(NdcgAtK(Ranking({"t1", "t2", "t3"}), ndcg_judged, 5),
                  testing::RefNdcg(Ranking({"t1", "t2", "t3"}), ndcg_judged, 5), 1e-6);
  const QueryJudgments ap_judged = {{"a", 1}, {"c", 2}, {"b", 0}};
  failed += !Near(AveragePrecision(Ranking({"a", "b", "c"}), ap_judged), 5.0 / 6.0, 1e-6);
  const QueryJudgments rr_judged = {{"d", 1}};
  failed += !Near(ReciprocalRank(Ranking({"a", "b", "c", "d"}), rr_judged), 0.25, 1e-6);
  RankedRun run;
  run.Add("q1", Ranking({"d"}));
  run.Add("q2", Ranking({"a", "d"}));
  const QrelsIndex qrels = {{"q1", rr_judged}, {"q2", rr_judged}};
  failed += !Near(MeanReciprocalRank(run, qrels), 0.75, 1e-6);
  failed += !Near(MeanAveragePrecision(run, qrels), 0.75, 1e-6);

  const auto exhaustive = testing::ExhaustiveFourItemCheck();
  std::ostringstream os;
  os << failed << " fixture failures, " << exhaustive.mismatches << "/"
     << exhaustive.cases << " exhaustive mismatches";
  return Check(failed == 0 && exhaustive.mismatches == 0 && exhaustive.cases == 3888,
               os.str());
}

Verdict FusionHeadChecks() {
  std::mt19937_64 rng(2004);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int d = static_cast<int>(UniformBelow(rng, 5));
    const int h = 1 + static_cast<int>(UniformBelow(rng, 6));
    const auto head = testing::RandomHead(rng, d, h);
    const auto sample = testing::RandomSample(rng, d, h, d > 0 && trial % 4 != 0);
    worst = std::max(worst, testing::GradientCheck(head, sample));
  }

  std::mt19937_64 planted_rng(7);
  const auto planted = testing::RandomHead(planted_rng, 2, 3);
  const auto samples = testing::PlantedSamples(planted_rng, planted, 64);
  const auto trained = TrainHead(samples, 2, 3, testing::PlantedTrainConfig());
  const double mse = MeanSquaredError(trained.head, samples);

  int rank_changes = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto head = testing::RandomHead(rng, 3, 4);
    auto shifted = head;
    shifted.b2 += 10 * testing::Gauss(rng);
    std::vector<double> s0, s1;
    for (int i = 0; i < 12; ++i) {
      const auto s = testing::RandomSample(rng, 3, 4, i % 3 != 0);
      s0.push_back(Predict(head, s));
      s1.push_back(Predict(shifted, s));
    }
    auto order = [](const std::vector<double>& v) {
      std::vector<int> idx(v.size());
      std::iota(idx.begin(), idx.end(), 0);
      std::stable_sort(idx.begin(), idx.end(), [&](int x, int y) { return v[x] > v[y]; });
      return idx;
    };
    rank_changes += order(s0) != order(s1);
  }

  std::ostringstream os;
  os << "max gradient rel. err " << worst << ", planted MSE " << mse << " after "
     << trained.steps << " steps, " << rank_changes << "/100 shifted batches reordered";
  return Check(worst <= 1e-4 && trained.steps <= 500 && mse <= 1e-3 && rank_changes == 0,
               os.str());
}

Verdict TTestChecks() {
  const auto main = PairedTTest({1, 2, 3, 4}, {0, 0, 0, 0});
  bool ok = Near(main.t, 3.8730, 1e-3) && Near(main.p, 0.0305, 1e-3) && main.df == 3;
  int failed = 0;
  for (const auto& f : testing::TTestFixtures()) {
    const auto r = PairedTTest(f.a, f.b);
    failed += !(Near(r.t, f.t, 1e-3) && Near(r.p, f.p, 1e-3) && r.df == f.df);
  }
  std::ostringstream os;
  os << "t=" << main.t << " p=" << main.p << " df=" << main.df << ", " << failed << "/"
     << testing::TTestFixtures().size() << " reference fixtures off";
  return Check(ok && failed == 0, os.str());
}

Verdict Determinism() {
  const std::filesystem::path toy = TABSEARCH_TOY_DIR;
  RunConfig config;
  config.tables = toy / "tables.jsonl";
  config.queries = toy / "queries.tsv";
  config.qrels = toy / "qrels.txt";
  config.vocab = toy / "vocab.txt";
  config.vectors = toy / "vectors.vec";
  config.features = toy / "features.csv";
  testing::TempDir a, b;
  const auto ws = LoadWorkspace(config);
  int differing = 0, compared = 0;
  for (auto mode : {SalienceMode::kMax, SalienceMode::kRandom}) {
    config.mode = mode;
    config.out = a.path();
    RunCv(ws, config);
    config.out = b.path();
    RunCv(ws, config);
    const auto tag = config.Tag();
    for (const auto& name : {tag + ".run", tag + ".metrics.tsv", tag + ".metrics.json"}) {
      const auto bytes = testing::ReadFile(a / name);
      differing += bytes.empty() || bytes != testing::ReadFile(b / name);
      ++compared;
    }
  }
  return Check(differing == 0, std::to_string(compared) + " files compared, " +
                                   std::to_string(differing) + " differ");
}

Verdict CorpusStatistics() {
  const char* dir_env = std::getenv("TABSEARCH_WIKITABLES_DIR");
  if (dir_env == nullptr || *dir_env == '\0') {
    return {Outcome::kSkip, "TABSEARCH_WIKITABLES_DIR not set"};
  }
  const std::filesystem::path dir = dir_env;
  const auto tables = LoadTables(dir / "tables.json", TableFormat::kWikiTables);
  const auto queries = LoadQueries(dir / "queries.txt");
  const auto judgments = LoadQrels(dir / "qrels.txt");
  const auto vocab = LoadVocab(dir / "vocab.txt");
  const auto stats = CorpusStats(tables, queries, vocab, &judgments);
  auto within = [](double got, double want) {
    return std::abs(got - want) <= 0.01 * want;
  };
  std::ostringstream os;
  os << "table mean " << stats.table.mean << ", table >128 "
     << 100 * stats.table.fraction_over_128 << "%, query mean " << stats.query.mean;
  return Check(within(stats.table.mean, 549.1) &&
                   within(stats.table.fraction_over_128, 0.653) &&
                   within(stats.query.mean, 3.5),
               os.str());
}

int Run() {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"selector oracle equivalence", SelectorOracle},
      {"packing invariants", PackingInvariants},
      {"metric oracle", MetricOracle},
      {"fusion head", FusionHeadChecks},
      {"paired t-test", TTestChecks},
      {"cv determinism", Determinism},
      {"corpus statistics", CorpusStatistics},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {Outcome::kFail, std::string("exception: ") + e.what()};
    }
    const char* label = v.outcome == Outcome::kPass   ? "PASS"
                        : v.outcome == Outcome::kSkip ? "SKIP"
                                                      : "FAIL";
    failures += v.outcome == Outcome::kFail;
    std::printf("%s criterion %zu (%s): %s\n", label, i + 1, criteria[i].first.c_str(),
                v.detail.c_str());
  }
  return failures == 0 ? 0 : 1;
}

}  // namespace
}  // namespace tabsearch

int main() { return tabsearch::Run(); }
