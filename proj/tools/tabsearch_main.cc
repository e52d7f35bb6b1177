// tabsearch: command-line driver for table retrieval experiments.

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "tabsearch/pipeline.h"

namespace {

using nlohmann::json;
using namespace tabsearch;

// Flags shared by every subcommand that touches the corpus. Each flag, when
// given, overrides the matching key of the --config file.
struct CommonFlags {
  std::string config_path;
  std::string tables, table_format, queries, qrels, vocab, vectors, features,
      cache, items, mode, budgets, scorer, endpoint, gain, out;
  bool text_only = false;
  bool headers_in_rows = false;
  bool normalize_features = false;
  bool no_decay = false;
  std::size_t max_len = 0, folds = 0, threads = 0, batch_size = 0;
  std::uint64_t seed = 0;
  int epochs = 0, train_batch_size = 0;
  double lr = 0.0, warmup = 0.0;

  std::vector<std::pair<std::string, CLI::Option*>> options;

  void Register(CLI::App* app, bool with_out = true) {
    app->add_option("--config", config_path, "JSON run config; flags override it");
    auto add = [&](const char* flag, const char* key, auto& target,
                   const char* help) {
      options.emplace_back(key, app->add_option(flag, target, help));
    };
    add("--tables", "tables", tables, "table file");
    add("--table-format", "table_format", table_format,
        "canonical | wikitables | webquerytable");
    add("--queries", "queries", queries, "queries TSV (id<TAB>text)");
    add("--qrels", "qrels", qrels, "qrels file (qid 0 table_id grade)");
    add("--vocab", "vocab", vocab, "WordPiece vocabulary");
    add("--vectors", "vectors", vectors, "fastText text vectors");
    add("--features", "features", features, "additional features CSV");
    add("--cache", "cache", cache, "f_bert cache file");
    add("--items", "items", items, "row | col | cell");
    add("--mode", "mode", mode, "mean | sum | max | random");
    add("--budgets", "budgets", budgets,
        "caption,section_title,page_title,headers token budgets");
    add("--max-len", "max_len", max_len, "packed input length cap");
    add("--scorer", "scorer", scorer, "native | remote");
    add("--endpoint", "endpoint", endpoint, "remote scorer, http://host:port");
    add("--batch-size", "batch_size", batch_size, "remote request batch size");
    add("--folds", "folds", folds, "cross-validation folds");
    add("--seed", "seed", seed, "run seed");
    add("--epochs", "epochs", epochs, "fusion head epochs");
    add("--train-batch-size", "train_batch_size", train_batch_size,
        "fusion head mini-batch size");
    add("--lr", "lr", lr, "fusion head learning rate");
    add("--warmup", "warmup", warmup, "warm-up fraction of training steps");
    add("--gain", "gain", gain, "NDCG gain: exp | linear");
    add("--threads", "threads", threads, "worker threads (0 = all cores)");
    if (with_out) add("--out", "out", out, "output path");
    options.emplace_back("text_only",
                         app->add_flag("--text-only", text_only,
                                       "pack context fields only, no items"));
    options.emplace_back("headers_in_rows",
                         app->add_flag("--headers-in-rows", headers_in_rows,
                                       "include header cells in row items"));
    options.emplace_back("normalize_features",
                         app->add_flag("--normalize-features", normalize_features,
                                       "z-score additional features per fold"));
    options.emplace_back("linear_decay",
                         app->add_flag("--no-decay", no_decay,
                                       "constant learning rate after warm-up"));
  }

  json Overrides() const {
    json j = json::object();
    for (const auto& [key, opt] : options) {
      if (opt->count() == 0) continue;
      if (key == "text_only") j[key] = text_only;
      else if (key == "headers_in_rows") j[key] = headers_in_rows;
      else if (key == "normalize_features") j[key] = normalize_features;
      else if (key == "linear_decay") j[key] = !no_decay;
      else if (key == "max_len") j[key] = max_len;
      else if (key == "folds") j[key] = folds;
      else if (key == "threads") j[key] = threads;
      else if (key == "batch_size") j[key] = batch_size;
      else if (key == "seed") j[key] = seed;
      else if (key == "epochs") j[key] = epochs;
      else if (key == "train_batch_size") j[key] = train_batch_size;
      else if (key == "lr") j[key] = lr;
      else if (key == "warmup") j[key] = warmup;
      else j[key] = opt->as<std::string>();
    }
    return j;
  }

  RunConfig Build() const {
    RunConfig config;
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw IoError("cannot open config " + config_path);
      json file = json::parse(in);
      config = RunConfigFromJson(file);
      // Paths in a config file are relative to the file.
      const auto base = std::filesystem::path(config_path).parent_path();
      for (auto* p : {&config.tables, &config.queries, &config.qrels,
                      &config.vocab, &config.vectors, &config.features,
                      &config.cache, &config.out}) {
        if (!p->empty() && p->is_relative()) *p = base / *p;
      }
    }
    return RunConfigFromJson(Overrides(), config);
  }
};

void EmitText(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << text;
}

std::vector<PairKey> FilterPairs(const Workspace& ws, const std::string& qid,
                                 const std::string& tid) {
  std::vector<PairKey> pairs;
  if (!qid.empty() && !tid.empty()) {
    ws.FindQuery(qid);
    ws.FindTable(tid);
    return {{qid, tid}};
  }
  for (auto& key : ws.JudgedPairs()) {
    if ((qid.empty() || key.query_id == qid) &&
        (tid.empty() || key.table_id == tid)) {
      pairs.push_back(std::move(key));
    }
  }
  return pairs;
}

std::string FormatStatsRow(const std::string& name, const LengthStats& s) {
  std::ostringstream out;
  out << std::left << std::setw(14) << name << std::right << std::fixed
      << std::setprecision(1) << std::setw(10) << s.mean << std::setw(10)
      << s.max << std::setprecision(3) << std::setw(10)
      << 100.0 * s.fraction_over_512 << "%" << std::setw(9)
      << 100.0 * s.fraction_over_128 << "%\n";
  return out.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Table retrieval with content selection and neural scoring"};
  app.require_subcommand(1);

  CommonFlags stats_flags, select_flags, encode_flags, score_flags, train_flags,
      cv_flags;

  auto* stats = app.add_subcommand("stats", "WordPiece length statistics");
  stats_flags.Register(stats, false);
  bool stats_pairs = false;
  stats->add_flag("--pairs", stats_pairs,
                  "take table statistics over judged pairs (needs --qrels)");

  std::string select_qid, select_tid;
  auto* select = app.add_subcommand("select", "dump salience-ordered items");
  select_flags.Register(select);
  select->add_option("--query-id", select_qid, "restrict to one query");
  select->add_option("--table-id", select_tid, "restrict to one table");

  std::string encode_qid, encode_tid;
  auto* encode = app.add_subcommand("encode", "write packed scorer inputs");
  encode_flags.Register(encode);
  encode->add_option("--query-id", encode_qid, "restrict to one query");
  encode->add_option("--table-id", encode_tid, "restrict to one table");

  auto* score = app.add_subcommand("score", "score judged pairs into a run file");
  score_flags.Register(score);

  auto* train = app.add_subcommand("train-head",
                                   "train the fusion head on scorer features");
  train_flags.Register(train);

  auto* cv = app.add_subcommand("cv", "cross-validated evaluation");
  cv_flags.Register(cv);

  std::string report_a, report_b;
  auto* compare = app.add_subcommand("compare", "paired t-test of two reports");
  compare->add_option("report_a", report_a, "metrics TSV")->required();
  compare->add_option("report_b", report_b, "metrics TSV")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (stats->parsed()) {
      const RunConfig config = stats_flags.Build();
      const Workspace ws = LoadWorkspace(config, stats_pairs, false);
      const FieldStats fs = CorpusStats(ws.tables, ws.queries, ws.vocab,
                                        stats_pairs ? &ws.judgments : nullptr);
      std::cout << std::left << std::setw(14) << "field" << std::right
                << std::setw(10) << "mean" << std::setw(10) << "max"
                << std::setw(11) << "> 512" << std::setw(10) << "> 128\n";
      std::cout << FormatStatsRow("query", fs.query)
                << FormatStatsRow("caption", fs.caption)
                << FormatStatsRow("page title", fs.page_title)
                << FormatStatsRow("section title", fs.section_title)
                << FormatStatsRow("header", fs.header)
                << FormatStatsRow("table", fs.table)
                << FormatStatsRow("all", fs.all);
      const auto& diag = ws.tables.diagnostics();
      std::cerr << ws.tables.size() << " tables (" << diag.padded_rows
                << " rows padded, " << diag.truncated_rows << " truncated, "
                << diag.skipped.size() << " records skipped)\n";
      return 0;
    }

    if (select->parsed()) {
      const RunConfig config = select_flags.Build();
      const Workspace ws = LoadWorkspace(config, select_qid.empty() || select_tid.empty());
      std::string text;
      for (const auto& pair : FilterPairs(ws, select_qid, select_tid)) {
        for (const auto& s : SelectForPair(ws, config, pair)) {
          json record = {{"qid", pair.query_id},
                         {"table_id", pair.table_id},
                         {"kind", ToString(s.item.kind)},
                         {"origin", {s.item.origin.row, s.item.origin.column}},
                         {"score", s.salience},
                         {"raw_text", s.item.raw_text}};
          text += record.dump() + "\n";
        }
      }
      EmitText(config.out.string(), text);
      return 0;
    }

    if (encode->parsed()) {
      const RunConfig config = encode_flags.Build();
      const Workspace ws = LoadWorkspace(config, encode_qid.empty() || encode_tid.empty());
      std::string text;
      for (const auto& pair : FilterPairs(ws, encode_qid, encode_tid)) {
        json record = Render(PackPair(ws, config, pair));
        record["key"] = pair.query_id + "\t" + pair.table_id;
        text += record.dump() + "\n";
      }
      EmitText(config.out.string(), text);
      return 0;
    }

    if (score->parsed()) {
      const RunConfig config = score_flags.Build();
      config.Validate();
      const Workspace ws = LoadWorkspace(config);
      const auto pairs = ws.JudgedPairs();
      const RankedRun run = ScorePairs(ws, config, pairs);
      if (config.scorer == ScorerKind::kRemote && !config.cache.empty()) {
        ComputeScorerFeatures(ws, config, pairs);
      }
      EmitText(config.out.string(), FormatRun(run, config.Tag()));
      const MetricReport report = Evaluate(run, ws.qrels, config.gain);
      std::cerr << "MAP " << report.map() << "  MRR " << report.mrr() << "\n";
      return 0;
    }

    if (train->parsed()) {
      const RunConfig config = train_flags.Build();
      config.Validate();
      if (config.out.empty()) throw ValidationError("train-head needs --out");
      const Workspace ws = LoadWorkspace(config);
      const auto pairs = ws.JudgedPairs();
      const FeatureCache cache = ComputeScorerFeatures(ws, config, pairs);
      const FeatureStore* features = ws.features ? &*ws.features : nullptr;
      auto samples = BuildSamples(ws, cache, pairs, features);
      int d = features ? features->dimension() : 0;
      if (d > 0 && std::any_of(samples.begin(), samples.end(),
                               [](const auto& s) { return !s.features; })) {
        std::cerr << "warning: some pairs lack features; training a BERT-only head\n";
        for (auto& s : samples) s.features.reset();
        d = 0;
      }
      TrainConfig tc = config.train;
      tc.seed = config.seed;
      const auto result = TrainHead(samples, d, cache.hidden_size(), tc);
      SaveHead(result.head, config.out);
      std::cerr << "trained " << result.steps << " steps, training MSE "
                << MeanSquaredError(result.head, samples) << "\n";
      return 0;
    }

    if (cv->parsed()) {
      const RunConfig config = cv_flags.Build();
      config.Validate();
      const Workspace ws = LoadWorkspace(config);
      const CvResult result = RunCv(ws, config);
      const auto means = result.report.Aggregate();
      for (std::size_t m = 0; m < kNumMetrics; ++m) {
        std::cout << MetricNames()[m] << "\t" << std::fixed
                  << std::setprecision(4) << means[m] << "\n";
      }
      return 0;
    }

    if (compare->parsed()) {
      const auto rows = Compare(ReadReport(report_a), ReadReport(report_b));
      std::cout << FormatComparison(rows);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
