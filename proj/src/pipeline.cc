#include "tabsearch/pipeline.h"

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <iostream>
#include <mutex>
#include <set>
#include <thread>

#include "tabsearch/random.h"

namespace tabsearch {
namespace {

using nlohmann::json;

template <typename Fn>
auto InStage(const std::string& stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
}

void RequireFile(const std::filesystem::path& path, const char* what) {
  if (path.empty()) {
    throw ValidationError(std::string("missing path for ") + what);
  }
  if (!std::filesystem::is_regular_file(path)) {
    throw ValidationError(std::string(what) + " file not found: " +
                          path.string());
  }
}

std::string FormatName(TableFormat f) {
  switch (f) {
    case TableFormat::kCanonical: return "canonical";
    case TableFormat::kWikiTables: return "wikitables";
    case TableFormat::kWebQueryTable: return "webquerytable";
  }
  return "canonical";
}

std::string KeyString(const PairKey& key) {
  return key.query_id + "\t" + key.table_id;
}

void WriteText(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

// Z-scores feature columns with statistics of the training samples.
void StandardizeFeatures(std::vector<FusionSample<double>>& train,
                         std::vector<FusionSample<double>>& test, int dim) {
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
  Eigen::VectorXd sq = Eigen::VectorXd::Zero(dim);
  std::size_t n = 0;
  for (const auto& s : train) {
    if (!s.features) continue;
    mean += *s.features;
    sq += s.features->cwiseAbs2();
    ++n;
  }
  if (n == 0) return;
  mean /= static_cast<double>(n);
  Eigen::VectorXd sd =
      (sq / static_cast<double>(n) - mean.cwiseAbs2()).cwiseMax(0.0).cwiseSqrt();
  for (Eigen::Index i = 0; i < dim; ++i) {
    if (sd[i] == 0.0) sd[i] = 1.0;
  }
  auto apply = [&](std::vector<FusionSample<double>>& samples) {
    for (auto& s : samples) {
      if (s.features) *s.features = (*s.features - mean).cwiseQuotient(sd);
    }
  };
  apply(train);
  apply(test);
}

}  // namespace

std::string RunConfig::Tag() const {
  if (text_only) return "text";
  if (mode == SalienceMode::kRandom) return "rand-" + ToString(items);
  return ToString(items) + "-" + ToString(mode);
}

void RunConfig::Validate() const {
  RequireFile(tables, "tables");
  RequireFile(queries, "queries");
  RequireFile(vocab, "vocab");
  RequireFile(vectors, "vectors");
  if (!features.empty()) RequireFile(features, "features");
  pack.budgets.Validate();
  if (scorer == ScorerKind::kRemote && endpoint.empty()) {
    throw ValidationError("remote scorer needs an endpoint");
  }
  if (folds == 0) throw ValidationError("folds must be >= 1");
  train.Validate();
}

RunConfig RunConfigFromJson(const json& j, RunConfig c) {
  if (!j.is_object()) throw ParseError("run config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "tables") c.tables = value.get<std::string>();
      else if (key == "table_format") c.table_format = ParseTableFormat(value.get<std::string>());
      else if (key == "queries") c.queries = value.get<std::string>();
      else if (key == "qrels") c.qrels = value.get<std::string>();
      else if (key == "vocab") c.vocab = value.get<std::string>();
      else if (key == "vectors") c.vectors = value.get<std::string>();
      else if (key == "features") c.features = value.get<std::string>();
      else if (key == "cache") c.cache = value.get<std::string>();
      else if (key == "text_only") c.text_only = value.get<bool>();
      else if (key == "items") c.items = ParseItemKind(value.get<std::string>());
      else if (key == "mode") c.mode = ParseSalienceMode(value.get<std::string>());
      else if (key == "headers_in_rows") c.headers_in_rows = value.get<bool>();
      else if (key == "budgets") c.pack.budgets = ParseBudgets(value.get<std::string>(), c.pack.budgets.max_len);
      else if (key == "max_len") c.pack.budgets.max_len = value.get<std::size_t>();
      else if (key == "frame_segment") c.pack.frame_segment = value.get<std::string>() == "B" ? Segment::kB : Segment::kA;
      else if (key == "scorer") {
        const auto s = value.get<std::string>();
        if (s == "native") c.scorer = ScorerKind::kNative;
        else if (s == "remote") c.scorer = ScorerKind::kRemote;
        else throw ValidationError("scorer must be native or remote");
      }
      else if (key == "endpoint") c.endpoint = value.get<std::string>();
      else if (key == "batch_size") c.remote.batch_size = value.get<std::size_t>();
      else if (key == "max_in_flight") c.remote.max_in_flight = value.get<std::size_t>();
      else if (key == "folds") c.folds = value.get<std::size_t>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "epochs") c.train.epochs = value.get<int>();
      else if (key == "train_batch_size") c.train.batch_size = value.get<int>();
      else if (key == "lr") c.train.learning_rate = value.get<double>();
      else if (key == "warmup") c.train.warmup_fraction = value.get<double>();
      else if (key == "linear_decay") c.train.linear_decay = value.get<bool>();
      else if (key == "gain") {
        const auto g = value.get<std::string>();
        if (g == "exp" || g == "exponential") c.gain = GainType::kExponential;
        else if (g == "linear") c.gain = GainType::kLinear;
        else throw ValidationError("gain must be exp or linear");
      }
      else if (key == "normalize_features") c.normalize_features = value.get<bool>();
      else if (key == "threads") c.threads = value.get<std::size_t>();
      else if (key == "out") c.out = value.get<std::string>();
      else throw ValidationError("unknown config key '" + key + "'");
    } catch (const json::exception& e) {
      throw ParseError("config key '" + key + "': " + e.what());
    }
  }
  return c;
}

json RunConfigToJson(const RunConfig& c) {
  const Budgets& b = c.pack.budgets;
  json j = {
      {"tables", c.tables.string()},
      {"table_format", FormatName(c.table_format)},
      {"queries", c.queries.string()},
      {"qrels", c.qrels.string()},
      {"vocab", c.vocab.string()},
      {"vectors", c.vectors.string()},
      {"features", c.features.string()},
      {"cache", c.cache.string()},
      {"text_only", c.text_only},
      {"items", ToString(c.items)},
      {"mode", ToString(c.mode)},
      {"headers_in_rows", c.headers_in_rows},
      {"budgets", std::to_string(b.caption) + "," + std::to_string(b.section_title) +
                      "," + std::to_string(b.page_title) + "," +
                      std::to_string(b.headers)},
      {"max_len", b.max_len},
      {"frame_segment", c.pack.frame_segment == Segment::kA ? "A" : "B"},
      {"scorer", c.scorer == ScorerKind::kNative ? "native" : "remote"},
      {"endpoint", c.endpoint},
      {"batch_size", c.remote.batch_size},
      {"max_in_flight", c.remote.max_in_flight},
      {"folds", c.folds},
      {"seed", c.seed},
      {"epochs", c.train.epochs},
      {"train_batch_size", c.train.batch_size},
      {"lr", c.train.learning_rate},
      {"warmup", c.train.warmup_fraction},
      {"linear_decay", c.train.linear_decay},
      {"gain", c.gain == GainType::kExponential ? "exp" : "linear"},
      {"normalize_features", c.normalize_features},
      {"threads", c.threads},
      {"out", c.out.string()},
  };
  return j;
}

const Query& Workspace::FindQuery(const std::string& id) const {
  const auto it = query_index.find(id);
  if (it == query_index.end()) throw ValidationError("unknown query '" + id + "'");
  return it->second;
}

const Table& Workspace::FindTable(const std::string& id) const {
  const Table* t = tables.Find(id);
  if (t == nullptr) throw ValidationError("unknown table '" + id + "'");
  return *t;
}

std::vector<PairKey> Workspace::JudgedPairs() const {
  std::vector<PairKey> pairs;
  for (const auto& [qid, tables_for_query] : qrels) {
    for (const auto& [tid, grade] : tables_for_query) pairs.push_back({qid, tid});
  }
  return pairs;
}

Workspace LoadWorkspace(const RunConfig& config, bool need_qrels,
                        bool need_vectors) {
  return InStage("load", [&] {
    Workspace ws;
    ws.tables = LoadTables(config.tables, config.table_format);
    ws.queries = LoadQueries(config.queries);
    for (const auto& q : ws.queries) ws.query_index.emplace(q.id, q);
    ws.vocab = LoadVocab(config.vocab);
    if (need_vectors) ws.store = LoadVectors(config.vectors);
    if (need_qrels) {
      if (config.qrels.empty()) throw ValidationError("missing path for qrels");
      ws.judgments = LoadQrels(config.qrels);
      ws.qrels = IndexQrels(ws.judgments);
      for (const auto& j : ws.judgments) {
        ws.FindQuery(j.query_id);
        ws.FindTable(j.table_id);
      }
    }
    if (!config.features.empty()) ws.features = LoadFeatures(config.features);
    return ws;
  });
}

std::vector<ScoredItem> SelectForPair(const Workspace& ws,
                                      const RunConfig& config,
                                      const PairKey& pair) {
  if (config.text_only) return {};
  SliceOptions options;
  options.headers_in_rows = config.headers_in_rows;
  return SelectScored(ws.FindTable(pair.table_id), ws.FindQuery(pair.query_id),
                      config.mode, config.items, ws.store,
                      PairSeed(config.seed, pair.query_id, pair.table_id),
                      options);
}

PackedInput PackPair(const Workspace& ws, const RunConfig& config,
                     const PairKey& pair) {
  std::vector<TableItem> items;
  for (auto& scored : SelectForPair(ws, config, pair)) {
    items.push_back(std::move(scored.item));
  }
  return Pack(ws.FindQuery(pair.query_id), ws.FindTable(pair.table_id), items,
              ws.vocab, config.pack);
}

void ParallelFor(std::size_t n, std::size_t threads,
                 const std::function<void(std::size_t)>& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, n);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mutex);
        if (!failure) failure = std::current_exception();
        next.store(n);
        return;
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
    if (threads > 0) worker();
  }
  if (failure) std::rethrow_exception(failure);
}

FeatureCache ComputeScorerFeatures(const Workspace& ws, const RunConfig& config,
                                   const std::vector<PairKey>& pairs) {
  if (config.scorer == ScorerKind::kNative) {
    return InStage("score", [&] {
      std::vector<double> scores(pairs.size());
      ParallelFor(pairs.size(), config.threads, [&](std::size_t i) {
        scores[i] = ScoreNative(PackPair(ws, config, pairs[i]),
                                ws.FindQuery(pairs[i].query_id), ws.store);
      });
      FeatureCache cache(1);
      for (std::size_t i = 0; i < pairs.size(); ++i) {
        cache.Insert(pairs[i], Eigen::VectorXd::Constant(1, scores[i]));
      }
      return cache;
    });
  }

  const RemoteScorer remote =
      InStage("connect", [&] { return RemoteScorer(config.endpoint, config.remote); });
  const int h = remote.info().hidden_size;
  FeatureCache cache = InStage("cache", [&] {
    if (!config.cache.empty() && std::filesystem::exists(config.cache)) {
      return FeatureCache::Load(config.cache, h);
    }
    return FeatureCache(h);
  });
  const std::vector<PairKey> missing = cache.Missing(pairs);
  if (!missing.empty()) {
    ScoreRequest request;
    request.pairs.resize(missing.size());
    InStage("encode", [&] {
      ParallelFor(missing.size(), config.threads, [&](std::size_t i) {
        request.pairs[i].key = KeyString(missing[i]);
        request.pairs[i].packed = PackPair(ws, config, missing[i]);
      });
      return 0;
    });
    const ScoreResponse response =
        InStage("score", [&] { return remote.Score(request, true); });
    for (const auto& key : missing) {
      cache.Insert(key, *response.pairs.at(KeyString(key)).f_bert);
    }
    if (!config.cache.empty()) {
      InStage("cache", [&] {
        cache.Save(config.cache);
        return 0;
      });
    }
  }
  return cache;
}

RankedRun ScorePairs(const Workspace& ws, const RunConfig& config,
                     const std::vector<PairKey>& pairs) {
  std::vector<double> scores(pairs.size());
  if (config.scorer == ScorerKind::kNative) {
    InStage("score", [&] {
      ParallelFor(pairs.size(), config.threads, [&](std::size_t i) {
        scores[i] = ScoreNative(PackPair(ws, config, pairs[i]),
                                ws.FindQuery(pairs[i].query_id), ws.store);
      });
      return 0;
    });
  } else {
    const RemoteScorer remote = InStage(
        "connect", [&] { return RemoteScorer(config.endpoint, config.remote); });
    ScoreRequest request;
    request.pairs.resize(pairs.size());
    InStage("encode", [&] {
      ParallelFor(pairs.size(), config.threads, [&](std::size_t i) {
        request.pairs[i].key = KeyString(pairs[i]);
        request.pairs[i].packed = PackPair(ws, config, pairs[i]);
      });
      return 0;
    });
    const ScoreResponse response =
        InStage("score", [&] { return remote.Score(request, false); });
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      scores[i] = response.pairs.at(KeyString(pairs[i])).score;
    }
  }
  std::map<std::string, std::vector<RankedEntry>> grouped;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    grouped[pairs[i].query_id].push_back({pairs[i].table_id, scores[i]});
  }
  RankedRun run;
  for (auto& [qid, entries] : grouped) run.Add(qid, std::move(entries));
  return run;
}

std::vector<FusionSample<double>> BuildSamples(
    const Workspace& ws, const FeatureCache& scorer_features,
    const std::vector<PairKey>& pairs, const FeatureStore* features) {
  std::vector<FusionSample<double>> samples;
  samples.reserve(pairs.size());
  for (const auto& key : pairs) {
    const Eigen::VectorXd* f_bert = scorer_features.Find(key);
    if (f_bert == nullptr) {
      throw ValidationError("no scorer features for (" + key.query_id + ", " +
                            key.table_id + ")");
    }
    FusionSample<double> s;
    s.f_bert = *f_bert;
    if (features != nullptr) s.features = features->Lookup(key);
    const auto q = ws.qrels.find(key.query_id);
    if (q != ws.qrels.end()) {
      const auto g = q->second.find(key.table_id);
      if (g != q->second.end()) s.target = static_cast<double>(g->second);
    }
    samples.push_back(std::move(s));
  }
  return samples;
}

CvResult RunCv(const Workspace& ws, const RunConfig& config) {
  CvResult result;
  const std::vector<PairKey> pairs = ws.JudgedPairs();
  std::vector<std::string> query_ids;
  for (const auto& [qid, judged] : ws.qrels) query_ids.push_back(qid);

  result.folds = InStage("split", [&] {
    return KFoldSplit(query_ids, config.folds, config.seed);
  });
  const FeatureCache scorer_features = ComputeScorerFeatures(ws, config, pairs);
  const FeatureStore* features = ws.features ? &*ws.features : nullptr;
  const int d = features ? features->dimension() : 0;
  const int h = scorer_features.hidden_size();

  if (!config.out.empty()) std::filesystem::create_directories(config.out);

  std::map<std::string, std::vector<RankedEntry>> combined;
  for (std::size_t f = 0; f < result.folds.size(); ++f) {
    const std::string stage = "fold " + std::to_string(f);
    InStage(stage, [&] {
      const std::set<std::string> test_queries(result.folds[f].begin(),
                                               result.folds[f].end());
      std::vector<PairKey> train_pairs, test_pairs;
      for (const auto& key : pairs) {
        (test_queries.count(key.query_id) ? test_pairs : train_pairs).push_back(key);
      }
      auto train = BuildSamples(ws, scorer_features, train_pairs, features);
      auto test = BuildSamples(ws, scorer_features, test_pairs, features);
      if (config.normalize_features && d > 0) StandardizeFeatures(train, test, d);

      TrainConfig train_config = config.train;
      train_config.seed = Fnv1a("fold-" + std::to_string(f), config.seed);

      std::vector<FusionSample<double>> hybrid_train;
      for (const auto& s : train) {
        if (s.features) hybrid_train.push_back(s);
      }
      const bool any_test_without = std::any_of(
          test.begin(), test.end(), [](const auto& s) { return !s.features; });

      std::optional<FusionHead<double>> hybrid, bert_only;
      if (d > 0 && !hybrid_train.empty()) {
        hybrid = TrainHead(hybrid_train, d, h, train_config).head;
      }
      if (!hybrid || any_test_without) {
        std::vector<FusionSample<double>> plain = train;
        for (auto& s : plain) s.features.reset();
        if (plain.empty()) throw ValidationError("fold has no training pairs");
        bert_only = TrainHead(plain, 0, h, train_config).head;
      }

      RankedRun fold_run;
      std::map<std::string, std::vector<RankedEntry>> grouped;
      for (std::size_t i = 0; i < test_pairs.size(); ++i) {
        const auto& s = test[i];
        const double score = (s.features && hybrid)
                                 ? FuseScore(*hybrid, s.f_bert, *s.features)
                                 : FuseScore(*bert_only, s.f_bert);
        grouped[test_pairs[i].query_id].push_back(
            {test_pairs[i].table_id, score});
      }
      for (auto& [qid, entries] : grouped) {
        combined[qid] = entries;
        fold_run.Add(qid, std::move(entries));
      }
      if (!config.out.empty()) {
        WriteRunFile(fold_run, config.Tag(),
                     config.out / ("fold-" + std::to_string(f) + ".run"));
        if (hybrid) {
          SaveHead(*hybrid, config.out / ("fold-" + std::to_string(f) + ".head"));
        }
        if (bert_only) {
          SaveHead(*bert_only,
                   config.out / ("fold-" + std::to_string(f) + ".bert.head"));
        }
      }
      return 0;
    });
  }

  for (auto& [qid, entries] : combined) result.run.Add(qid, std::move(entries));
  result.report = Evaluate(result.run, ws.qrels, config.gain);

  if (!config.out.empty()) {
    InStage("write", [&] {
      const std::string tag = config.Tag();
      WriteRunFile(result.run, tag, config.out / (tag + ".run"));
      WriteReport(result.report, config.out / (tag + ".metrics.tsv"));
      WriteText(config.out / (tag + ".metrics.json"), ReportToJson(result.report));
      WriteText(config.out / "config.json", RunConfigToJson(config).dump(2) + "\n");
      return 0;
    });
  }
  return result;
}

}  // namespace tabsearch
