#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tabsearch/corpus.h"
#include "tabsearch/embed.h"
#include "tabsearch/encoder.h"
#include "tabsearch/eval.h"
#include "tabsearch/fusion.h"
#include "tabsearch/scorer.h"
#include "tabsearch/selector.h"
#include "tabsearch/textproc.h"

namespace tabsearch {

// Failure inside one pipeline stage; what() starts with "[stage] ".
class StageError : public Error {
 public:
  StageError(const std::string& stage, const std::string& message)
      : Error("[" + stage + "] " + message), stage_(stage) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

enum class ScorerKind { kNative, kRemote };

struct RunConfig {
  std::filesystem::path tables;
  TableFormat table_format = TableFormat::kCanonical;
  std::filesystem::path queries;
  std::filesystem::path qrels;
  std::filesystem::path vocab;
  std::filesystem::path vectors;
  std::filesystem::path features;  // optional
  std::filesystem::path cache;     // optional f_bert cache

  // No items at all: context fields and headers only.
  bool text_only = false;
  ItemKind items = ItemKind::kRow;
  SalienceMode mode = SalienceMode::kMax;
  bool headers_in_rows = false;
  PackOptions pack;

  ScorerKind scorer = ScorerKind::kNative;
  std::string endpoint;
  RemoteOptions remote;

  std::size_t folds = 5;
  std::uint64_t seed = 42;
  TrainConfig train;
  GainType gain = GainType::kExponential;
  bool normalize_features = false;
  std::size_t threads = 0;  // 0 = hardware concurrency
  std::filesystem::path out;

  // Method tag such as "row-max", "rand-cell" or "text".
  std::string Tag() const;
  // Throws ValidationError for missing files or inconsistent settings.
  void Validate() const;
};

// Keys mirror the long CLI flags (tables, table_format, items, mode, ...).
// Unknown keys are rejected.
RunConfig RunConfigFromJson(const nlohmann::json& json,
                            RunConfig base = RunConfig{});
nlohmann::json RunConfigToJson(const RunConfig& config);

// Everything a run reads from disk, immutable once loaded.
struct Workspace {
  TableCollection tables;
  std::vector<Query> queries;
  std::map<std::string, Query> query_index;
  std::vector<Judgment> judgments;
  QrelsIndex qrels;
  WordPieceVocab vocab;
  VectorStore store;
  std::optional<FeatureStore> features;

  const Query& FindQuery(const std::string& id) const;
  const Table& FindTable(const std::string& id) const;
  // Every judged (query, table) pair, sorted.
  std::vector<PairKey> JudgedPairs() const;
};

// `need_qrels`/`need_vectors` let subcommands skip inputs they do not use.
Workspace LoadWorkspace(const RunConfig& config, bool need_qrels = true,
                        bool need_vectors = true);

// Items for one pair in packing order (empty in text-only mode).
std::vector<ScoredItem> SelectForPair(const Workspace& ws,
                                      const RunConfig& config,
                                      const PairKey& pair);
PackedInput PackPair(const Workspace& ws, const RunConfig& config,
                     const PairKey& pair);

// Runs fn(i) for i in [0, n) on up to `threads` workers.
void ParallelFor(std::size_t n, std::size_t threads,
                 const std::function<void(std::size_t)>& fn);

// Per-pair scorer features: the native scorer contributes a one-component
// vector holding its score; the remote scorer returns the service's f_bert.
// With a cache path, cached vectors are reused and new ones appended.
FeatureCache ComputeScorerFeatures(const Workspace& ws, const RunConfig& config,
                                   const std::vector<PairKey>& pairs);

// Raw scorer scores, without a fusion head.
RankedRun ScorePairs(const Workspace& ws, const RunConfig& config,
                     const std::vector<PairKey>& pairs);

std::vector<FusionSample<double>> BuildSamples(
    const Workspace& ws, const FeatureCache& scorer_features,
    const std::vector<PairKey>& pairs, const FeatureStore* features);

struct CvResult {
  std::vector<std::vector<std::string>> folds;
  RankedRun run;
  MetricReport report;
};

// For each fold: train the fusion head on the other folds' pairs, score the
// fold's pairs, and collect the fold's rankings. Writes fold-<i>.run,
// <tag>.run, <tag>.metrics.tsv, <tag>.metrics.json and config.json under
// config.out when it is set.
CvResult RunCv(const Workspace& ws, const RunConfig& config);

}  // namespace tabsearch
