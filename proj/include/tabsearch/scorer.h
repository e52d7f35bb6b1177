#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "tabsearch/corpus.h"
#include "tabsearch/embed.h"
#include "tabsearch/encoder.h"
#include "tabsearch/error.h"

namespace tabsearch {

// Cosine between the mean word vector of the query and that of the packed
// input's non-special tokens (WordPiece pieces re-joined, then
// simple-tokenized).
double ScoreNative(const PackedInput& packed, const Query& query,
                   const VectorStore& store);

// ---------------------------------------------------------------------------
// Remote scorer wire protocol
//
//   GET  /info      -> {"hidden_size": h, "model_tag": "...", "max_len": n}
//                      (optional "max_batch")
//   POST /score     {"pairs": [{"key", "tokens", "ids", "segments"}, ...]}
//                -> {"pairs": [{"key", "score"}, ...]}
//   POST /features  same request
//                -> {"pairs": [{"key", "score", "f_bert": [h reals]}, ...]}
// ---------------------------------------------------------------------------

struct ServiceInfo {
  int hidden_size = 0;
  std::string model_tag;
  int max_len = 0;
  int max_batch = 0;  // 0 when the service does not advertise one
};

struct ScoreRequestItem {
  std::string key;
  PackedInput packed;
  std::optional<Eigen::VectorXd> features;  // kept client-side, not sent
};

struct ScoreRequest {
  std::vector<ScoreRequestItem> pairs;
};

struct PairScore {
  double score = 0.0;
  std::optional<Eigen::VectorXd> f_bert;
};

struct ScoreResponse {
  std::map<std::string, PairScore> pairs;
};

// Service unreachable after all retries.
class ConnectionError : public Error {
 public:
  using Error::Error;
};

// Response body does not follow the protocol (bad JSON, missing or extra
// keys, non-finite values, HTTP 4xx).
class ProtocolError : public Error {
 public:
  using Error::Error;
};

// f_bert width differs from the handshake's hidden_size.
class HiddenSizeMismatch : public Error {
 public:
  using Error::Error;
};

struct RemoteOptions {
  std::size_t batch_size = 8;
  std::size_t max_in_flight = 4;
  int attempts = 3;
  std::chrono::milliseconds initial_backoff{100};
  std::chrono::seconds timeout{60};
};

class RemoteScorer {
 public:
  // `endpoint` is "http://host:port". The handshake happens here.
  explicit RemoteScorer(std::string endpoint, RemoteOptions options = {});

  const ServiceInfo& info() const { return info_; }

  // Splits into sub-batches of at most min(batch_size, max_batch), runs up to
  // max_in_flight of them concurrently and merges replies by key.
  ScoreResponse Score(const ScoreRequest& request, bool with_features) const;

 private:
  ScoreResponse SendBatch(const std::vector<const ScoreRequestItem*>& batch,
                          bool with_features) const;
  std::string Post(const std::string& path, const std::string& body) const;

  std::string endpoint_;
  RemoteOptions options_;
  ServiceInfo info_;
};

nlohmann::json EncodeScoreRequest(
    const std::vector<const ScoreRequestItem*>& batch);
ServiceInfo ParseServiceInfo(const nlohmann::json& body);

// ---------------------------------------------------------------------------
// f_bert cache
//
// Binary, little-endian:
//   "TSFB" | u32 version=1 | u32 h | u64 count |
//   count x (u32 len, qid bytes, u32 len, table id bytes, h x f64) |
//   u32 crc32 of everything before it
// ---------------------------------------------------------------------------

class FeatureCache {
 public:
  explicit FeatureCache(int hidden_size) : hidden_size_(hidden_size) {}

  int hidden_size() const { return hidden_size_; }
  std::size_t size() const { return vectors_.size(); }

  void Insert(const PairKey& key, Eigen::VectorXd f_bert);
  const Eigen::VectorXd* Find(const PairKey& key) const;
  const std::map<PairKey, Eigen::VectorXd>& entries() const { return vectors_; }

  // Keys among `wanted` not present in the cache, in input order.
  std::vector<PairKey> Missing(const std::vector<PairKey>& wanted) const;

  void Save(const std::filesystem::path& path) const;

  // Throws ParseError on checksum or layout failure, DimensionError when
  // `expected_hidden_size` > 0 and differs from the file.
  static FeatureCache Load(const std::filesystem::path& path,
                           int expected_hidden_size = 0);

 private:
  int hidden_size_;
  std::map<PairKey, Eigen::VectorXd> vectors_;
};

}  // namespace tabsearch
