// Eigen must come before httplib: <resolv.h> defines a `_res` macro that
// collides with Eigen parameter names.
#include "tabsearch/scorer.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <set>
#include <thread>

#include <httplib.h>

namespace tabsearch {
namespace {

using nlohmann::json;

bool IsServerError(int status) { return status >= 500; }

}  // namespace

nlohmann::json EncodeScoreRequest(
    const std::vector<const ScoreRequestItem*>& batch) {
  json pairs = json::array();
  for (const ScoreRequestItem* item : batch) {
    json record = Render(item->packed);
    record["key"] = item->key;
    pairs.push_back(std::move(record));
  }
  return {{"pairs", std::move(pairs)}};
}

ServiceInfo ParseServiceInfo(const nlohmann::json& body) {
  ServiceInfo info;
  try {
    info.hidden_size = body.at("hidden_size").get<int>();
    info.model_tag = body.at("model_tag").get<std::string>();
    info.max_len = body.at("max_len").get<int>();
    if (body.contains("max_batch")) info.max_batch = body["max_batch"].get<int>();
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("malformed /info response: ") + e.what());
  }
  if (info.hidden_size <= 0 || info.max_len <= 0 || info.max_batch < 0) {
    throw ProtocolError("/info reports non-positive sizes");
  }
  return info;
}

RemoteScorer::RemoteScorer(std::string endpoint, RemoteOptions options)
    : endpoint_(std::move(endpoint)), options_(options) {
  if (options_.batch_size == 0 || options_.max_in_flight == 0 ||
      options_.attempts < 1) {
    throw ValidationError("remote scorer: batch size, in-flight cap and "
                          "attempts must be positive");
  }
  std::string body;
  for (int attempt = 0;; ++attempt) {
    httplib::Client client(endpoint_);
    client.set_connection_timeout(options_.timeout);
    client.set_read_timeout(options_.timeout);
    auto res = client.Get("/info");
    if (res && res->status == 200) {
      body = res->body;
      break;
    }
    if (res && !IsServerError(res->status)) {
      throw ProtocolError("GET /info returned HTTP " +
                          std::to_string(res->status));
    }
    if (attempt + 1 >= options_.attempts) {
      throw ConnectionError("cannot reach scorer service at " + endpoint_ +
                            (res ? " (HTTP " + std::to_string(res->status) + ")"
                                 : " (" + httplib::to_string(res.error()) + ")"));
    }
    std::this_thread::sleep_for(options_.initial_backoff * (1 << attempt));
  }
  json parsed = json::parse(body, nullptr, /*allow_exceptions=*/false);
  if (parsed.is_discarded()) throw ProtocolError("/info body is not JSON");
  info_ = ParseServiceInfo(parsed);
}

std::string RemoteScorer::Post(const std::string& path,
                               const std::string& body) const {
  for (int attempt = 0;; ++attempt) {
    httplib::Client client(endpoint_);
    client.set_connection_timeout(options_.timeout);
    client.set_read_timeout(options_.timeout);
    auto res = client.Post(path, body, "application/json");
    if (res && res->status == 200) return res->body;
    if (res && !IsServerError(res->status)) {
      throw ProtocolError("POST " + path + " returned HTTP " +
                          std::to_string(res->status) + ": " + res->body);
    }
    if (attempt + 1 >= options_.attempts) {
      throw ConnectionError("POST " + path + " to " + endpoint_ + " failed" +
                            (res ? " (HTTP " + std::to_string(res->status) + ")"
                                 : " (" + httplib::to_string(res.error()) + ")") +
                            " after " + std::to_string(options_.attempts) +
                            " attempts");
    }
    std::this_thread::sleep_for(options_.initial_backoff * (1 << attempt));
  }
}

ScoreResponse RemoteScorer::SendBatch(
    const std::vector<const ScoreRequestItem*>& batch,
    bool with_features) const {
  const std::string path = with_features ? "/features" : "/score";
  const std::string body = Post(path, EncodeScoreRequest(batch).dump());
  json parsed = json::parse(body, nullptr, /*allow_exceptions=*/false);
  if (parsed.is_discarded() || !parsed.is_object() ||
      !parsed.contains("pairs") || !parsed["pairs"].is_array()) {
    throw ProtocolError(path + ": response lacks a 'pairs' array");
  }

  std::set<std::string> expected;
  for (const auto* item : batch) expected.insert(item->key);

  ScoreResponse response;
  for (const auto& record : parsed["pairs"]) {
    std::string key;
    PairScore pair;
    try {
      key = record.at("key").get<std::string>();
      pair.score = record.at("score").get<double>();
      if (with_features) {
        const auto values = record.at("f_bert").get<std::vector<double>>();
        if (static_cast<int>(values.size()) != info_.hidden_size) {
          throw HiddenSizeMismatch(
              path + ": f_bert for '" + key + "' has " +
              std::to_string(values.size()) + " components, handshake says " +
              std::to_string(info_.hidden_size));
        }
        pair.f_bert = Eigen::Map<const Eigen::VectorXd>(
            values.data(), static_cast<Eigen::Index>(values.size()));
      }
    } catch (const json::exception& e) {
      throw ProtocolError(path + ": malformed pair record: " + e.what());
    }
    if (!std::isfinite(pair.score) || (pair.f_bert && !pair.f_bert->allFinite())) {
      throw ProtocolError(path + ": non-finite value for '" + key + "'");
    }
    if (!expected.count(key)) {
      throw ProtocolError(path + ": unexpected key '" + key + "'");
    }
    if (!response.pairs.emplace(key, std::move(pair)).second) {
      throw ProtocolError(path + ": duplicate key '" + key + "'");
    }
  }
  if (response.pairs.size() != expected.size()) {
    throw ProtocolError(path + ": response is missing " +
                        std::to_string(expected.size() - response.pairs.size()) +
                        " keys");
  }
  return response;
}

ScoreResponse RemoteScorer::Score(const ScoreRequest& request,
                                  bool with_features) const {
  if (request.pairs.empty()) throw ValidationError("empty score request");
  std::set<std::string> keys;
  int feature_width = -1;
  for (const auto& item : request.pairs) {
    if (!keys.insert(item.key).second) {
      throw ValidationError("duplicate key in score request: " + item.key);
    }
    if (item.features) {
      const int w = static_cast<int>(item.features->size());
      if (feature_width >= 0 && w != feature_width) {
        throw DimensionError("score request mixes feature widths");
      }
      feature_width = w;
    }
  }

  std::size_t limit = options_.batch_size;
  if (info_.max_batch > 0) {
    limit = std::min(limit, static_cast<std::size_t>(info_.max_batch));
  }
  std::vector<std::vector<const ScoreRequestItem*>> batches;
  for (std::size_t i = 0; i < request.pairs.size(); i += limit) {
    auto& batch = batches.emplace_back();
    for (std::size_t j = i; j < std::min(request.pairs.size(), i + limit); ++j) {
      batch.push_back(&request.pairs[j]);
    }
  }

  std::vector<ScoreResponse> replies(batches.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t b = next.fetch_add(1);
      if (b >= batches.size()) return;
      try {
        replies[b] = SendBatch(batches[b], with_features);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(batches.size());
        return;
      }
    }
  };
  const std::size_t workers = std::min(options_.max_in_flight, batches.size());
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
  }
  if (failure) std::rethrow_exception(failure);

  ScoreResponse merged;
  for (auto& reply : replies) {
    merged.pairs.merge(reply.pairs);
  }
  return merged;
}

}  // namespace tabsearch
