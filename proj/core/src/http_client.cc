// Copyright 2026 The Xampler Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "xampler/error.h"
#include "xampler/scorer.h"

namespace xampler {

using json = nlohmann::json;

namespace {

// Splits "http://host:port/prefix" into "http://host:port" and "/prefix".
std::pair<std::string, std::string> SplitUrl(const std::string &url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorCode::kInvalidInput, "scorer url lacks a scheme: " + url);
  }
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, ""};
  std::string path = url.substr(path_start);
  while (!path.empty() && path.back() == '/') path.pop_back();
  return {url.substr(0, path_start), path};
}

json ParseBody(const std::string &body, const std::string &endpoint) {
  try {
    return json::parse(body);
  } catch (const json::parse_error &) {
    throw Error(ErrorCode::kProtocol, endpoint + ": response is not JSON");
  }
}

}  // namespace

HttpScorerClient::HttpScorerClient(HttpClientConfig config)
    : config_(std::move(config)) {
  config_.url = ResolveScorerUrl(config_.url);
  if (config_.retry.max_attempts < 1) {
    throw Error(ErrorCode::kInvalidInput, "retry policy needs max_attempts >= 1");
  }
  std::tie(scheme_host_port_, base_path_) = SplitUrl(config_.url);
}

std::string HttpScorerClient::Post(const std::string &path,
                                   const std::string &body) {
  const std::string endpoint = base_path_ + path;
  std::string last_failure;
  for (int attempt = 1; attempt <= config_.retry.max_attempts; ++attempt) {
    if (attempt > 1) {
      const double delay =
          config_.retry.base_delay.count() * std::pow(2.0, attempt - 2);
      std::this_thread::sleep_for(std::chrono::duration<double>(delay));
    }
    // httplib::Client is not safe to share across threads; one per call.
    httplib::Client client(scheme_host_port_);
    const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(
        config_.timeout);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);

    auto res = client.Post(endpoint, body, "application/json");
    if (!res) {
      last_failure = "connection failed (" + httplib::to_string(res.error()) + ")";
      continue;
    }
    if (res->status >= 200 && res->status < 300) return res->body;
    if (res->status >= 400 && res->status < 500) {
      throw Error(ErrorCode::kProtocol,
                  endpoint + ": HTTP " + std::to_string(res->status) + ": " +
                      res->body);
    }
    last_failure = "HTTP " + std::to_string(res->status);
  }
  throw Error(ErrorCode::kTransport,
              endpoint + ": giving up after " +
                  std::to_string(config_.retry.max_attempts) +
                  " attempts: " + last_failure);
}

std::vector<double> HttpScorerClient::LogProbs(const ScoreRequest &request) {
  json body = {{"prompt", request.prompt_prefix},
               {"continuations", request.continuations}};
  json reply = ParseBody(Post("/v1/score", body.dump()), "/v1/score");
  auto it = reply.find("log_probs");
  if (it == reply.end() || !it->is_array()) {
    throw Error(ErrorCode::kProtocol, "/v1/score: response lacks log_probs");
  }
  std::vector<double> out;
  out.reserve(it->size());
  for (const auto &v : *it) {
    if (!v.is_number()) {
      throw Error(ErrorCode::kProtocol, "/v1/score: non-numeric log_prob");
    }
    out.push_back(v.get<double>());
  }
  if (out.size() != request.continuations.size()) {
    throw Error(ErrorCode::kProtocol,
                "/v1/score: arity mismatch (" + std::to_string(out.size()) +
                    " log_probs for " +
                    std::to_string(request.continuations.size()) +
                    " continuations)");
  }
  return out;
}

Matrix HttpScorerClient::Embed(std::span<const std::string> texts, int layer,
                               Pooling pooling) {
  if (pooling == Pooling::kProviderNative) {
    throw Error(ErrorCode::kInvalidInput,
                "/v1/embed supports mean or position_weighted_mean pooling");
  }
  json body = {{"texts", std::vector<std::string>(texts.begin(), texts.end())},
               {"layer", layer},
               {"pooling", PoolingName(pooling)}};
  json reply = ParseBody(Post("/v1/embed", body.dump()), "/v1/embed");
  if (!reply.contains("dim") || !reply["dim"].is_number_integer() ||
      !reply.contains("vectors") || !reply["vectors"].is_array()) {
    throw Error(ErrorCode::kProtocol, "/v1/embed: response lacks dim/vectors");
  }
  const auto dim = reply["dim"].get<long long>();
  const auto &vectors = reply["vectors"];
  if (dim < 1 || vectors.size() != texts.size()) {
    throw Error(ErrorCode::kProtocol, "/v1/embed: shape mismatch");
  }
  Matrix out(texts.size(), static_cast<std::size_t>(dim));
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    const auto &v = vectors[i];
    if (!v.is_array() || v.size() != out.cols) {
      throw Error(ErrorCode::kProtocol,
                  "/v1/embed: vector " + std::to_string(i) + " has wrong length");
    }
    for (std::size_t j = 0; j < out.cols; ++j) {
      if (!v[j].is_number()) {
        throw Error(ErrorCode::kProtocol, "/v1/embed: non-numeric entry");
      }
      out.row(i)[j] = v[j].get<double>();
    }
  }
  return out;
}

}  // namespace xampler
