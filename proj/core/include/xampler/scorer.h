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

#ifndef XAMPLER_SCORER_H_
#define XAMPLER_SCORER_H_

#include <atomic>
#include <chrono>
#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "xampler/corpus.h"
#include "xampler/embedding.h"

namespace xampler {

inline constexpr std::string_view kDefaultTemplate =
    "The topic of the news [sentence] is [label]";

// Template with exactly one [sentence] and one [label] placeholder.
struct PromptSpec {
  std::string prompt_template{kDefaultTemplate};
  std::string separator = "\n";

  void Validate() const;
};

// Renders each shot with its label, then the query clause with the template
// cut right before the [label] slot (trailing whitespace dropped; the scorer
// owns the spacing of continuations). Segments are joined by the separator.
std::string RenderPrompt(const PromptSpec &spec, std::span<const Example> shots,
                         std::string_view query_text);

// Side information for test doubles. Never sent over the wire and never
// rendered into the prompt.
struct PromptMeta {
  std::vector<std::string> shot_labels;     // in rendered order
  std::optional<std::string> top_shot_label;  // label of the most similar shot
  std::string query_true_label;
};

struct ScoreRequest {
  std::string prompt_prefix;
  std::vector<std::string> continuations;  // the label set, in dataset order
  std::optional<PromptMeta> meta;
};

struct Prediction {
  std::string label;
  std::vector<double> scores;  // log-domain, one per continuation

  bool operator==(const Prediction &) const = default;
};

// Returns one log-probability per continuation. Implementations must be safe
// to call concurrently.
class ScorerClient {
 public:
  virtual ~ScorerClient() = default;
  virtual std::vector<double> LogProbs(const ScoreRequest &request) = 0;
};

// Queries the client and picks the argmax label; ties go to the earliest
// continuation. Throws Error(kProtocol) on a wrong-arity answer.
Prediction ScoreLabels(ScorerClient &client, const ScoreRequest &request);

// Scores requests with at most `parallelism` calls in flight. Results are in
// request order. The first failure is rethrown after all workers stop.
std::vector<Prediction> ScoreAll(ScorerClient &client,
                                 std::span<const ScoreRequest> requests,
                                 int parallelism);

enum class MockRule {
  // Predicts the majority shot label (ties by continuation order).
  kLabelEcho,
  // Predicts the true label iff the top shot carries it, else the first
  // continuation that is not the true label.
  kSimilarityGated,
};

MockRule ParseMockRule(std::string_view name);
const char *MockRuleName(MockRule rule);

// Deterministic in-process scorer. Reads PromptMeta instead of the prompt.
class MockScorer : public ScorerClient {
 public:
  explicit MockScorer(MockRule rule) : rule_(rule) {}

  std::vector<double> LogProbs(const ScoreRequest &request) override;

  std::size_t call_count() const { return calls_.load(); }
  MockRule rule() const { return rule_; }

 private:
  MockRule rule_;
  std::atomic<std::size_t> calls_{0};
};

std::unique_ptr<MockScorer> MakeMockScorer(MockRule rule);

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::duration<double> base_delay{0.5};  // doubled per retry
};

struct HttpClientConfig {
  std::string url = "http://127.0.0.1:8000";
  RetryPolicy retry;
  std::chrono::duration<double> timeout{60.0};
};

// XAMPLER_SCORER_URL, when set and non-empty, wins over the configured URL.
std::string ResolveScorerUrl(const std::string &configured);

// Client for the model bridge:
//   POST /v1/score {"prompt", "continuations"} -> {"log_probs"}
//   POST /v1/embed {"texts", "layer", "pooling"} -> {"dim", "vectors"}
// 4xx answers are fatal protocol errors; 5xx and connection failures are
// retried with exponential backoff.
class HttpScorerClient : public ScorerClient {
 public:
  explicit HttpScorerClient(HttpClientConfig config);

  std::vector<double> LogProbs(const ScoreRequest &request) override;

  Matrix Embed(std::span<const std::string> texts, int layer, Pooling pooling);

  const HttpClientConfig &config() const { return config_; }

 private:
  std::string Post(const std::string &path, const std::string &body);

  HttpClientConfig config_;
  std::string scheme_host_port_;
  std::string base_path_;
};

}  // namespace xampler

#endif  // XAMPLER_SCORER_H_
