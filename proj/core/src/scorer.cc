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

#include "xampler/scorer.h"

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <map>
#include <mutex>
#include <thread>

#include "xampler/error.h"

namespace xampler {

namespace {

constexpr std::string_view kSentenceSlot = "[sentence]";
constexpr std::string_view kLabelSlot = "[label]";

std::size_t CountOccurrences(std::string_view haystack, std::string_view needle) {
  std::size_t count = 0;
  for (auto pos = haystack.find(needle); pos != std::string_view::npos;
       pos = haystack.find(needle, pos + needle.size())) {
    ++count;
  }
  return count;
}

// Substitutes both slots in one pass so that slot-like text inside a
// sentence or label is never expanded.
std::string Fill(std::string_view tmpl, std::string_view sentence,
                 std::string_view label) {
  std::string out;
  out.reserve(tmpl.size() + sentence.size() + label.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl.substr(i, kSentenceSlot.size()) == kSentenceSlot) {
      out += sentence;
      i += kSentenceSlot.size();
    } else if (tmpl.substr(i, kLabelSlot.size()) == kLabelSlot) {
      out += label;
      i += kLabelSlot.size();
    } else {
      out += tmpl[i++];
    }
  }
  return out;
}

}  // namespace

void PromptSpec::Validate() const {
  if (CountOccurrences(prompt_template, kSentenceSlot) != 1 ||
      CountOccurrences(prompt_template, kLabelSlot) != 1) {
    throw Error(ErrorCode::kInvalidInput,
                "prompt template must contain [sentence] and [label] exactly "
                "once: \"" + prompt_template + "\"");
  }
}

std::string RenderPrompt(const PromptSpec &spec, std::span<const Example> shots,
                         std::string_view query_text) {
  spec.Validate();
  std::string_view tmpl = spec.prompt_template;
  std::string out;
  for (const auto &shot : shots) {
    out += Fill(tmpl, shot.text, shot.label);
    out += spec.separator;
  }
  std::string_view head = tmpl.substr(0, tmpl.find(kLabelSlot));
  while (!head.empty() && (head.back() == ' ' || head.back() == '\t')) {
    head.remove_suffix(1);
  }
  out += Fill(head, query_text, "");
  return out;
}

Prediction ScoreLabels(ScorerClient &client, const ScoreRequest &request) {
  if (request.continuations.empty()) {
    throw Error(ErrorCode::kInvalidInput, "score request without continuations");
  }
  Prediction p;
  p.scores = client.LogProbs(request);
  if (p.scores.size() != request.continuations.size()) {
    throw Error(ErrorCode::kProtocol,
                "scorer returned " + std::to_string(p.scores.size()) +
                    " scores for " +
                    std::to_string(request.continuations.size()) +
                    " continuations");
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < p.scores.size(); ++i) {
    if (p.scores[i] > p.scores[best]) best = i;
  }
  p.label = request.continuations[best];
  return p;
}

std::vector<Prediction> ScoreAll(ScorerClient &client,
                                 std::span<const ScoreRequest> requests,
                                 int parallelism) {
  std::vector<Prediction> results(requests.size());
  if (requests.empty()) return results;
  const std::size_t workers = std::min<std::size_t>(
      static_cast<std::size_t>(std::max(parallelism, 1)), requests.size());
  if (workers == 1) {
    for (std::size_t i = 0; i < requests.size(); ++i) {
      results[i] = ScoreLabels(client, requests[i]);
    }
    return results;
  }

  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex error_mu;
  auto work = [&] {
    for (;;) {
      if (failed.load()) return;
      const std::size_t i = next.fetch_add(1);
      if (i >= requests.size()) return;
      try {
        results[i] = ScoreLabels(client, requests[i]);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!first_error) first_error = std::current_exception();
        failed.store(true);
        return;
      }
    }
  };
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) threads.emplace_back(work);
  for (auto &t : threads) t.join();
  if (first_error) std::rethrow_exception(first_error);
  return results;
}

MockRule ParseMockRule(std::string_view name) {
  if (name == "label-echo") return MockRule::kLabelEcho;
  if (name == "similarity-gated") return MockRule::kSimilarityGated;
  throw Error(ErrorCode::kInvalidInput,
              "unknown mock rule '" + std::string(name) + "'");
}

const char *MockRuleName(MockRule rule) {
  return rule == MockRule::kLabelEcho ? "label-echo" : "similarity-gated";
}

std::vector<double> MockScorer::LogProbs(const ScoreRequest &request) {
  calls_.fetch_add(1);
  if (!request.meta) {
    throw Error(ErrorCode::kProtocol, "mock scorer needs prompt metadata");
  }
  const auto &conts = request.continuations;
  const PromptMeta &meta = *request.meta;

  std::optional<std::size_t> pick;
  if (rule_ == MockRule::kLabelEcho) {
    std::map<std::string, int> votes;
    for (const auto &label : meta.shot_labels) ++votes[label];
    int best_votes = 0;
    for (std::size_t i = 0; i < conts.size(); ++i) {
      auto it = votes.find(conts[i]);
      if (it != votes.end() && it->second > best_votes) {
        best_votes = it->second;
        pick = i;
      }
    }
  } else {
    const bool gated_in = meta.top_shot_label &&
                          *meta.top_shot_label == meta.query_true_label;
    for (std::size_t i = 0; i < conts.size(); ++i) {
      if ((conts[i] == meta.query_true_label) == gated_in) {
        pick = i;
        break;
      }
    }
  }

  std::vector<double> scores(conts.size(), -1.0);
  if (pick) scores[*pick] = 0.0;
  return scores;
}

std::unique_ptr<MockScorer> MakeMockScorer(MockRule rule) {
  return std::make_unique<MockScorer>(rule);
}

std::string ResolveScorerUrl(const std::string &configured) {
  if (const char *env = std::getenv("XAMPLER_SCORER_URL"); env && *env) {
    return env;
  }
  return configured;
}

}  // namespace xampler
