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

#include <gtest/gtest.h>

#include <atomic>
#include <chrono>
#include <cmath>
#include <random>
#include <thread>

#include "xampler/error.h"

namespace xampler {
namespace {

class FixedScorer : public ScorerClient {
 public:
  explicit FixedScorer(std::vector<double> scores) : scores_(std::move(scores)) {}
  std::vector<double> LogProbs(const ScoreRequest &) override { return scores_; }

 private:
  std::vector<double> scores_;
};

ScoreRequest Request(std::vector<std::string> conts) {
  ScoreRequest r;
  r.prompt_prefix = "p";
  r.continuations = std::move(conts);
  return r;
}

TEST(RenderPromptTest, ZeroShot) {
  EXPECT_EQ(RenderPrompt(PromptSpec{}, {}, "rain tomorrow"),
            "The topic of the news rain tomorrow is");
}

TEST(RenderPromptTest, OneShot) {
  std::vector<Example> shots = {{"s", "goal scored", "sports", "eng_Latn"}};
  EXPECT_EQ(RenderPrompt(PromptSpec{}, shots, "vote held"),
            "The topic of the news goal scored is sports\n"
            "The topic of the news vote held is");
}

TEST(RenderPromptTest, CustomTemplateAndSeparator) {
  PromptSpec spec{"[label] <- [sentence]", " || "};
  std::vector<Example> shots = {{"1", "a", "x", ""}, {"2", "b", "y", ""}};
  EXPECT_EQ(RenderPrompt(spec, shots, "q"), "x <- a || y <- b || ");
}

TEST(RenderPromptTest, PrefixCountAndOrder) {
  std::vector<Example> shots;
  for (int i = 0; i < 6; ++i) {
    shots.push_back({std::to_string(i), "text" + std::to_string(i), "l" + std::to_string(i), ""});
  }
  const std::string prompt = RenderPrompt(PromptSpec{}, shots, "query");
  std::size_t count = 0;
  for (auto pos = prompt.find("The topic of the news"); pos != std::string::npos;
       pos = prompt.find("The topic of the news", pos + 1)) {
    ++count;
  }
  EXPECT_EQ(count, shots.size() + 1);

  std::vector<Example> reversed(shots.rbegin(), shots.rend());
  const std::string other = RenderPrompt(PromptSpec{}, reversed, "query");
  for (std::size_t i = 0; i + 1 < shots.size(); ++i) {
    EXPECT_LT(prompt.find(shots[i].text), prompt.find(shots[i + 1].text));
    EXPECT_GT(other.find(shots[i].text), other.find(shots[i + 1].text));
  }
}

TEST(RenderPromptTest, SlotTextInsideContentIsNotExpanded) {
  std::vector<Example> shots = {{"1", "[label] here", "[sentence]", ""}};
  EXPECT_EQ(RenderPrompt(PromptSpec{}, shots, "[label]"),
            "The topic of the news [label] here is [sentence]\n"
            "The topic of the news [label] is");
}

TEST(RenderPromptTest, RejectsBadTemplates) {
  EXPECT_THROW(RenderPrompt(PromptSpec{"no slots", "\n"}, {}, "q"), Error);
  EXPECT_THROW(RenderPrompt(PromptSpec{"[sentence] [label] [label]", "\n"}, {}, "q"), Error);
  EXPECT_THROW(RenderPrompt(PromptSpec{"[sentence] only", "\n"}, {}, "q"), Error);
}

TEST(ScoreLabelsTest, Examples) {
  FixedScorer single({-42.0});
  EXPECT_EQ(ScoreLabels(single, Request({"sports"})).label, "sports");
  FixedScorer three({-1.0, -0.5, -2.0});
  EXPECT_EQ(ScoreLabels(three, Request({"a", "b", "c"})).label, "b");
  FixedScorer tie({-1.0, -1.0});
  EXPECT_EQ(ScoreLabels(tie, Request({"a", "b"})).label, "a");
}

TEST(ScoreLabelsTest, WrongArityIsProtocolError) {
  FixedScorer two({0.0, 1.0});
  try {
    ScoreLabels(two, Request({"a", "b", "c"}));
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.code(), ErrorCode::kProtocol);
  }
  EXPECT_THROW(ScoreLabels(two, Request({})), Error);
}

TEST(ScoreLabelsTest, ArgmaxInvariantUnderMonotoneTransform) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> d(0, 3);
  std::uniform_int_distribution<int> len(1, 9);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> s(len(rng));
    for (auto &v : s) v = std::round(d(rng));  // rounding creates ties
    std::vector<std::string> conts;
    for (std::size_t i = 0; i < s.size(); ++i) conts.push_back("l" + std::to_string(i));
    std::vector<double> t;
    for (double v : s) t.push_back(std::exp(v / 2.0) * 5.0 - 1.0);
    FixedScorer a(s), b(t);
    EXPECT_EQ(ScoreLabels(a, Request(conts)).label, ScoreLabels(b, Request(conts)).label);
  }
}

ScoreRequest MetaRequest(std::vector<std::string> shot_labels,
                         std::optional<std::string> top, std::string truth) {
  ScoreRequest r = Request({"politics", "science", "sports"});
  r.meta = PromptMeta{std::move(shot_labels), std::move(top), std::move(truth)};
  return r;
}

TEST(MockScorerTest, LabelEcho) {
  MockScorer mock(MockRule::kLabelEcho);
  EXPECT_EQ(ScoreLabels(mock, MetaRequest({"science"}, "science", "sports")).label, "science");
  EXPECT_EQ(ScoreLabels(mock, MetaRequest({"sports", "science", "sports"}, "science", "x")).label,
            "sports");
  // Vote tie goes to continuation order.
  EXPECT_EQ(ScoreLabels(mock, MetaRequest({"sports", "science"}, "sports", "x")).label,
            "science");
  EXPECT_EQ(mock.call_count(), 3u);
}

TEST(MockScorerTest, SimilarityGated) {
  MockScorer mock(MockRule::kSimilarityGated);
  EXPECT_EQ(ScoreLabels(mock, MetaRequest({"x", "sports"}, "sports", "sports")).label, "sports");
  const auto wrong = ScoreLabels(mock, MetaRequest({"sports"}, "sports", "politics")).label;
  EXPECT_NE(wrong, "politics");
  EXPECT_EQ(wrong, "science");
  EXPECT_EQ(ScoreLabels(mock, MetaRequest({}, std::nullopt, "politics")).label, "science");
}

TEST(MockScorerTest, DeterministicAndNeedsMeta) {
  MockScorer mock(MockRule::kLabelEcho);
  auto r = MetaRequest({"science", "sports"}, "sports", "x");
  EXPECT_EQ(ScoreLabels(mock, r), ScoreLabels(mock, r));
  EXPECT_THROW(mock.LogProbs(Request({"a"})), Error);
  EXPECT_EQ(ParseMockRule("label-echo"), MockRule::kLabelEcho);
  EXPECT_EQ(std::string(MockRuleName(ParseMockRule("similarity-gated"))), "similarity-gated");
  EXPECT_THROW(ParseMockRule("oracle"), Error);
}

// Sleeps a pseudo-random time and tracks concurrency; the winning
// continuation is encoded in the prompt so ordering is checkable.
class SlowScorer : public ScorerClient {
 public:
  std::vector<double> LogProbs(const ScoreRequest &r) override {
    const int now = ++in_flight_;
    int prev = max_seen_.load();
    while (now > prev && !max_seen_.compare_exchange_weak(prev, now)) {
    }
    const int idx = std::stoi(r.prompt_prefix);
    std::this_thread::sleep_for(std::chrono::microseconds((idx * 7919) % 500));
    --in_flight_;
    if (idx == fail_at) throw Error(ErrorCode::kTransport, "boom");
    std::vector<double> s(r.continuations.size(), 0.0);
    s[idx % s.size()] = 1.0;
    return s;
  }
  std::atomic<int> in_flight_{0};
  std::atomic<int> max_seen_{0};
  int fail_at = -1;
};

TEST(ScoreAllTest, KeepsRequestOrderAndBoundsConcurrency) {
  std::vector<ScoreRequest> reqs;
  for (int i = 0; i < 64; ++i) {
    ScoreRequest r;
    r.prompt_prefix = std::to_string(i);
    r.continuations = {"a", "b", "c", "d", "e"};
    reqs.push_back(r);
  }
  for (int p : {1, 3, 8}) {
    SlowScorer scorer;
    auto preds = ScoreAll(scorer, reqs, p);
    ASSERT_EQ(preds.size(), reqs.size());
    for (int i = 0; i < 64; ++i) EXPECT_EQ(preds[i].label, reqs[i].continuations[i % 5]);
    EXPECT_LE(scorer.max_seen_.load(), p);
  }
  SlowScorer failing;
  failing.fail_at = 17;
  EXPECT_THROW(ScoreAll(failing, reqs, 4), Error);
  SlowScorer unused;
  EXPECT_TRUE(ScoreAll(unused, std::span<const ScoreRequest>(), 4).empty());
}

}  // namespace
}  // namespace xampler
