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

#include <gtest/gtest.h>
#include <httplib.h>
#include <json.hpp>

#include <atomic>
#include <cstdlib>
#include <thread>

#include "xampler/error.h"
#include "xampler/scorer.h"

namespace xampler {
namespace {

using json = nlohmann::json;

// In-process bridge double on an ephemeral port.
class FakeBridge {
 public:
  FakeBridge() {
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeBridge() {
    server_.stop();
    thread_.join();
  }

  httplib::Server &server() { return server_; }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

HttpClientConfig Config(const std::string &url) {
  HttpClientConfig c;
  c.url = url;
  c.retry.base_delay = std::chrono::duration<double>(0.01);
  c.timeout = std::chrono::duration<double>(5.0);
  return c;
}

ScoreRequest Req(std::string prompt, std::vector<std::string> conts) {
  ScoreRequest r;
  r.prompt_prefix = std::move(prompt);
  r.continuations = std::move(conts);
  return r;
}

ErrorCode CodeOf(const std::function<void()> &fn) {
  try {
    fn();
  } catch (const Error &e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::kInvalidInput;
}

TEST(HttpScorerTest, ScoreRoundTrip) {
  FakeBridge bridge;
  json seen;
  bridge.server().Post("/v1/score", [&](const httplib::Request &req, httplib::Response &res) {
    seen = json::parse(req.body);
    res.set_content(R"({"log_probs":[-3.0,-0.25,-7.5]})", "application/json");
  });
  HttpScorerClient client(Config(bridge.url()));
  auto p = ScoreLabels(client, Req("The topic of the news x is", {"a", "b", "c"}));
  EXPECT_EQ(p.label, "b");
  EXPECT_EQ(p.scores, (std::vector<double>{-3.0, -0.25, -7.5}));
  EXPECT_EQ(seen["prompt"], "The topic of the news x is");
  EXPECT_EQ(seen["continuations"], json({"a", "b", "c"}));
}

TEST(HttpScorerTest, RetriesServerErrorsThenSucceeds) {
  FakeBridge bridge;
  std::atomic<int> calls{0};
  bridge.server().Post("/v1/score", [&](const httplib::Request &, httplib::Response &res) {
    if (++calls < 3) {
      res.status = 503;
      return;
    }
    res.set_content(R"({"log_probs":[0.0]})", "application/json");
  });
  HttpScorerClient client(Config(bridge.url()));
  EXPECT_EQ(ScoreLabels(client, Req("p", {"x"})).label, "x");
  EXPECT_EQ(calls.load(), 3);
}

TEST(HttpScorerTest, GivesUpAfterMaxAttempts) {
  FakeBridge bridge;
  std::atomic<int> calls{0};
  bridge.server().Post("/v1/score", [&](const httplib::Request &, httplib::Response &res) {
    ++calls;
    res.status = 500;
  });
  HttpScorerClient client(Config(bridge.url()));
  EXPECT_EQ(CodeOf([&] { client.LogProbs(Req("p", {"x"})); }), ErrorCode::kTransport);
  EXPECT_EQ(calls.load(), 3);
}

TEST(HttpScorerTest, ClientErrorIsFatalWithoutRetry) {
  FakeBridge bridge;
  std::atomic<int> calls{0};
  bridge.server().Post("/v1/score", [&](const httplib::Request &, httplib::Response &res) {
    ++calls;
    res.status = 422;
    res.set_content("bad continuations", "text/plain");
  });
  HttpScorerClient client(Config(bridge.url()));
  try {
    client.LogProbs(Req("p", {"x"}));
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.code(), ErrorCode::kProtocol);
    EXPECT_NE(std::string(e.what()).find("422"), std::string::npos);
  }
  EXPECT_EQ(calls.load(), 1);
}

TEST(HttpScorerTest, MalformedRepliesAreProtocolErrors) {
  FakeBridge bridge;
  std::string reply;
  bridge.server().Post("/v1/score", [&](const httplib::Request &, httplib::Response &res) {
    res.set_content(reply, "application/json");
  });
  HttpScorerClient client(Config(bridge.url()));
  for (std::string r : {R"({"log_probs":[0.0]})", "not json", R"({"scores":[0.0,1.0]})",
                        R"({"log_probs":["a","b"]})"}) {
    reply = r;
    EXPECT_EQ(CodeOf([&] { client.LogProbs(Req("p", {"x", "y"})); }), ErrorCode::kProtocol)
        << r;
  }
}

TEST(HttpScorerTest, ConnectionFailureIsTransportError) {
  std::string url;
  {
    FakeBridge bridge;
    url = bridge.url();
  }
  auto config = Config(url);
  config.retry.max_attempts = 2;
  HttpScorerClient client(config);
  EXPECT_EQ(CodeOf([&] { client.LogProbs(Req("p", {"x"})); }), ErrorCode::kTransport);
}

TEST(HttpScorerTest, EmbedRoundTrip) {
  FakeBridge bridge;
  json seen;
  bridge.server().Post("/v1/embed", [&](const httplib::Request &req, httplib::Response &res) {
    seen = json::parse(req.body);
    json out = {{"dim", 2}, {"vectors", json::array()}};
    for (std::size_t i = 0; i < seen["texts"].size(); ++i) {
      out["vectors"].push_back({static_cast<double>(i), 0.5});
    }
    res.set_content(out.dump(), "application/json");
  });
  HttpScorerClient client(Config(bridge.url()));
  std::vector<std::string> texts = {"one", "two", "three"};
  Matrix m = client.Embed(texts, 11, Pooling::kPositionWeightedMean);
  EXPECT_EQ(seen["layer"], 11);
  EXPECT_EQ(seen["pooling"], "position_weighted_mean");
  EXPECT_EQ(seen["texts"], json(texts));
  ASSERT_EQ(m.rows, 3u);
  ASSERT_EQ(m.cols, 2u);
  EXPECT_EQ(m.row(2)[0], 2.0);
  EXPECT_EQ(m.row(1)[1], 0.5);
  EXPECT_THROW(client.Embed(texts, 11, Pooling::kProviderNative), Error);
}

TEST(HttpScorerTest, EmbedShapeMismatchIsProtocolError) {
  FakeBridge bridge;
  bridge.server().Post("/v1/embed", [&](const httplib::Request &, httplib::Response &res) {
    res.set_content(R"({"dim":3,"vectors":[[1,2]]})", "application/json");
  });
  HttpScorerClient client(Config(bridge.url()));
  std::vector<std::string> texts = {"one"};
  EXPECT_EQ(CodeOf([&] { client.Embed(texts, 0, Pooling::kMean); }), ErrorCode::kProtocol);
}

TEST(HttpScorerTest, BasePathPrefixIsKept) {
  FakeBridge bridge;
  bridge.server().Post("/bridge/v1/score", [&](const httplib::Request &, httplib::Response &res) {
    res.set_content(R"({"log_probs":[1.0,2.0]})", "application/json");
  });
  HttpScorerClient client(Config(bridge.url() + "/bridge/"));
  EXPECT_EQ(ScoreLabels(client, Req("p", {"a", "b"})).label, "b");
}

TEST(HttpScorerTest, EnvironmentOverridesConfiguredUrl) {
  FakeBridge bridge;
  bridge.server().Post("/v1/score", [&](const httplib::Request &, httplib::Response &res) {
    res.set_content(R"({"log_probs":[0.0]})", "application/json");
  });
  ::setenv("XAMPLER_SCORER_URL", bridge.url().c_str(), 1);
  HttpScorerClient client(Config("http://127.0.0.1:1"));
  EXPECT_EQ(client.config().url, bridge.url());
  EXPECT_EQ(ScoreLabels(client, Req("p", {"x"})).label, "x");
  EXPECT_EQ(ResolveScorerUrl("http://elsewhere"), bridge.url());
  ::unsetenv("XAMPLER_SCORER_URL");
  EXPECT_EQ(ResolveScorerUrl("http://elsewhere"), "http://elsewhere");
}

TEST(HttpScorerTest, ConcurrentScoringKeepsOrder) {
  FakeBridge bridge;
  bridge.server().Post("/v1/score", [&](const httplib::Request &req, httplib::Response &res) {
    json body = json::parse(req.body);
    const int idx = std::stoi(body["prompt"].get<std::string>());
    json scores = json::array();
    for (std::size_t i = 0; i < body["continuations"].size(); ++i) {
      scores.push_back(static_cast<int>(i) == idx % 3 ? 0.0 : -1.0);
    }
    res.set_content(json{{"log_probs", scores}}.dump(), "application/json");
  });
  HttpScorerClient client(Config(bridge.url()));
  std::vector<ScoreRequest> reqs;
  for (int i = 0; i < 30; ++i) reqs.push_back(Req(std::to_string(i), {"a", "b", "c"}));
  auto preds = ScoreAll(client, reqs, 4);
  for (int i = 0; i < 30; ++i) EXPECT_EQ(preds[i].label, reqs[i].continuations[i % 3]);
}

TEST(HttpScorerTest, RejectsBadConfig) {
  EXPECT_THROW(HttpScorerClient(Config("127.0.0.1:8000")), Error);
  auto c = Config("http://127.0.0.1:8000");
  c.retry.max_attempts = 0;
  EXPECT_THROW(HttpScorerClient{c}, Error);
}

}  // namespace
}  // namespace xampler
