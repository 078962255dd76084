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

#include "cli.h"

#include <gtest/gtest.h>

#include <algorithm>
#include <sstream>

#include "json.hpp"
#include "test_util.h"
#include "xampler/corpus.h"
#include "xampler/dataconstruct.h"
#include "xampler/embedding.h"
#include "xampler/selftest.h"
#include "xampler/trainer.h"

namespace xampler {
namespace {

struct Outcome {
  int code = 0;
  std::string out;
  std::string err;
};

Outcome RunCli(std::vector<std::string> args) {
  args.insert(args.begin(), "xampler");
  std::vector<const char *> argv;
  for (const auto &a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Outcome o;
  o.code = cli::Run(static_cast<int>(argv.size()), argv.data(), out, err);
  o.out = out.str();
  o.err = err.str();
  return o;
}

std::string Fixture(const char *name) { return (testing::FixturesDir() / name).string(); }

TEST(CliTest, AggregateReproducesReferenceAverages) {
  auto o = RunCli({"aggregate", "--fixtures", Fixture("sib200_label_agnostic.csv")});
  ASSERT_EQ(o.code, 0) << o.err;
  const auto avg = o.out.substr(o.out.rfind("Avg,"));
  EXPECT_NE(avg.find(",75.91\r\n"), std::string::npos) << avg;
  EXPECT_NE(o.out.find("# source: "), std::string::npos);

  o = RunCli({"aggregate", "--ablation", Fixture("sib200_ablation.csv")});
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_NE(o.out.find("XLT (Glot500),69.51,6.40\r\n"), std::string::npos) << o.out;
  EXPECT_NE(o.out.find("MT,74.50,1.41\r\n"), std::string::npos);

  o = RunCli({"aggregate", "--format", "markdown", "--fixtures",
              Fixture("masakhanews_label_aware.csv")});
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_NE(o.out.find("| Avg |"), std::string::npos);
  EXPECT_NE(o.out.find("<!--"), std::string::npos);
}

TEST(CliTest, UsageErrorsExitOne) {
  auto o = RunCli({"frobnicate"});
  EXPECT_EQ(o.code, 1);
  EXPECT_NE(o.err.find("unknown subcommand 'frobnicate'"), std::string::npos);
  EXPECT_NE(o.err.find("aggregate"), std::string::npos);

  o = RunCli({"aggregate", "--frob", "1"});
  EXPECT_EQ(o.code, 1);
  EXPECT_NE(o.err.find("--frob"), std::string::npos);

  o = RunCli({"aggregate"});
  EXPECT_EQ(o.code, 1);
  EXPECT_NE(o.err.find("missing config key 'paths.fixtures'"), std::string::npos);

  o = RunCli({"mine", "--k", "abc"});
  EXPECT_EQ(o.code, 1);

  o = RunCli({"mine"});
  EXPECT_EQ(o.code, 1);
  EXPECT_NE(o.err.find("missing config key 'paths.train'"), std::string::npos) << o.err;

  o = RunCli({});
  EXPECT_EQ(o.code, 1);

  o = RunCli({"--help"});
  EXPECT_EQ(o.code, 0);
  EXPECT_NE(o.out.find("selftest"), std::string::npos);
}

TEST(CliTest, ConfigFileIsOverriddenByFlags) {
  testing::TempDir dir;
  const auto cfg = dir / "cfg.json";
  nlohmann::json doc = {{"version", 1},
                        {"paths", {{"fixtures", {Fixture("sib200_label_aware.csv")}}}},
                        {"report", {{"format", "markdown"}}}};
  testing::WriteFile(cfg, doc.dump());
  auto o = RunCli({"aggregate", "--config", cfg.string()});
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_NE(o.out.find("| Avg |"), std::string::npos);
  o = RunCli({"aggregate", "--config", cfg.string(), "--format", "csv"});
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_NE(o.out.find("Avg,"), std::string::npos);
  EXPECT_NE(o.out.find(",70.18\r\n"), std::string::npos);

  testing::WriteFile(cfg, R"({"paths": {}})");
  o = RunCli({"aggregate", "--config", cfg.string()});
  EXPECT_EQ(o.code, 1);
  EXPECT_NE(o.err.find("missing config key 'version'"), std::string::npos);
  testing::WriteFile(cfg, R"({"version": 2})");
  o = RunCli({"aggregate", "--config", cfg.string()});
  EXPECT_EQ(o.code, 1);
  EXPECT_NE(o.err.find("unsupported config version"), std::string::npos);
  o = RunCli({"aggregate", "--config", (dir / "absent.json").string()});
  EXPECT_EQ(o.code, 2);
}

TEST(CliTest, SelftestIsReproducible) {
  auto a = RunCli({"selftest", "--epochs", "5"});
  auto b = RunCli({"selftest", "--epochs", "5"});
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(a.out, b.out);
  EXPECT_NE(a.out.find("fingerprint"), std::string::npos);
}

class PipelineTest : public ::testing::Test {
 protected:
  void SetUp() override {
    SyntheticConfig cfg;
    cfg.train_size = 42;
    cfg.eval_per_language = 14;
    cfg.languages = {"eng_Latn", "swh_Latn"};
    corpus_ = MakeSyntheticCorpus(cfg);
    SaveDataset(corpus_.train, dir_ / "train.jsonl");
    for (const auto &ds : corpus_.eval_sets) {
      SaveDataset(ds, dir_ / (ds.name + ".jsonl"));
      evals_.push_back((dir_ / (ds.name + ".jsonl")).string());
    }
    SaveEmbeddings(corpus_.mining_store, dir_ / "mining.xemb");
    SaveEmbeddings(corpus_.base_store, dir_ / "base.xemb");
  }

  std::string P(const char *name) { return (dir_ / name).string(); }

  testing::TempDir dir_;
  SyntheticCorpus corpus_;
  std::vector<std::string> evals_;
};

TEST_F(PipelineTest, EndToEndThroughFiles) {
  auto o = RunCli({"mine", "--train", P("train.jsonl"), "--embeddings", P("mining.xemb"),
                   "--k", "5", "--out", P("cands.jsonl")});
  ASSERT_EQ(o.code, 0) << o.err;
  const auto cands = LoadCandidates(P("cands.jsonl"));
  ASSERT_EQ(cands.size(), 42u);
  for (const auto &cs : cands) EXPECT_EQ(cs.candidate_ids.size(), 5u);

  o = RunCli({"construct", "--train", P("train.jsonl"), "--candidates", P("cands.jsonl"),
              "--scorer", "mock", "--mock-rule", "label-echo", "--out", P("pairs.jsonl")});
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_NE(o.out.find("constructed 210 pairs"), std::string::npos) << o.out;
  EXPECT_FALSE(std::filesystem::exists(P("pairs.jsonl.ckpt")));
  const auto pairs = LoadPairs(P("pairs.jsonl"));
  const auto index = IndexById(corpus_.train);
  for (const auto &p : pairs) {
    const bool same = corpus_.train.examples[index.at(p.query_id)].label ==
                      corpus_.train.examples[index.at(p.candidate_id)].label;
    EXPECT_EQ(p.polarity == Polarity::kPositive, same);
  }

  o = RunCli({"train", "--pairs", P("pairs.jsonl"), "--embeddings", P("base.xemb"),
              "--epochs", "4", "--lr", "0.005", "--seed", "3", "--out", P("head.bin")});
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_NE(o.out.find("epoch 4 loss "), std::string::npos);
  const HeadCheckpoint ckpt = LoadHead(P("head.bin"));
  EXPECT_EQ(ckpt.epoch, 4);
  EXPECT_EQ(ckpt.seed, 3u);

  o = RunCli({"retrieve", "--query-embeddings", P("base.xemb"), "--pool", P("train.jsonl"),
              "--pool-embeddings", P("base.xemb"), "--head", P("head.bin"), "--shots", "3",
              "--out", P("shots.jsonl")});
  ASSERT_EQ(o.code, 0) << o.err;
  std::istringstream shots(testing::ReadFile(P("shots.jsonl")));
  std::string line;
  std::size_t lines = 0;
  while (std::getline(shots, line)) {
    auto rec = nlohmann::json::parse(line);
    ASSERT_EQ(rec["shots"].size(), 3u);
    for (const auto &s : rec["shots"]) EXPECT_NE(s["id"], rec["query_id"]);
    ++lines;
  }
  EXPECT_EQ(lines, corpus_.base_store.rows());

  std::vector<std::string> eval = {"eval-knn", "--pool", P("train.jsonl"), "--pool-embeddings",
                                   P("base.xemb"), "--head", P("head.bin"), "--out",
                                   P("knn.csv")};
  for (const auto &e : evals_) {
    eval.push_back("--eval");
    eval.push_back(e);
  }
  o = RunCli(eval);
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_EQ(testing::ReadFile(P("knn.csv")), o.out);
  EXPECT_NE(o.out.find("# effective-config: "), std::string::npos);
  EXPECT_NE(o.out.find("language,KNN"), std::string::npos) << o.out;
  EXPECT_NE(o.out.find("\r\nswh_Latn,"), std::string::npos);

  eval[0] = "eval-icl";
  eval.insert(eval.end(), {"--scorer", "mock", "--mode", "label_aware"});
  *(std::find(eval.begin(), eval.end(), "--out") + 1) = P("icl.csv");
  o = RunCli(eval);
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_NE(o.out.find("ICL [label_aware]"), std::string::npos) << o.out;

  std::vector<std::string> layers = {"sweep-layers", "--pool", P("train.jsonl"), "--layer",
                                     "4=" + P("mining.xemb"), "--layer", "11=" + P("base.xemb")};
  for (const auto &e : evals_) {
    layers.push_back("--eval");
    layers.push_back(e);
  }
  o = RunCli(layers);
  // The mining store does not cover eval ids.
  EXPECT_EQ(o.code, 1);
  layers[4] = "4=" + P("base.xemb");
  o = RunCli(layers);
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_NE(o.out.find("best,4\r\n"), std::string::npos) << o.out;
}

TEST_F(PipelineTest, SweepShotsReport) {
  std::vector<std::string> args = {"sweep-shots", "--pool", P("train.jsonl"), "--pool-embeddings",
                                   P("base.xemb"), "--scorer", "mock", "--values", "1,3",
                                   "--format", "markdown"};
  for (const auto &e : evals_) {
    args.push_back("--eval");
    args.push_back(e);
  }
  auto o = RunCli(args);
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_NE(o.out.find("| shots | KNN | ICL |"), std::string::npos) << o.out;
  EXPECT_NE(o.out.find("| best |"), std::string::npos);
}

TEST_F(PipelineTest, RuntimeFailuresExitTwo) {
  auto o = RunCli({"mine", "--train", P("missing.jsonl"), "--embeddings", P("mining.xemb"),
                   "--out", P("c.jsonl")});
  EXPECT_EQ(o.code, 2);
  EXPECT_NE(o.err.find("missing.jsonl"), std::string::npos);

  testing::WriteFile(dir_ / "bad.xemb", "not an embedding file");
  o = RunCli({"mine", "--train", P("train.jsonl"), "--embeddings", P("bad.xemb"), "--out",
              P("c.jsonl")});
  EXPECT_EQ(o.code, 1);
  EXPECT_NE(o.err.find("not an XEMB file"), std::string::npos);

  // Nothing listens on port 9; every attempt fails and the run exits with 2.
  o = RunCli({"construct", "--train", P("train.jsonl"), "--embeddings", P("mining.xemb"),
              "--k", "1", "--scorer-url", "http://127.0.0.1:9", "--max-attempts", "1",
              "--out", P("p.jsonl")});
  EXPECT_EQ(o.code, 2) << o.err;
}

}  // namespace
}  // namespace xampler
