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

#include "xampler/corpus.h"

#include <gtest/gtest.h>

#include <random>

#include "test_util.h"
#include "xampler/error.h"

namespace xampler {
namespace {

using testing::TempDir;
using testing::WriteFile;

std::string ErrorText(const std::filesystem::path &p) {
  try {
    LoadDataset(p, DatasetRole::kEval);
  } catch (const Error &e) {
    return e.what();
  }
  return "";
}

TEST(LoadDatasetTest, HeaderPinsLabelOrder) {
  TempDir dir;
  WriteFile(dir / "d.jsonl",
            R"({"label_set":["sports","politics","science"],"name":"toy"})"
            "\n"
            R"({"id":"a","text":"goal scored","label":"sports","language":"eng_Latn"})"
            "\n");
  Dataset ds = LoadDataset(dir / "d.jsonl", DatasetRole::kEval);
  EXPECT_EQ(ds.name, "toy");
  EXPECT_EQ(ds.label_set, (std::vector<std::string>{"sports", "politics", "science"}));
  ASSERT_EQ(ds.examples.size(), 1u);
  EXPECT_EQ(ds.examples[0].text, "goal scored");
  EXPECT_EQ(ds.role, DatasetRole::kEval);
}

TEST(LoadDatasetTest, LabelSetDefaultsToSortedUnion) {
  TempDir dir;
  WriteFile(dir / "d.jsonl",
            R"({"id":"a","text":"x","label":"zeta","language":"l"})"
            "\n\n"
            R"({"id":"b","text":"y","label":"alpha","language":"l"})"
            "\n"
            R"({"id":"c","text":"z","label":"zeta","language":"l"})"
            "\n");
  Dataset ds = LoadDataset(dir / "d.jsonl", DatasetRole::kTrain);
  EXPECT_EQ(ds.label_set, (std::vector<std::string>{"alpha", "zeta"}));
  EXPECT_EQ(ds.name, "d");
}

TEST(LoadDatasetTest, DuplicateIdNamesSecondLine) {
  TempDir dir;
  std::string text;
  for (int i = 0; i < 5; ++i) {
    std::string id = (i == 1 || i == 4) ? "q1" : "x" + std::to_string(i);
    text += R"({"id":")" + id + R"(","text":"t","label":"a","language":"l"})" "\n";
  }
  WriteFile(dir / "d.jsonl", text);
  const std::string msg = ErrorText(dir / "d.jsonl");
  EXPECT_NE(msg.find(":5:"), std::string::npos) << msg;
  EXPECT_NE(msg.find("duplicate id 'q1'"), std::string::npos) << msg;
  EXPECT_NE(msg.find("line 2"), std::string::npos) << msg;
}

TEST(LoadDatasetTest, RejectsLabelOutsideDeclaredSet) {
  TempDir dir;
  WriteFile(dir / "d.jsonl",
            R"({"label_set":["a"]})"
            "\n"
            R"({"id":"x","text":"t","label":"b","language":"l"})"
            "\n");
  EXPECT_NE(ErrorText(dir / "d.jsonl").find("outside the declared label set"),
            std::string::npos);
}

TEST(LoadDatasetTest, MalformedRecordsAreNamed) {
  TempDir dir;
  WriteFile(dir / "a.jsonl", "{not json}\n");
  EXPECT_NE(ErrorText(dir / "a.jsonl").find(":1: malformed JSON"), std::string::npos);
  WriteFile(dir / "b.jsonl", R"({"id":"x","text":"t","language":"l"})" "\n");
  EXPECT_NE(ErrorText(dir / "b.jsonl").find("\"label\""), std::string::npos);
  WriteFile(dir / "c.jsonl", R"({"id":"x","text":"","label":"a","language":"l"})" "\n");
  EXPECT_NE(ErrorText(dir / "c.jsonl").find("empty text"), std::string::npos);
  WriteFile(dir / "d.jsonl", "\n\n");
  EXPECT_NE(ErrorText(dir / "d.jsonl").find("empty dataset"), std::string::npos);
  WriteFile(dir / "e.jsonl",
            R"({"id":"x","text":"t","label":"a","language":"l"})"
            "\n"
            R"({"label_set":["a"]})"
            "\n");
  EXPECT_NE(ErrorText(dir / "e.jsonl").find("first line"), std::string::npos);
}

TEST(LoadDatasetTest, MissingFileIsIoError) {
  try {
    LoadDataset("/nonexistent/x.jsonl", DatasetRole::kTrain);
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.code(), ErrorCode::kIo);
  }
}

TEST(SaveDatasetTest, EmptyDatasetWithLabelsRoundTrips) {
  TempDir dir;
  Dataset ds;
  ds.name = "empty";
  ds.label_set = {"a", "b"};
  ds.role = DatasetRole::kEval;
  SaveDataset(ds, dir / "e.jsonl");
  EXPECT_EQ(LoadDataset(dir / "e.jsonl", DatasetRole::kEval), ds);
}

TEST(SaveDatasetTest, NonAsciiTextIsByteIdentical) {
  TempDir dir;
  Dataset ds;
  ds.name = "amh";
  ds.label_set = {"ስፖርት", "science"};
  ds.examples = {{"1", "ሰላም ለዓለም \"quoted\" \\ tab\t", "ስፖርት", "amh_Ethi"},
                 {"2", "日本語のテキスト 🙂", "science", "jpn_Jpan"}};
  SaveDataset(ds, dir / "u.jsonl");
  Dataset back = LoadDataset(dir / "u.jsonl", DatasetRole::kTrain);
  ASSERT_EQ(back.examples.size(), 2u);
  EXPECT_EQ(back.examples[0].text, ds.examples[0].text);
  EXPECT_EQ(back.examples[1].text, ds.examples[1].text);
  EXPECT_EQ(back.label_set, ds.label_set);
}

Dataset RandomDataset(std::mt19937_64 &rng, std::size_t n) {
  Dataset ds;
  ds.name = "rand";
  std::uniform_int_distribution<int> labels(2, 7);
  const int k = labels(rng);
  for (int c = k - 1; c >= 0; --c) ds.label_set.push_back("label" + std::to_string(c));
  std::uniform_int_distribution<int> pick(0, k - 1);
  std::uniform_int_distribution<int> ch(32, 126);
  for (std::size_t i = 0; i < n; ++i) {
    std::string text;
    for (int j = 0; j < 12; ++j) text += static_cast<char>(ch(rng));
    ds.examples.push_back({"id" + std::to_string(i), text, ds.label_set[pick(rng)],
                           i % 2 ? "eng_Latn" : "swh_Latn"});
  }
  return ds;
}

TEST(SaveDatasetTest, RoundTripPropertyOverRandomDatasets) {
  TempDir dir;
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 25; ++trial) {
    Dataset ds = RandomDataset(rng, 100);
    SaveDataset(ds, dir / "r.jsonl");
    EXPECT_EQ(LoadDataset(dir / "r.jsonl", DatasetRole::kTrain), ds);
  }
}

TEST(DatasetValidateTest, RejectsForeignLabelsForEveryGeneratedDataset) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    Dataset ds = RandomDataset(rng, 10);
    EXPECT_NO_THROW(ds.Validate());
    ds.examples[trial % 10].label = "not-a-label";
    EXPECT_THROW(ds.Validate(), Error);
  }
}

TEST(DatasetValidateTest, RejectsDuplicatesAndEmptyLabelSet) {
  Dataset ds;
  ds.name = "x";
  EXPECT_THROW(ds.Validate(), Error);
  ds.label_set = {"a", "a"};
  EXPECT_THROW(ds.Validate(), Error);
  ds.label_set = {"a"};
  ds.examples = {{"1", "t", "a", "l"}, {"1", "u", "a", "l"}};
  EXPECT_THROW(ds.Validate(), Error);
}

}  // namespace
}  // namespace xampler
