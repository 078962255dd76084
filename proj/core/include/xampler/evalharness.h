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

#ifndef XAMPLER_EVALHARNESS_H_
#define XAMPLER_EVALHARNESS_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "xampler/corpus.h"
#include "xampler/dataconstruct.h"
#include "xampler/embedding.h"
#include "xampler/retrieval.h"
#include "xampler/scorer.h"
#include "xampler/trainer.h"

namespace xampler {

// Exact-match accuracy of one method on one language, kept as a fraction
// until it is printed.
struct EvalRecord {
  std::string language;
  std::string method;
  std::string setting;
  std::int64_t correct = 0;
  std::int64_t total = 0;

  double accuracy() const {
    return static_cast<double>(correct) / static_cast<double>(total);
  }
  bool operator==(const EvalRecord &) const = default;
};

using Predictor = std::function<std::string(const Example &)>;
// Predicts a whole language at once, in input order.
using BatchPredictor =
    std::function<std::vector<std::string>(std::span<const Example>)>;

// Groups the examples of all eval sets by language (sorted) and scores each
// language independently. A language whose prediction throws is dropped and
// described in `diagnostics` (when given).
std::vector<EvalRecord> Evaluate(std::span<const Dataset> eval_sets,
                                 const BatchPredictor &predict,
                                 std::string_view method,
                                 std::string_view setting = "",
                                 std::vector<std::string> *diagnostics = nullptr);
std::vector<EvalRecord> Evaluate(std::span<const Dataset> eval_sets,
                                 const Predictor &predict,
                                 std::string_view method,
                                 std::string_view setting = "",
                                 std::vector<std::string> *diagnostics = nullptr);

// Unweighted mean of per-language accuracies.
double MacroAverage(std::span<const EvalRecord> records);
double MacroAverage(std::span<const double> values);

// Everything needed to retrieve shots for eval queries.
struct EvalInputs {
  const Dataset *pool = nullptr;
  const EmbeddingStore *pool_store = nullptr;
  const EmbeddingStore *query_store = nullptr;
  std::span<const Dataset> eval_sets;
  const RetrievalHead *head = nullptr;  // null: raw cosine
  PromptSpec prompt;
  ScorerClient *scorer = nullptr;
  int parallelism = 4;
};

std::vector<EvalRecord> EvaluateKnn(const EvalInputs &in,
                                    const RetrievalSetting &setting,
                                    std::string_view method,
                                    std::vector<std::string> *diagnostics = nullptr);
std::vector<EvalRecord> EvaluateIcl(const EvalInputs &in,
                                    const RetrievalSetting &setting,
                                    std::string_view method,
                                    std::vector<std::string> *diagnostics = nullptr);

// Fraction of eval queries whose single nearest pool example shares their
// label.
double TopOneLabelMatchRate(const EvalInputs &in);

enum class SweepAxis { kShots, kK, kLayer };

const char *SweepAxisName(SweepAxis axis);

struct SweepPoint {
  int value = 0;
  double macro_accuracy = 0.0;
  // The requested value was outside the valid range and was clamped.
  bool clamped = false;
  int effective_value = 0;

  bool operator==(const SweepPoint &) const = default;
};

struct SweepResult {
  SweepAxis axis = SweepAxis::kShots;
  std::string method;
  std::vector<SweepPoint> points;  // strictly increasing values

  // Value with the highest macro accuracy; ties go to the smaller value.
  int BestValue() const;
  bool operator==(const SweepResult &) const = default;
};

struct ShotSweep {
  std::optional<SweepResult> knn;
  std::optional<SweepResult> icl;
};

// Label-agnostic retrieval at each shot count, scored by KNN majority vote
// and/or ICL.
ShotSweep SweepShots(std::span<const int> shots, bool knn, bool icl,
                     const EvalInputs &in);

struct KSweepInputs {
  const Dataset *train = nullptr;
  const EmbeddingStore *mining_store = nullptr;
  // Base embeddings for the retrieval head; must cover train and eval ids.
  const EmbeddingStore *base_store = nullptr;
  std::span<const Dataset> eval_sets;
  ScorerClient *scorer = nullptr;
  PromptSpec prompt;
  TrainerConfig trainer;
  RetrievalSetting setting;
  ConstructOptions construct;
};

// Reruns mine -> construct -> train -> ICL evaluation per k. k above
// |train| - 1 is clamped and flagged. Duplicate k values are rejected.
SweepResult SweepK(std::span<const int> k_values, const KSweepInputs &in);

struct LayerStore {
  int layer = 0;
  const EmbeddingStore *store = nullptr;  // covers pool and eval ids
};

// n-shot KNN with raw cosine per layer.
SweepResult SweepLayers(std::span<const LayerStore> layers, const Dataset &pool,
                        std::span<const Dataset> eval_sets,
                        std::size_t n_shots = 10);

// Languages x methods accuracy table in percent.
struct ResultTable {
  std::vector<std::string> methods;
  std::vector<std::string> languages;
  std::vector<std::vector<std::optional<double>>> cells;  // [language][method]

  // Mean of each column over the languages that have a value.
  std::vector<double> ColumnAverages() const;
};

// Rows in sorted language order; columns in first-appearance order of
// "method" (suffixed with " [setting]" when a setting is present).
ResultTable TableFromRecords(std::span<const EvalRecord> records);

// Reads a CSV table whose first column is the language. '#' comment lines
// and a trailing "Avg" row are ignored.
ResultTable ParseResultTable(std::string_view csv_text);
ResultTable ReadResultTable(const std::filesystem::path &path);

enum class ReportFormat { kCsv, kMarkdown };

ReportFormat ParseReportFormat(std::string_view name);

// Table with an "Avg" row appended, values with two decimals. `comments` are
// emitted as leading '#' lines (CSV) or an HTML comment (markdown).
std::string RenderTable(const ResultTable &table, ReportFormat format,
                        std::span<const std::string> comments = {});

// One row per sweep value, one column per sweep, plus a "best" row.
std::string RenderSweeps(std::span<const SweepResult> sweeps,
                         ReportFormat format,
                         std::span<const std::string> comments = {});

void WriteTextFile(const std::string &content, const std::filesystem::path &path);

struct AblationEntry {
  std::string method;
  double accuracy = 0.0;
  double gap = 0.0;  // reference accuracy minus this accuracy
};

// Reads a "method,accuracy" CSV and fills the gaps against `reference`.
std::vector<AblationEntry> ReadAblationTable(const std::filesystem::path &path,
                                             std::string_view reference = "XAMPLER");

}  // namespace xampler

#endif  // XAMPLER_EVALHARNESS_H_
