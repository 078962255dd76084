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

#ifndef XAMPLER_CORPUS_H_
#define XAMPLER_CORPUS_H_

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace xampler {

// One labeled text item. Queries are Examples whose label is withheld at
// prediction time.
struct Example {
  std::string id;
  std::string text;
  std::string label;
  std::string language;  // opaque tag, e.g. "eng_Latn"

  bool operator==(const Example &) const = default;
};

enum class DatasetRole { kTrain, kEval };

const char *DatasetRoleName(DatasetRole role);

// A labeled classification dataset. The order of `label_set` is significant:
// label scoring and per-class shot selection iterate it.
struct Dataset {
  std::string name;
  std::vector<std::string> label_set;
  std::vector<Example> examples;
  DatasetRole role = DatasetRole::kTrain;

  bool operator==(const Dataset &) const = default;

  // Throws Error(kInvalidInput) when an invariant is broken: empty or
  // duplicated label set, duplicate or empty ids, empty text, or a label
  // outside the label set.
  void Validate() const;

  bool HasLabel(std::string_view label) const;
};

// Maps example id to its position in `ds.examples`.
std::unordered_map<std::string, std::size_t> IndexById(const Dataset &ds);

// The top-k mined candidates for one query, in descending similarity.
struct CandidateSet {
  std::string query_id;
  std::vector<std::string> candidate_ids;
  std::vector<double> scores;  // parallel to candidate_ids

  bool operator==(const CandidateSet &) const = default;
};

// Reads a JSON-lines dataset. Each record is
//   {"id": ..., "text": ..., "label": ..., "language": ...}
// and an optional first line {"label_set": [...], "name": ...} pins the class
// order. Without it the label set is the sorted union of labels and the name
// is the file stem. Errors name the offending line.
Dataset LoadDataset(const std::filesystem::path &path, DatasetRole role);

// Writes `ds` with a header line so that LoadDataset reproduces it exactly.
void SaveDataset(const Dataset &ds, const std::filesystem::path &path);

}  // namespace xampler

#endif  // XAMPLER_CORPUS_H_
