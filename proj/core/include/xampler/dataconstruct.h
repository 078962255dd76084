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

#ifndef XAMPLER_DATACONSTRUCT_H_
#define XAMPLER_DATACONSTRUCT_H_

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "xampler/corpus.h"
#include "xampler/embedding.h"
#include "xampler/scorer.h"

namespace xampler {

enum class Polarity { kPositive, kNegative };

const char *PolarityName(Polarity p);

// One scored (query, candidate) pair. Positive iff the scorer, given the
// candidate as the only shot, predicted the query's true label.
struct TrainingPair {
  std::string query_id;
  std::string candidate_id;
  Polarity polarity = Polarity::kNegative;
  int mined_rank = 0;  // 1-based rank in the query's CandidateSet
  double mined_score = 0.0;

  bool operator==(const TrainingPair &) const = default;
};

// One CandidateSet per training example: its top-k nearest neighbours in the
// same pool by cosine, itself excluded.
std::vector<CandidateSet> MineCandidates(const Dataset &train,
                                         const EmbeddingStore &store,
                                         std::size_t k);

struct ConstructOptions {
  int parallelism = 4;
  // When set, scored pairs are flushed here every `checkpoint_every` pairs
  // and reloaded on the next run. The file is removed after success.
  std::optional<std::filesystem::path> checkpoint;
  std::size_t checkpoint_every = 100;
};

// Scores every (query, candidate) with one 1-shot prompt. Issues exactly one
// scorer call per pair not already present in the checkpoint.
std::vector<TrainingPair> ConstructPairs(const Dataset &train,
                                         std::span<const CandidateSet> cands,
                                         ScorerClient &scorer,
                                         const PromptSpec &spec,
                                         const ConstructOptions &options = {});

// JSONL: {"query_id","candidate_id","polarity","mined_rank","mined_score"}.
void SavePairs(std::span<const TrainingPair> pairs,
               const std::filesystem::path &path);
std::vector<TrainingPair> LoadPairs(const std::filesystem::path &path);

// JSONL: {"query_id","candidate_ids":[...],"scores":[...]}.
void SaveCandidates(std::span<const CandidateSet> cands,
                    const std::filesystem::path &path);
std::vector<CandidateSet> LoadCandidates(const std::filesystem::path &path);

}  // namespace xampler

#endif  // XAMPLER_DATACONSTRUCT_H_
