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

#ifndef XAMPLER_SELFTEST_H_
#define XAMPLER_SELFTEST_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "xampler/corpus.h"
#include "xampler/embedding.h"
#include "xampler/evalharness.h"
#include "xampler/trainer.h"

namespace xampler {

// Clustered Gaussian stand-in for a multilingual corpus. Base vectors put the
// class signal in the first `topic_dims` coordinates and per-example noise
// plus a per-language offset everywhere else, so raw cosine is a weak
// retriever and a learned head can do much better. Mining vectors are a
// separate, moderately informative view of the training pool only.
struct SyntheticConfig {
  std::uint64_t seed = 7;
  std::size_t num_classes = 7;
  std::size_t train_size = 100;
  std::size_t eval_per_language = 70;
  std::vector<std::string> languages = {"eng_Latn", "hau_Latn", "amh_Ethi"};
  std::size_t dim = 32;
  std::size_t topic_dims = 8;
  double topic_noise = 0.35;
  double nuisance_noise = 1.0;
  double language_shift = 0.8;
  std::size_t mining_dim = 16;
  double mining_noise = 0.6;
};

struct SyntheticCorpus {
  Dataset train;
  std::vector<Dataset> eval_sets;  // one per language
  EmbeddingStore mining_store;     // train ids only
  EmbeddingStore base_store;       // train and eval ids
};

SyntheticCorpus MakeSyntheticCorpus(const SyntheticConfig &config);

struct SelftestOptions {
  std::uint64_t seed = 7;
  std::size_t k = 10;
  std::size_t shots = 7;
  int parallelism = 4;
  TrainerConfig trainer;  // seed is overridden by `seed`
  // Scratch directory for the intermediate files; a fresh temporary one is
  // used (and removed) when unset.
  std::optional<std::filesystem::path> workdir;

  SelftestOptions();
};

struct SelftestReport {
  std::size_t num_pairs = 0;
  std::size_t num_positive = 0;
  std::size_t scorer_calls_construct = 0;
  TrainingLog log;
  double identity_top1 = 0.0;
  double trained_top1 = 0.0;
  std::vector<EvalRecord> icl_identity;
  std::vector<EvalRecord> icl_trained;
  std::uint64_t head_fingerprint = 0;
};

// Runs mine -> construct -> train -> retrieve -> eval-icl on synthetic data
// with the similarity-gated mock scorer, passing every stage through its
// on-disk format.
SelftestReport RunSelftest(const SelftestOptions &options);

std::string FormatSelftestReport(const SelftestReport &report);

// FNV-1a over the raw bytes of the head parameters.
std::uint64_t Fingerprint(const RetrievalHead &head);

}  // namespace xampler

#endif  // XAMPLER_SELFTEST_H_
