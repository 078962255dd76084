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

#ifndef XAMPLER_TRAINER_H_
#define XAMPLER_TRAINER_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "xampler/dataconstruct.h"
#include "xampler/embedding.h"

namespace xampler {

enum class Activation { kIdentity, kTanh };

const char *ActivationName(Activation a);
Activation ParseActivation(std::string_view name);

// Trainable map from frozen base embeddings into retrieval space, shared by
// queries and candidates: normalize(activation(W x + b)).
struct RetrievalHead {
  std::size_t d_in = 0;
  std::size_t d_out = 0;
  std::vector<double> weight;  // d_out x d_in, row-major
  std::vector<double> bias;    // d_out
  Activation activation = Activation::kIdentity;

  static RetrievalHead Identity(std::size_t dim,
                                Activation activation = Activation::kIdentity);

  void Validate() const;
  bool operator==(const RetrievalHead &) const = default;
};

struct HeadGradients {
  std::vector<double> weight;
  std::vector<double> bias;
};

// Unit-norm encoding. Throws Error(kNumerical) if the pre-normalization
// vector is zero, Error(kInvalidInput) on a dimension mismatch.
std::vector<double> Encode(const RetrievalHead &head,
                           std::span<const double> base);

struct LossResult {
  double loss = 0.0;
  HeadGradients grads;
};

// InfoNCE over encoded similarities:
//   loss = -log( exp(s+/tau) / (exp(s+/tau) + sum_j exp(s-_j/tau)) )
// with s the dot product of unit-norm encodings. Gradients are analytic with
// respect to the head parameters and account for every input passing
// through the shared head.
LossResult ContrastiveLoss(const RetrievalHead &head,
                           std::span<const double> query,
                           std::span<const double> positive,
                           std::span<const std::vector<double>> negatives,
                           double tau);

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

struct OptimizerState {
  std::int64_t step = 0;
  std::vector<double> m;
  std::vector<double> v;
};

// One decoupled-weight-decay Adam update in place. Moment buffers are
// allocated on the first call. Throws Error(kNumerical) on a non-finite
// gradient, leaving params and state untouched.
void AdamWStep(std::span<double> params, std::span<const double> grads,
               OptimizerState &state, double learning_rate,
               const AdamWConfig &config);

struct TrainerConfig {
  int epochs = 50;
  int batch_size = 16;
  double learning_rate = 2e-5;
  AdamWConfig adamw;
  double temperature = 0.05;
  std::uint64_t seed = 0;
  int max_pos_per_query = 1;
  Activation activation = Activation::kIdentity;

  void Validate() const;
};

struct TrainingLog {
  std::vector<double> epoch_mean_loss;
  std::size_t trained_queries = 0;
  std::size_t skipped_queries = 0;  // no positive candidate

  bool operator==(const TrainingLog &) const = default;
};

struct TrainResult {
  RetrievalHead head;
  TrainingLog log;
};

// Starts from the identity head. Each epoch shuffles the trainable queries
// with the seeded generator, walks them in batches of `batch_size` (the last
// partial batch included), samples positives per query, and contrasts them
// against the query's mined negatives plus the other sampled positives in the
// batch. One AdamW step per batch on the mean batch loss.
TrainResult Train(std::span<const TrainingPair> pairs,
                  const EmbeddingStore &base_store, const TrainerConfig &config);

struct HeadCheckpoint {
  RetrievalHead head;
  double temperature = 0.05;
  std::uint64_t seed = 0;
  int epoch = 0;
};

// JSON header {d_in, d_out, activation, tau, seed, epoch} prefixed by its u32
// LE length, then a u64 LE parameter count and the float64 LE parameters
// (weight row-major, then bias).
void SaveHead(const HeadCheckpoint &checkpoint,
              const std::filesystem::path &path);
HeadCheckpoint LoadHead(const std::filesystem::path &path);

}  // namespace xampler

#endif  // XAMPLER_TRAINER_H_
