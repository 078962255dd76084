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

#ifndef XAMPLER_RETRIEVAL_H_
#define XAMPLER_RETRIEVAL_H_

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "xampler/corpus.h"
#include "xampler/embedding.h"
#include "xampler/scorer.h"
#include "xampler/trainer.h"

namespace xampler {

enum class RetrievalMode { kLabelAware, kLabelAgnostic };
enum class ShotOrder { kAscending, kDescending };

const char *RetrievalModeName(RetrievalMode mode);
RetrievalMode ParseRetrievalMode(std::string_view name);
ShotOrder ParseShotOrder(std::string_view name);

struct RetrievalSetting {
  RetrievalMode mode = RetrievalMode::kLabelAgnostic;
  std::size_t n_shots = 1;
  // Ascending renders the most similar shot last, next to the query.
  ShotOrder order = ShotOrder::kAscending;

  // label_aware needs exactly one shot per class.
  void Validate(std::size_t num_labels) const;
};

struct Shot {
  Example example;
  double score = 0.0;
};

struct ShotList {
  std::string query_id;
  std::vector<Shot> shots;

  // The highest-scoring shot (ties by ascending id), or nullptr when empty.
  const Shot *Top() const;
  std::vector<Example> Examples() const;
};

// Selects shots from an English pool for queries in any language. The pool is
// encoded once at construction. A null head means raw cosine over the base
// vectors.
class ShotRetriever {
 public:
  ShotRetriever(const Dataset &pool, const EmbeddingStore &pool_store,
                const RetrievalHead *head);

  // `query_id` is excluded from the pool. label_agnostic takes the top
  // n_shots; label_aware takes the best example of each class in label-set
  // order. Either way the result is re-sorted by `setting.order` with ties
  // by ascending id. Throws when a class is absent in label_aware mode.
  ShotList Retrieve(std::string_view query_id, std::span<const double> query_base,
                    const RetrievalSetting &setting) const;

  const Dataset &pool() const { return *pool_; }

 private:
  const Dataset *pool_;
  const RetrievalHead *head_;
  std::vector<std::string> ids_;
  Matrix encoded_;
};

ShotList Retrieve(std::string_view query_id, std::span<const double> query_base,
                  const RetrievalHead *head, const Dataset &pool,
                  const EmbeddingStore &pool_store,
                  const RetrievalSetting &setting);

// Majority vote over shot labels. Ties go to the larger summed similarity,
// then to label-set order.
std::string KnnPredict(const ShotList &shots,
                       std::span<const std::string> label_set);

// Builds the ICL score request for `query`; its true label only travels in
// the out-of-band metadata.
ScoreRequest BuildIclRequest(const Example &query, const ShotList &shots,
                             const PromptSpec &spec,
                             std::span<const std::string> label_set);

Prediction IclPredict(const Example &query, const ShotList &shots,
                      ScorerClient &scorer, const PromptSpec &spec,
                      std::span<const std::string> label_set);

}  // namespace xampler

#endif  // XAMPLER_RETRIEVAL_H_
