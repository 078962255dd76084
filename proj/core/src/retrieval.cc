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

#include "xampler/retrieval.h"

#include <algorithm>
#include <map>
#include <unordered_set>

#include "xampler/error.h"

namespace xampler {

const char *RetrievalModeName(RetrievalMode mode) {
  return mode == RetrievalMode::kLabelAware ? "label_aware" : "label_agnostic";
}

RetrievalMode ParseRetrievalMode(std::string_view name) {
  if (name == "label_aware") return RetrievalMode::kLabelAware;
  if (name == "label_agnostic") return RetrievalMode::kLabelAgnostic;
  throw Error(ErrorCode::kInvalidInput,
              "unknown retrieval mode '" + std::string(name) + "'");
}

ShotOrder ParseShotOrder(std::string_view name) {
  if (name == "asc") return ShotOrder::kAscending;
  if (name == "desc") return ShotOrder::kDescending;
  throw Error(ErrorCode::kInvalidInput,
              "unknown shot order '" + std::string(name) + "'");
}

void RetrievalSetting::Validate(std::size_t num_labels) const {
  if (n_shots < 1) {
    throw Error(ErrorCode::kInvalidInput, "n_shots must be >= 1");
  }
  if (mode == RetrievalMode::kLabelAware && n_shots != num_labels) {
    throw Error(ErrorCode::kInvalidInput,
                "label_aware retrieval needs n_shots == number of classes (" +
                    std::to_string(num_labels) + "), got " +
                    std::to_string(n_shots));
  }
}

const Shot *ShotList::Top() const {
  const Shot *best = nullptr;
  for (const auto &s : shots) {
    if (!best || s.score > best->score ||
        (s.score == best->score && s.example.id < best->example.id)) {
      best = &s;
    }
  }
  return best;
}

std::vector<Example> ShotList::Examples() const {
  std::vector<Example> out;
  out.reserve(shots.size());
  for (const auto &s : shots) out.push_back(s.example);
  return out;
}

ShotRetriever::ShotRetriever(const Dataset &pool,
                             const EmbeddingStore &pool_store,
                             const RetrievalHead *head)
    : pool_(&pool), head_(head) {
  const std::size_t dim = head ? head->d_out : pool_store.dim();
  encoded_ = Matrix(pool.examples.size(), dim);
  ids_.reserve(pool.examples.size());
  for (std::size_t i = 0; i < pool.examples.size(); ++i) {
    const auto &id = pool.examples[i].id;
    ids_.push_back(id);
    std::vector<double> base = pool_store.Vector(id);
    if (head) base = Encode(*head, base);
    std::copy(base.begin(), base.end(), encoded_.row(i).begin());
  }
}

ShotList ShotRetriever::Retrieve(std::string_view query_id,
                                 std::span<const double> query_base,
                                 const RetrievalSetting &setting) const {
  setting.Validate(pool_->label_set.size());
  std::vector<double> query(query_base.begin(), query_base.end());
  if (head_) query = Encode(*head_, query);

  ShotList out;
  out.query_id = std::string(query_id);
  if (ids_.empty()) {
    if (setting.mode == RetrievalMode::kLabelAware) {
      throw Error(ErrorCode::kInvalidInput,
                  "label_aware retrieval: class '" + pool_->label_set.front() +
                      "' is absent from the pool");
    }
    return out;
  }

  const std::unordered_set<std::string> exclude = {std::string(query_id)};
  std::vector<ScoredId> picked;
  if (setting.mode == RetrievalMode::kLabelAgnostic) {
    picked = TopKCosine(ids_, encoded_, query, setting.n_shots, exclude);
  } else {
    auto ranked = TopKCosine(ids_, encoded_, query, ids_.size(), exclude);
    const auto index = IndexById(*pool_);
    for (const auto &label : pool_->label_set) {
      auto it = std::find_if(ranked.begin(), ranked.end(), [&](const ScoredId &s) {
        return pool_->examples[index.at(s.id)].label == label;
      });
      if (it == ranked.end()) {
        throw Error(ErrorCode::kInvalidInput,
                    "label_aware retrieval: class '" + label +
                        "' is absent from the pool");
      }
      picked.push_back(*it);
    }
  }

  const bool ascending = setting.order == ShotOrder::kAscending;
  std::sort(picked.begin(), picked.end(),
            [ascending](const ScoredId &a, const ScoredId &b) {
              if (a.score != b.score) {
                return ascending ? a.score < b.score : a.score > b.score;
              }
              return a.id < b.id;
            });
  const auto index = IndexById(*pool_);
  for (auto &s : picked) {
    out.shots.push_back({pool_->examples[index.at(s.id)], s.score});
  }
  return out;
}

ShotList Retrieve(std::string_view query_id, std::span<const double> query_base,
                  const RetrievalHead *head, const Dataset &pool,
                  const EmbeddingStore &pool_store,
                  const RetrievalSetting &setting) {
  return ShotRetriever(pool, pool_store, head)
      .Retrieve(query_id, query_base, setting);
}

std::string KnnPredict(const ShotList &shots,
                       std::span<const std::string> label_set) {
  if (shots.shots.empty()) {
    throw Error(ErrorCode::kInvalidInput, "KNN prediction needs at least one shot");
  }
  struct Tally {
    int votes = 0;
    double similarity = 0.0;
  };
  std::map<std::string, Tally> tally;
  for (const auto &s : shots.shots) {
    auto &t = tally[s.example.label];
    ++t.votes;
    t.similarity += s.score;
  }
  auto order_of = [&](const std::string &label) {
    auto it = std::find(label_set.begin(), label_set.end(), label);
    return static_cast<std::size_t>(it - label_set.begin());
  };
  const std::string *best = nullptr;
  const Tally *best_tally = nullptr;
  for (const auto &[label, t] : tally) {
    bool better = !best || t.votes > best_tally->votes ||
                  (t.votes == best_tally->votes &&
                   (t.similarity > best_tally->similarity ||
                    (t.similarity == best_tally->similarity &&
                     order_of(label) < order_of(*best))));
    if (better) {
      best = &label;
      best_tally = &t;
    }
  }
  return *best;
}

ScoreRequest BuildIclRequest(const Example &query, const ShotList &shots,
                             const PromptSpec &spec,
                             std::span<const std::string> label_set) {
  const auto examples = shots.Examples();
  ScoreRequest req;
  req.prompt_prefix = RenderPrompt(spec, examples, query.text);
  req.continuations.assign(label_set.begin(), label_set.end());
  PromptMeta meta;
  for (const auto &e : examples) meta.shot_labels.push_back(e.label);
  if (const Shot *top = shots.Top()) meta.top_shot_label = top->example.label;
  meta.query_true_label = query.label;
  req.meta = std::move(meta);
  return req;
}

Prediction IclPredict(const Example &query, const ShotList &shots,
                      ScorerClient &scorer, const PromptSpec &spec,
                      std::span<const std::string> label_set) {
  return ScoreLabels(scorer, BuildIclRequest(query, shots, spec, label_set));
}

}  // namespace xampler
