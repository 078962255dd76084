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

#ifndef XAMPLER_EMBEDDING_H_
#define XAMPLER_EMBEDDING_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace xampler {

enum class Pooling { kMean, kPositionWeightedMean, kProviderNative };

const char *PoolingName(Pooling pooling);
Pooling ParsePooling(std::string_view name);

struct Provenance {
  std::string provider;
  int layer = 0;
  Pooling pooling = Pooling::kProviderNative;

  bool operator==(const Provenance &) const = default;
};

// Row-major dense matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
  std::span<const double> row(std::size_t i) const {
    return {data.data() + i * cols, cols};
  }
};

// Token-level hidden states of one text at one layer: T x d.
class HiddenStates {
 public:
  // Throws if tokens == 0, the payload size is not tokens * dim, or any entry
  // is non-finite.
  HiddenStates(std::size_t tokens, std::size_t dim, std::vector<double> states);

  std::size_t tokens() const { return states_.rows; }
  std::size_t dim() const { return states_.cols; }
  std::span<const double> token(std::size_t t) const { return states_.row(t); }

 private:
  Matrix states_;
};

// Arithmetic mean over tokens.
std::vector<double> MeanPool(const HiddenStates &h);

// Weighted mean with w_t = t / (1 + 2 + ... + T), t 1-indexed, so later tokens
// weigh more and the weights sum to one.
std::vector<double> PositionWeightedMeanPool(const HiddenStates &h);

// a.b / (|a||b|), clamped to [-1, 1]. Throws Error(kNumerical,
// "degenerate embedding") when either norm is zero.
double CosineSimilarity(std::span<const double> a, std::span<const double> b);

double Norm(std::span<const double> v);

// Dense vectors keyed by example id. Immutable once constructed; rows are
// stored as float32 exactly as they appear on disk.
class EmbeddingStore {
 public:
  EmbeddingStore() = default;
  // Throws if ids are not unique, data.size() != ids.size() * dim, or any
  // value is non-finite.
  EmbeddingStore(std::vector<std::string> ids, std::size_t dim,
                 std::vector<float> data, Provenance provenance);

  std::size_t rows() const { return ids_.size(); }
  std::size_t dim() const { return dim_; }
  bool empty() const { return ids_.empty(); }
  const std::vector<std::string> &ids() const { return ids_; }
  const Provenance &provenance() const { return provenance_; }
  const std::vector<float> &data() const { return data_; }

  std::span<const float> row(std::size_t i) const {
    return {data_.data() + i * dim_, dim_};
  }
  std::optional<std::size_t> Find(std::string_view id) const;
  bool Contains(std::string_view id) const { return Find(id).has_value(); }

  // Row widened to double. Throws Error(kInvalidInput) for unknown ids.
  std::vector<double> Vector(std::string_view id) const;
  std::vector<double> RowAsDouble(std::size_t i) const;
  Matrix ToMatrix() const;

  bool operator==(const EmbeddingStore &other) const {
    return ids_ == other.ids_ && dim_ == other.dim_ && data_ == other.data_ &&
           provenance_ == other.provenance_;
  }

 private:
  std::vector<std::string> ids_;
  std::size_t dim_ = 0;
  std::vector<float> data_;
  Provenance provenance_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct ScoredId {
  std::string id;
  double score = 0.0;

  bool operator==(const ScoredId &) const = default;
};

// Orders by score descending, then id ascending.
bool RanksBefore(const ScoredId &a, const ScoredId &b);

// Exact cosine top-k over the rows of `rows` (labelled by `ids`), skipping
// excluded ids. Returns min(k, eligible) entries ordered by RanksBefore.
std::vector<ScoredId> TopKCosine(std::span<const std::string> ids,
                                 const Matrix &rows,
                                 std::span<const double> query, std::size_t k,
                                 const std::unordered_set<std::string> &exclude);

std::vector<ScoredId> TopK(const EmbeddingStore &store,
                           std::span<const double> query, std::size_t k,
                           const std::unordered_set<std::string> &exclude = {});

// XEMB v1: "XEMB", u32 version, u32 rows, u32 dim, u32 json length, JSON
// {"ids": [...], "provenance": {...}}, rows*dim float32. All integers and
// floats little-endian.
EmbeddingStore LoadEmbeddings(const std::filesystem::path &path);
void SaveEmbeddings(const EmbeddingStore &store,
                    const std::filesystem::path &path);

}  // namespace xampler

#endif  // XAMPLER_EMBEDDING_H_
