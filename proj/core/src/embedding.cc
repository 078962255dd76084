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

#include "xampler/embedding.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "byte_io.h"
#include "json.hpp"
#include "xampler/error.h"

namespace xampler {

using json = nlohmann::json;
using internal::ReadBytes;
using internal::ReadLE;
using internal::WriteLE;

namespace {

constexpr char kMagic[4] = {'X', 'E', 'M', 'B'};
constexpr std::uint32_t kVersion = 1;

}  // namespace

const char *PoolingName(Pooling pooling) {
  switch (pooling) {
    case Pooling::kMean: return "mean";
    case Pooling::kPositionWeightedMean: return "position_weighted_mean";
    case Pooling::kProviderNative: return "provider_native";
  }
  return "provider_native";
}

Pooling ParsePooling(std::string_view name) {
  if (name == "mean") return Pooling::kMean;
  if (name == "position_weighted_mean") return Pooling::kPositionWeightedMean;
  if (name == "provider_native") return Pooling::kProviderNative;
  throw Error(ErrorCode::kInvalidInput,
              "unknown pooling '" + std::string(name) + "'");
}

HiddenStates::HiddenStates(std::size_t tokens, std::size_t dim,
                           std::vector<double> states) {
  if (tokens == 0) {
    throw Error(ErrorCode::kInvalidInput, "hidden states need at least one token");
  }
  if (states.size() != tokens * dim) {
    throw Error(ErrorCode::kInvalidInput, "hidden states payload is not T x d");
  }
  for (double v : states) {
    if (!std::isfinite(v)) {
      throw Error(ErrorCode::kNumerical, "non-finite hidden state");
    }
  }
  states_.rows = tokens;
  states_.cols = dim;
  states_.data = std::move(states);
}

std::vector<double> MeanPool(const HiddenStates &h) {
  std::vector<double> out(h.dim(), 0.0);
  for (std::size_t t = 0; t < h.tokens(); ++t) {
    auto row = h.token(t);
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += row[j];
  }
  const double inv = 1.0 / static_cast<double>(h.tokens());
  for (double &v : out) v *= inv;
  return out;
}

std::vector<double> PositionWeightedMeanPool(const HiddenStates &h) {
  const double tokens = static_cast<double>(h.tokens());
  const double total = tokens * (tokens + 1.0) / 2.0;
  std::vector<double> out(h.dim(), 0.0);
  for (std::size_t t = 0; t < h.tokens(); ++t) {
    const double w = static_cast<double>(t + 1) / total;
    auto row = h.token(t);
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += w * row[j];
  }
  return out;
}

double Norm(std::span<const double> v) {
  return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
}

double CosineSimilarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::kInvalidInput, "cosine similarity: dimension mismatch");
  }
  const double na = Norm(a);
  const double nb = Norm(b);
  if (!(na > 0.0) || !(nb > 0.0)) {
    throw Error(ErrorCode::kNumerical, "degenerate embedding");
  }
  const double dot = std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
  return std::clamp(dot / (na * nb), -1.0, 1.0);
}

EmbeddingStore::EmbeddingStore(std::vector<std::string> ids, std::size_t dim,
                               std::vector<float> data, Provenance provenance)
    : ids_(std::move(ids)),
      dim_(dim),
      data_(std::move(data)),
      provenance_(std::move(provenance)) {
  if (data_.size() != ids_.size() * dim_) {
    throw Error(ErrorCode::kInvalidInput,
                "embedding matrix size does not match ids x dim");
  }
  index_.reserve(ids_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (!index_.emplace(ids_[i], i).second) {
      throw Error(ErrorCode::kInvalidInput,
                  "duplicate embedding id '" + ids_[i] + "'");
    }
  }
  for (float v : data_) {
    if (!std::isfinite(v)) {
      throw Error(ErrorCode::kNumerical, "non-finite embedding value");
    }
  }
}

std::optional<std::size_t> EmbeddingStore::Find(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<double> EmbeddingStore::RowAsDouble(std::size_t i) const {
  auto r = row(i);
  return {r.begin(), r.end()};
}

std::vector<double> EmbeddingStore::Vector(std::string_view id) const {
  auto i = Find(id);
  if (!i) {
    throw Error(ErrorCode::kInvalidInput,
                "no embedding row for id '" + std::string(id) + "'");
  }
  return RowAsDouble(*i);
}

Matrix EmbeddingStore::ToMatrix() const {
  Matrix m(rows(), dim_);
  std::copy(data_.begin(), data_.end(), m.data.begin());
  return m;
}

bool RanksBefore(const ScoredId &a, const ScoredId &b) {
  if (a.score != b.score) return a.score > b.score;
  return a.id < b.id;
}

std::vector<ScoredId> TopKCosine(std::span<const std::string> ids,
                                 const Matrix &rows,
                                 std::span<const double> query, std::size_t k,
                                 const std::unordered_set<std::string> &exclude) {
  if (k == 0) throw Error(ErrorCode::kInvalidInput, "top-k needs k >= 1");
  if (ids.size() != rows.rows) {
    throw Error(ErrorCode::kInvalidInput, "top-k: ids do not match rows");
  }
  std::vector<ScoredId> scored;
  scored.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (exclude.count(ids[i])) continue;
    scored.push_back({ids[i], CosineSimilarity(query, rows.row(i))});
  }
  const std::size_t n = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + n, scored.end(),
                    RanksBefore);
  scored.resize(n);
  return scored;
}

std::vector<ScoredId> TopK(const EmbeddingStore &store,
                           std::span<const double> query, std::size_t k,
                           const std::unordered_set<std::string> &exclude) {
  if (store.empty()) throw Error(ErrorCode::kInvalidInput, "top-k over empty store");
  return TopKCosine(store.ids(), store.ToMatrix(), query, k, exclude);
}

EmbeddingStore LoadEmbeddings(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  const std::string what = path.string();

  char magic[4] = {};
  in.read(magic, 4);
  if (in.gcount() != 4 || !std::equal(magic, magic + 4, kMagic)) {
    throw Error(ErrorCode::kFormat, what + ": not an XEMB file");
  }
  const auto version = ReadLE<std::uint32_t>(in, what);
  if (version != kVersion) {
    throw Error(ErrorCode::kFormat,
                what + ": unsupported XEMB version " + std::to_string(version));
  }
  const auto rows = ReadLE<std::uint32_t>(in, what);
  const auto dim = ReadLE<std::uint32_t>(in, what);
  const auto meta_len = ReadLE<std::uint32_t>(in, what);
  const std::string meta_text = ReadBytes(in, meta_len, what);

  json meta;
  try {
    meta = json::parse(meta_text);
  } catch (const json::parse_error &e) {
    throw Error(ErrorCode::kFormat, what + ": malformed metadata block");
  }
  if (!meta.contains("ids") || !meta["ids"].is_array()) {
    throw Error(ErrorCode::kFormat, what + ": metadata lacks ids");
  }
  auto ids = meta["ids"].get<std::vector<std::string>>();
  if (ids.size() != rows) {
    throw Error(ErrorCode::kFormat,
                what + ": dimension mismatch: header declares " +
                    std::to_string(rows) + " rows but " +
                    std::to_string(ids.size()) + " ids");
  }
  Provenance prov;
  if (auto it = meta.find("provenance"); it != meta.end() && it->is_object()) {
    prov.provider = it->value("provider", "");
    prov.layer = it->value("layer", 0);
    prov.pooling = ParsePooling(it->value("pooling", "provider_native"));
  }

  const std::size_t count = static_cast<std::size_t>(rows) * dim;
  std::vector<float> data(count);
  for (std::size_t i = 0; i < count; ++i) {
    data[i] = ReadLE<float>(in, what + " (payload)");
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw Error(ErrorCode::kFormat, what + ": trailing bytes after payload");
  }
  return EmbeddingStore(std::move(ids), dim, std::move(data), std::move(prov));
}

void SaveEmbeddings(const EmbeddingStore &store,
                    const std::filesystem::path &path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  json meta = {{"ids", store.ids()},
               {"provenance",
                {{"provider", store.provenance().provider},
                 {"layer", store.provenance().layer},
                 {"pooling", PoolingName(store.provenance().pooling)}}}};
  const std::string meta_text = meta.dump();

  out.write(kMagic, 4);
  WriteLE<std::uint32_t>(out, kVersion);
  WriteLE<std::uint32_t>(out, static_cast<std::uint32_t>(store.rows()));
  WriteLE<std::uint32_t>(out, static_cast<std::uint32_t>(store.dim()));
  WriteLE<std::uint32_t>(out, static_cast<std::uint32_t>(meta_text.size()));
  out.write(meta_text.data(), static_cast<std::streamsize>(meta_text.size()));
  for (float v : store.data()) WriteLE(out, v);
  out.flush();
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

}  // namespace xampler
