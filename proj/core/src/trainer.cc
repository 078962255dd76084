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

#include "xampler/trainer.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <string>
#include <unordered_map>
#include <unordered_set>

#include "byte_io.h"
#include "json.hpp"
#include "xampler/error.h"

namespace xampler {

using json = nlohmann::json;

namespace {

// Forward pass of one input through the head, kept for backprop.
struct Encoded {
  std::span<const double> input;
  std::vector<double> activated;  // z = act(Wx + b)
  std::vector<double> unit;       // z / |z|
  double norm = 0.0;
};

Encoded Forward(const RetrievalHead &head, std::span<const double> x) {
  if (x.size() != head.d_in) {
    throw Error(ErrorCode::kInvalidInput,
                "head expects dimension " + std::to_string(head.d_in) +
                    ", got " + std::to_string(x.size()));
  }
  Encoded e;
  e.input = x;
  e.activated.resize(head.d_out);
  for (std::size_t r = 0; r < head.d_out; ++r) {
    const double *w = head.weight.data() + r * head.d_in;
    double u = head.bias[r];
    for (std::size_t c = 0; c < head.d_in; ++c) u += w[c] * x[c];
    e.activated[r] = head.activation == Activation::kTanh ? std::tanh(u) : u;
  }
  e.norm = Norm(e.activated);
  if (!(e.norm > 0.0) || !std::isfinite(e.norm)) {
    throw Error(ErrorCode::kNumerical, "degenerate (zero) encoded vector");
  }
  e.unit.resize(head.d_out);
  for (std::size_t r = 0; r < head.d_out; ++r) e.unit[r] = e.activated[r] / e.norm;
  return e;
}

double Dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

// Pushes dL/d(unit) back through normalization and activation into the
// parameter gradients, scaled by `weight`.
void Backward(const RetrievalHead &head, const Encoded &e,
              std::span<const double> grad_unit, double weight,
              HeadGradients &acc) {
  const double proj = Dot(e.unit, grad_unit);
  for (std::size_t r = 0; r < head.d_out; ++r) {
    double g = (grad_unit[r] - e.unit[r] * proj) / e.norm;
    if (head.activation == Activation::kTanh) {
      g *= 1.0 - e.activated[r] * e.activated[r];
    }
    g *= weight;
    if (g == 0.0) continue;
    double *gw = acc.weight.data() + r * head.d_in;
    for (std::size_t c = 0; c < head.d_in; ++c) gw[c] += g * e.input[c];
    acc.bias[r] += g;
  }
}

// Loss of one (query, positive, negatives) term; adds weight * dL/dtheta
// into `acc`.
double AccumulateTerm(const RetrievalHead &head, std::span<const double> query,
                      std::span<const double> positive,
                      std::span<const std::span<const double>> negatives,
                      double tau, double weight, HeadGradients &acc) {
  if (!(tau > 0.0)) throw Error(ErrorCode::kInvalidInput, "temperature must be > 0");
  const Encoded q = Forward(head, query);
  std::vector<Encoded> cands;
  cands.reserve(negatives.size() + 1);
  cands.push_back(Forward(head, positive));
  for (auto n : negatives) cands.push_back(Forward(head, n));

  std::vector<double> logits(cands.size());
  for (std::size_t c = 0; c < cands.size(); ++c) {
    logits[c] = Dot(q.unit, cands[c].unit) / tau;
  }
  const double top = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double l : logits) sum += std::exp(l - top);
  const double lse = top + std::log(sum);
  const double loss = lse - logits[0];

  // dL/ds_c = (softmax_c - [c == positive]) / tau
  std::vector<double> grad_q(head.d_out, 0.0);
  std::vector<double> grad_c(head.d_out);
  for (std::size_t c = 0; c < cands.size(); ++c) {
    const double p = std::exp(logits[c] - lse);
    const double ds = (p - (c == 0 ? 1.0 : 0.0)) / tau;
    if (ds == 0.0) continue;
    for (std::size_t r = 0; r < head.d_out; ++r) {
      grad_q[r] += ds * cands[c].unit[r];
      grad_c[r] = ds * q.unit[r];
    }
    Backward(head, cands[c], grad_c, weight, acc);
  }
  Backward(head, q, grad_q, weight, acc);
  return loss;
}

HeadGradients ZeroGrads(const RetrievalHead &head) {
  return {std::vector<double>(head.weight.size(), 0.0),
          std::vector<double>(head.bias.size(), 0.0)};
}

struct QueryPairs {
  std::string id;
  std::vector<std::string> positives;
  std::vector<std::string> negatives;
};

}  // namespace

const char *ActivationName(Activation a) {
  return a == Activation::kTanh ? "tanh" : "identity";
}

Activation ParseActivation(std::string_view name) {
  if (name == "identity") return Activation::kIdentity;
  if (name == "tanh") return Activation::kTanh;
  throw Error(ErrorCode::kInvalidInput,
              "unknown activation '" + std::string(name) + "'");
}

RetrievalHead RetrievalHead::Identity(std::size_t dim, Activation activation) {
  RetrievalHead head;
  head.d_in = dim;
  head.d_out = dim;
  head.weight.assign(dim * dim, 0.0);
  for (std::size_t i = 0; i < dim; ++i) head.weight[i * dim + i] = 1.0;
  head.bias.assign(dim, 0.0);
  head.activation = activation;
  return head;
}

void RetrievalHead::Validate() const {
  if (d_out < 1 || d_in < 1) {
    throw Error(ErrorCode::kInvalidInput, "head dimensions must be >= 1");
  }
  if (weight.size() != d_out * d_in || bias.size() != d_out) {
    throw Error(ErrorCode::kInvalidInput, "head parameter shapes are inconsistent");
  }
  auto finite = [](double v) { return std::isfinite(v); };
  if (!std::all_of(weight.begin(), weight.end(), finite) ||
      !std::all_of(bias.begin(), bias.end(), finite)) {
    throw Error(ErrorCode::kNumerical, "head has non-finite parameters");
  }
}

std::vector<double> Encode(const RetrievalHead &head,
                           std::span<const double> base) {
  return Forward(head, base).unit;
}

LossResult ContrastiveLoss(const RetrievalHead &head,
                           std::span<const double> query,
                           std::span<const double> positive,
                           std::span<const std::vector<double>> negatives,
                           double tau) {
  std::vector<std::span<const double>> negs(negatives.begin(), negatives.end());
  LossResult result;
  result.grads = ZeroGrads(head);
  result.loss = AccumulateTerm(head, query, positive, negs, tau, 1.0, result.grads);
  return result;
}

void AdamWStep(std::span<double> params, std::span<const double> grads,
               OptimizerState &state, double learning_rate,
               const AdamWConfig &config) {
  if (params.size() != grads.size()) {
    throw Error(ErrorCode::kInvalidInput, "AdamW: parameter/gradient shape mismatch");
  }
  for (double g : grads) {
    if (!std::isfinite(g)) {
      throw Error(ErrorCode::kNumerical, "AdamW: non-finite gradient");
    }
  }
  if (state.m.empty() && state.v.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw Error(ErrorCode::kInvalidInput, "AdamW: optimizer state shape mismatch");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(config.beta1, t);
  const double bias2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * g;
    state.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * g * g;
    const double m_hat = state.m[i] / bias1;
    const double v_hat = state.v[i] / bias2;
    params[i] -= learning_rate * (m_hat / (std::sqrt(v_hat) + config.eps) +
                                  config.weight_decay * params[i]);
  }
}

void TrainerConfig::Validate() const {
  auto fail = [](const std::string &what) {
    throw Error(ErrorCode::kInvalidInput, "trainer config: " + what);
  };
  if (epochs < 1) fail("epochs must be >= 1");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (!(learning_rate > 0.0)) fail("learning_rate must be > 0");
  if (!(temperature > 0.0)) fail("temperature must be > 0");
  if (!(adamw.beta1 > 0.0 && adamw.beta1 < 1.0)) fail("beta1 must be in (0,1)");
  if (!(adamw.beta2 > 0.0 && adamw.beta2 < 1.0)) fail("beta2 must be in (0,1)");
  if (!(adamw.eps > 0.0)) fail("eps must be > 0");
  if (adamw.weight_decay < 0.0) fail("weight_decay must be >= 0");
  if (max_pos_per_query < 1) fail("max_pos_per_query must be >= 1");
}

TrainResult Train(std::span<const TrainingPair> pairs,
                  const EmbeddingStore &base_store, const TrainerConfig &config) {
  config.Validate();

  std::vector<QueryPairs> queries;
  std::unordered_map<std::string, std::size_t> slot;
  for (const auto &p : pairs) {
    for (const auto *id : {&p.query_id, &p.candidate_id}) {
      if (!base_store.Contains(*id)) {
        throw Error(ErrorCode::kInvalidInput,
                    "no base embedding for id '" + *id + "'");
      }
    }
    auto [it, inserted] = slot.emplace(p.query_id, queries.size());
    if (inserted) queries.push_back({p.query_id, {}, {}});
    auto &q = queries[it->second];
    (p.polarity == Polarity::kPositive ? q.positives : q.negatives)
        .push_back(p.candidate_id);
  }

  TrainResult result;
  std::vector<std::size_t> trainable;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    if (queries[i].positives.empty()) {
      ++result.log.skipped_queries;
    } else {
      trainable.push_back(i);
    }
  }
  if (trainable.empty()) {
    throw Error(ErrorCode::kInvalidInput, "untrainable pair set");
  }
  result.log.trained_queries = trainable.size();

  // Widen every referenced row once; the store itself stays untouched.
  std::unordered_map<std::string, std::vector<double>> base;
  for (const auto &p : pairs) {
    for (const auto *id : {&p.query_id, &p.candidate_id}) {
      if (!base.count(*id)) base.emplace(*id, base_store.Vector(*id));
    }
  }

  RetrievalHead &head = result.head;
  head = RetrievalHead::Identity(base_store.dim(), config.activation);
  OptimizerState weight_state;
  OptimizerState bias_state;
  std::mt19937_64 rng(config.seed);

  const std::size_t batch = static_cast<std::size_t>(config.batch_size);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(trainable.begin(), trainable.end(), rng);
    double epoch_loss = 0.0;
    std::size_t epoch_terms = 0;

    for (std::size_t begin = 0; begin < trainable.size(); begin += batch) {
      const std::size_t end = std::min(trainable.size(), begin + batch);

      // Sample positives for the whole batch first; they double as
      // in-batch negatives for the other queries.
      std::vector<std::vector<std::string>> sampled(end - begin);
      for (std::size_t b = begin; b < end; ++b) {
        std::vector<std::string> pos = queries[trainable[b]].positives;
        const std::size_t take = std::min<std::size_t>(
            pos.size(), static_cast<std::size_t>(config.max_pos_per_query));
        for (std::size_t i = 0; i < take; ++i) {
          std::uniform_int_distribution<std::size_t> pick(i, pos.size() - 1);
          std::swap(pos[i], pos[pick(rng)]);
        }
        pos.resize(take);
        sampled[b - begin] = std::move(pos);
      }

      struct Term {
        const std::vector<double> *query;
        const std::vector<double> *positive;
        std::vector<std::span<const double>> negatives;
      };
      std::vector<Term> terms;
      for (std::size_t b = begin; b < end; ++b) {
        const QueryPairs &q = queries[trainable[b]];
        std::unordered_set<std::string> blocked(q.positives.begin(),
                                                q.positives.end());
        blocked.insert(q.id);
        std::vector<std::span<const double>> negatives;
        for (const auto &id : q.negatives) {
          if (blocked.insert(id).second) negatives.emplace_back(base.at(id));
        }
        for (std::size_t o = begin; o < end; ++o) {
          if (o == b) continue;
          for (const auto &id : sampled[o - begin]) {
            if (blocked.insert(id).second) negatives.emplace_back(base.at(id));
          }
        }
        for (const auto &pos_id : sampled[b - begin]) {
          terms.push_back({&base.at(q.id), &base.at(pos_id), negatives});
        }
      }

      HeadGradients grads = ZeroGrads(head);
      const double weight = 1.0 / static_cast<double>(terms.size());
      for (const auto &term : terms) {
        const double loss =
            AccumulateTerm(head, *term.query, *term.positive, term.negatives,
                           config.temperature, weight, grads);
        epoch_loss += loss;
        ++epoch_terms;
      }
      AdamWStep(head.weight, grads.weight, weight_state, config.learning_rate,
                config.adamw);
      AdamWStep(head.bias, grads.bias, bias_state, config.learning_rate,
                config.adamw);
    }
    result.log.epoch_mean_loss.push_back(epoch_loss /
                                         static_cast<double>(epoch_terms));
  }
  head.Validate();
  return result;
}

void SaveHead(const HeadCheckpoint &checkpoint,
              const std::filesystem::path &path) {
  const RetrievalHead &head = checkpoint.head;
  head.Validate();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  json header = {{"d_in", head.d_in},
                 {"d_out", head.d_out},
                 {"activation", ActivationName(head.activation)},
                 {"tau", checkpoint.temperature},
                 {"seed", checkpoint.seed},
                 {"epoch", checkpoint.epoch}};
  const std::string text = header.dump();
  internal::WriteLE<std::uint32_t>(out, static_cast<std::uint32_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  internal::WriteLE<std::uint64_t>(out, head.weight.size() + head.bias.size());
  for (double w : head.weight) internal::WriteLE(out, w);
  for (double b : head.bias) internal::WriteLE(out, b);
  out.flush();
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

HeadCheckpoint LoadHead(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  const std::string what = path.string();
  const auto len = internal::ReadLE<std::uint32_t>(in, what);
  json header;
  try {
    header = json::parse(internal::ReadBytes(in, len, what));
  } catch (const json::parse_error &) {
    throw Error(ErrorCode::kFormat, what + ": malformed head header");
  }
  HeadCheckpoint ck;
  try {
    ck.head.d_in = header.at("d_in").get<std::size_t>();
    ck.head.d_out = header.at("d_out").get<std::size_t>();
    ck.head.activation = ParseActivation(header.at("activation").get<std::string>());
    ck.temperature = header.at("tau").get<double>();
    ck.seed = header.at("seed").get<std::uint64_t>();
    ck.epoch = header.at("epoch").get<int>();
  } catch (const json::exception &) {
    throw Error(ErrorCode::kFormat, what + ": head header lacks required fields");
  }
  const auto count = internal::ReadLE<std::uint64_t>(in, what);
  if (count != ck.head.d_in * ck.head.d_out + ck.head.d_out) {
    throw Error(ErrorCode::kFormat, what + ": parameter count does not match shape");
  }
  ck.head.weight.resize(ck.head.d_in * ck.head.d_out);
  ck.head.bias.resize(ck.head.d_out);
  for (double &w : ck.head.weight) w = internal::ReadLE<double>(in, what);
  for (double &b : ck.head.bias) b = internal::ReadLE<double>(in, what);
  ck.head.Validate();
  return ck;
}

}  // namespace xampler
