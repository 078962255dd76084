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

#include "xampler/selftest.h"

#include <cstdio>
#include <cstring>
#include <random>
#include <sstream>
#include <unistd.h>

#include "xampler/dataconstruct.h"
#include "xampler/error.h"
#include "xampler/retrieval.h"
#include "xampler/scorer.h"

namespace xampler {

namespace {

std::string Label(std::size_t c) { return "topic" + std::to_string(c); }

std::string Percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", 100.0 * fraction);
  return buf;
}

// Removes a directory tree when it goes out of scope.
class ScratchDir {
 public:
  explicit ScratchDir(std::optional<std::filesystem::path> given) {
    if (given) {
      path_ = *given;
      std::filesystem::create_directories(path_);
      return;
    }
    path_ = std::filesystem::temp_directory_path() /
            ("xampler-selftest-" + std::to_string(::getpid()));
    std::filesystem::create_directories(path_);
    owned_ = true;
  }
  ~ScratchDir() {
    if (owned_) {
      std::error_code ec;
      std::filesystem::remove_all(path_, ec);
    }
  }
  ScratchDir(const ScratchDir &) = delete;
  ScratchDir &operator=(const ScratchDir &) = delete;

  const std::filesystem::path &path() const { return path_; }

 private:
  std::filesystem::path path_;
  bool owned_ = false;
};

}  // namespace

SyntheticCorpus MakeSyntheticCorpus(const SyntheticConfig &config) {
  if (config.num_classes < 2 || config.topic_dims >= config.dim ||
      config.languages.empty() || config.train_size < 2) {
    throw Error(ErrorCode::kInvalidInput, "synthetic config is degenerate");
  }
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> unit(0.0, 1.0);

  std::vector<std::vector<double>> centroids(config.num_classes);
  for (auto &c : centroids) {
    c.resize(config.topic_dims);
    for (double &v : c) v = unit(rng);
  }
  std::vector<std::vector<double>> shifts(config.languages.size());
  for (std::size_t l = 0; l < shifts.size(); ++l) {
    shifts[l].assign(config.dim, 0.0);
    if (l == 0) continue;  // the first language is the training language
    for (std::size_t j = config.topic_dims; j < config.dim; ++j) {
      shifts[l][j] = config.language_shift * unit(rng);
    }
  }
  // The mining view sees the topic through a fixed random projection.
  std::vector<double> mining_proj(config.mining_dim * config.topic_dims);
  for (double &v : mining_proj) v = unit(rng) / std::sqrt(double(config.topic_dims));

  auto base_vector = [&](std::size_t cls, std::size_t lang) {
    std::vector<float> x(config.dim);
    for (std::size_t j = 0; j < config.dim; ++j) {
      double v = j < config.topic_dims
                     ? centroids[cls][j] + config.topic_noise * unit(rng)
                     : config.nuisance_noise * unit(rng);
      x[j] = static_cast<float>(v + shifts[lang][j]);
    }
    return x;
  };

  SyntheticCorpus out;
  std::vector<std::string> label_set;
  for (std::size_t c = 0; c < config.num_classes; ++c) label_set.push_back(Label(c));

  out.train.name = "synthetic_train";
  out.train.label_set = label_set;
  out.train.role = DatasetRole::kTrain;

  std::vector<std::string> base_ids;
  std::vector<float> base_data;
  std::vector<std::string> mining_ids;
  std::vector<float> mining_data;

  for (std::size_t i = 0; i < config.train_size; ++i) {
    const std::size_t cls = i % config.num_classes;
    char id[32];
    std::snprintf(id, sizeof(id), "train-%04zu", i);
    out.train.examples.push_back({id, "synthetic " + Label(cls) + " news item " +
                                          std::to_string(i),
                                  Label(cls), config.languages.front()});
    auto x = base_vector(cls, 0);
    base_ids.push_back(id);
    base_data.insert(base_data.end(), x.begin(), x.end());

    std::vector<double> topic(config.topic_dims);
    for (std::size_t j = 0; j < config.topic_dims; ++j) {
      topic[j] = centroids[cls][j] + config.mining_noise * unit(rng);
    }
    mining_ids.push_back(id);
    for (std::size_t r = 0; r < config.mining_dim; ++r) {
      double v = config.mining_noise * unit(rng);
      for (std::size_t j = 0; j < config.topic_dims; ++j) {
        v += mining_proj[r * config.topic_dims + j] * topic[j];
      }
      mining_data.push_back(static_cast<float>(v));
    }
  }

  for (std::size_t l = 0; l < config.languages.size(); ++l) {
    Dataset ds;
    ds.name = "synthetic_eval_" + config.languages[l];
    ds.label_set = label_set;
    ds.role = DatasetRole::kEval;
    for (std::size_t i = 0; i < config.eval_per_language; ++i) {
      const std::size_t cls = i % config.num_classes;
      char id[48];
      std::snprintf(id, sizeof(id), "%s-%04zu", config.languages[l].c_str(), i);
      ds.examples.push_back({id, "synthetic " + config.languages[l] + " item " +
                                     std::to_string(i),
                             Label(cls), config.languages[l]});
      auto x = base_vector(cls, l);
      base_ids.push_back(id);
      base_data.insert(base_data.end(), x.begin(), x.end());
    }
    out.eval_sets.push_back(std::move(ds));
  }

  out.base_store = EmbeddingStore(std::move(base_ids), config.dim, std::move(base_data),
                                  {"synthetic-base", 11, Pooling::kMean});
  out.mining_store =
      EmbeddingStore(std::move(mining_ids), config.mining_dim, std::move(mining_data),
                     {"synthetic-mining", 0, Pooling::kProviderNative});
  return out;
}

SelftestOptions::SelftestOptions() {
  // The surrogate head starts at identity and needs a larger step than a
  // full-model fine-tune to move within 50 epochs.
  trainer.learning_rate = 5e-3;
}

std::uint64_t Fingerprint(const RetrievalHead &head) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const std::vector<double> &values) {
    for (double v : values) {
      unsigned char bytes[sizeof(double)];
      std::memcpy(bytes, &v, sizeof(double));
      for (unsigned char b : bytes) {
        h ^= b;
        h *= 1099511628211ull;
      }
    }
  };
  mix(head.weight);
  mix(head.bias);
  return h;
}

SelftestReport RunSelftest(const SelftestOptions &options) {
  ScratchDir scratch(options.workdir);
  const auto &dir = scratch.path();

  SyntheticConfig synth;
  synth.seed = options.seed;
  {
    SyntheticCorpus corpus = MakeSyntheticCorpus(synth);
    SaveDataset(corpus.train, dir / "train.jsonl");
    for (const auto &ds : corpus.eval_sets) {
      SaveDataset(ds, dir / (ds.name + ".jsonl"));
    }
    SaveEmbeddings(corpus.mining_store, dir / "mining.xemb");
    SaveEmbeddings(corpus.base_store, dir / "base.xemb");
  }

  const Dataset train = LoadDataset(dir / "train.jsonl", DatasetRole::kTrain);
  std::vector<Dataset> eval_sets;
  for (const auto &lang : synth.languages) {
    eval_sets.push_back(LoadDataset(dir / ("synthetic_eval_" + lang + ".jsonl"),
                                    DatasetRole::kEval));
  }
  const EmbeddingStore mining = LoadEmbeddings(dir / "mining.xemb");
  const EmbeddingStore base = LoadEmbeddings(dir / "base.xemb");

  SelftestReport report;
  const PromptSpec prompt;

  // mine + construct
  SaveCandidates(MineCandidates(train, mining, options.k), dir / "candidates.jsonl");
  const auto cands = LoadCandidates(dir / "candidates.jsonl");
  MockScorer scorer(MockRule::kSimilarityGated);
  ConstructOptions construct;
  construct.parallelism = options.parallelism;
  construct.checkpoint = dir / "pairs.ckpt";
  SavePairs(ConstructPairs(train, cands, scorer, prompt, construct),
            dir / "pairs.jsonl");
  report.scorer_calls_construct = scorer.call_count();
  const auto pairs = LoadPairs(dir / "pairs.jsonl");
  report.num_pairs = pairs.size();
  for (const auto &p : pairs) {
    if (p.polarity == Polarity::kPositive) ++report.num_positive;
  }

  // train
  TrainerConfig tc = options.trainer;
  tc.seed = options.seed;
  auto trained = Train(pairs, base, tc);
  report.log = trained.log;
  SaveHead({trained.head, tc.temperature, tc.seed, tc.epochs}, dir / "head.bin");
  const RetrievalHead head = LoadHead(dir / "head.bin").head;
  report.head_fingerprint = Fingerprint(head);

  // retrieve + eval
  EvalInputs in;
  in.pool = &train;
  in.pool_store = &base;
  in.query_store = &base;
  in.eval_sets = eval_sets;
  in.prompt = prompt;
  in.scorer = &scorer;
  in.parallelism = options.parallelism;
  const RetrievalSetting setting{RetrievalMode::kLabelAgnostic, options.shots,
                                 ShotOrder::kAscending};

  in.head = nullptr;
  report.identity_top1 = TopOneLabelMatchRate(in);
  report.icl_identity = EvaluateIcl(in, setting, "identity");
  in.head = &head;
  report.trained_top1 = TopOneLabelMatchRate(in);
  report.icl_trained = EvaluateIcl(in, setting, "trained");
  return report;
}

std::string FormatSelftestReport(const SelftestReport &r) {
  std::ostringstream os;
  os << "pairs: " << r.num_pairs << " (" << r.num_positive << " positive), "
     << "scorer calls: " << r.scorer_calls_construct << "\n";
  os << "trained queries: " << r.log.trained_queries
     << ", skipped (no positive): " << r.log.skipped_queries << "\n";
  char buf[64];
  for (std::size_t e = 0; e < r.log.epoch_mean_loss.size(); ++e) {
    if (e == 0 || (e + 1) % 10 == 0) {
      std::snprintf(buf, sizeof(buf), "%.9f", r.log.epoch_mean_loss[e]);
      os << "epoch " << (e + 1) << " mean loss: " << buf << "\n";
    }
  }
  os << "top-1 label match, identity head: " << Percent(r.identity_top1) << "%\n";
  os << "top-1 label match, trained head:  " << Percent(r.trained_top1) << "%\n";
  for (const auto *records : {&r.icl_identity, &r.icl_trained}) {
    for (const auto &rec : *records) {
      os << "icl " << rec.method << " " << rec.language << ": " << rec.correct << "/"
         << rec.total << " (" << Percent(rec.accuracy()) << "%)\n";
    }
    if (!records->empty()) {
      os << "icl " << records->front().method
         << " macro: " << Percent(MacroAverage(*records)) << "%\n";
    }
  }
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(r.head_fingerprint));
  os << "head fingerprint: " << buf << "\n";
  return os.str();
}

}  // namespace xampler
