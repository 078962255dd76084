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

#include "cli.h"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <map>
#include <memory>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "xampler/corpus.h"
#include "xampler/dataconstruct.h"
#include "xampler/embedding.h"
#include "xampler/error.h"
#include "xampler/evalharness.h"
#include "xampler/retrieval.h"
#include "xampler/scorer.h"
#include "xampler/selftest.h"
#include "xampler/trainer.h"

namespace xampler::cli {

namespace {

using json = nlohmann::json;

constexpr int kConfigVersion = 1;

enum class Kind { kString, kInt, kDouble, kStringList, kIntList };

// A flag that mirrors a dotted config key.
struct Flag {
  CLI::Option *option;
  std::string key;
  Kind kind;
};

json::json_pointer Pointer(const std::string &dotted) {
  std::string p;
  std::stringstream ss(dotted);
  std::string part;
  while (std::getline(ss, part, '.')) p += "/" + part;
  return json::json_pointer(p);
}

json Convert(const std::string &flag, const std::string &text, Kind kind) {
  try {
    std::size_t used = 0;
    switch (kind) {
      case Kind::kInt:
      case Kind::kIntList: {
        long long v = std::stoll(text, &used);
        if (used != text.size()) break;
        return v;
      }
      case Kind::kDouble: {
        double v = std::stod(text, &used);
        if (used != text.size()) break;
        return v;
      }
      default:
        return text;
    }
  } catch (const std::exception &) {
  }
  throw Error(ErrorCode::kInvalidInput,
              "flag " + flag + ": cannot parse '" + text + "' as a number");
}

class Command {
 public:
  Command(CLI::App *app) : app_(app) {}

  CLI::App *app() const { return app_; }

  Command &Add(const std::string &name, const std::string &key, Kind kind,
               const std::string &help) {
    CLI::Option *opt = app_->add_option(name, help);
    opt->type_name(kind == Kind::kInt || kind == Kind::kIntList ? "INT"
                   : kind == Kind::kDouble                      ? "FLOAT"
                                                                : "TEXT");
    if (kind == Kind::kStringList || kind == Kind::kIntList) {
      opt->multi_option_policy(CLI::MultiOptionPolicy::TakeAll)->allow_extra_args(false);
      if (kind == Kind::kIntList) opt->delimiter(',');
    } else {
      opt->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    }
    flags_.push_back({opt, key, kind});
    return *this;
  }

  // Writes every flag that was given into `config`, replacing file values.
  void Overlay(json &config) const {
    for (const Flag &f : flags_) {
      if (f.option->count() == 0) continue;
      const auto &results = f.option->results();
      const std::string name = f.option->get_name();
      if (f.kind == Kind::kStringList || f.kind == Kind::kIntList) {
        json list = json::array();
        for (const auto &r : results) list.push_back(Convert(name, r, f.kind));
        config[Pointer(f.key)] = list;
      } else {
        config[Pointer(f.key)] = Convert(name, results.back(), f.kind);
      }
    }
  }

 private:
  CLI::App *app_;
  std::vector<Flag> flags_;
};

json Defaults(const std::string &command) {
  json doc{
      {"version", kConfigVersion},
      {"seed", 0},
      {"k", 10},
      {"trainer",
       {{"epochs", 50},
        {"batch_size", 16},
        {"learning_rate", 2e-5},
        {"weight_decay", 0.01},
        {"temperature", 0.05},
        {"max_pos_per_query", 1},
        {"activation", "identity"}}},
      {"retrieval", {{"mode", "label_agnostic"}, {"shots", 7}, {"shot_order", "asc"}}},
      {"scorer",
       {{"kind", "http"},
        {"rule", "similarity-gated"},
        {"url", "http://127.0.0.1:8000"},
        {"parallelism", 4},
        {"max_attempts", 3},
        {"base_delay", 0.5},
        {"timeout", 60.0}}},
      {"prompt", {{"template", std::string(kDefaultTemplate)}, {"separator", "\n"}}},
      {"report", {{"format", "csv"}}},
      {"sweep", {{"methods", {"knn", "icl"}}}},
  };
  if (command == "sweep-shots") doc["sweep"]["values"] = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  if (command == "sweep-k") doc["sweep"]["values"] = {1, 2, 5, 10};
  if (command == "sweep-layers") doc["retrieval"]["shots"] = 10;
  if (command == "selftest") doc["seed"] = 7;
  return doc;
}

json LoadConfigFile(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, path + ": cannot open config file");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error &e) {
    throw Error(ErrorCode::kFormat, path + ": malformed config: " + e.what());
  }
  if (!doc.is_object()) throw Error(ErrorCode::kFormat, path + ": config must be an object");
  if (!doc.contains("version")) {
    throw Error(ErrorCode::kInvalidInput, path + ": missing config key 'version'");
  }
  if (!doc["version"].is_number_integer() || doc["version"].get<int>() != kConfigVersion) {
    throw Error(ErrorCode::kInvalidInput,
                path + ": unsupported config version " + doc["version"].dump());
  }
  return doc;
}

class Config {
 public:
  explicit Config(json doc) : doc_(std::move(doc)) {}

  const json &doc() const { return doc_; }

  bool Has(const std::string &key) const {
    auto ptr = Pointer(key);
    return doc_.contains(ptr) && !doc_[ptr].is_null();
  }

  const json &Require(const std::string &key) const {
    if (!Has(key)) {
      throw Error(ErrorCode::kInvalidInput, "missing config key '" + key + "'");
    }
    return doc_[Pointer(key)];
  }

  std::string String(const std::string &key) const {
    const json &v = Require(key);
    if (!v.is_string() || v.get<std::string>().empty()) {
      throw Error(ErrorCode::kInvalidInput,
                  "config key '" + key + "' must be a non-empty string");
    }
    return v.get<std::string>();
  }

  std::optional<std::string> OptionalString(const std::string &key) const {
    if (!Has(key)) return std::nullopt;
    return String(key);
  }

  long long Int(const std::string &key) const {
    const json &v = Require(key);
    if (!v.is_number_integer()) {
      throw Error(ErrorCode::kInvalidInput, "config key '" + key + "' must be an integer");
    }
    return v.get<long long>();
  }

  double Double(const std::string &key) const {
    const json &v = Require(key);
    if (!v.is_number()) {
      throw Error(ErrorCode::kInvalidInput, "config key '" + key + "' must be a number");
    }
    return v.get<double>();
  }

  std::vector<std::string> Strings(const std::string &key) const {
    const json &v = Require(key);
    if (v.is_string()) return {v.get<std::string>()};
    std::vector<std::string> out;
    if (v.is_array()) {
      for (const auto &e : v) {
        if (!e.is_string()) break;
        out.push_back(e.get<std::string>());
      }
      if (out.size() == v.size() && !out.empty()) return out;
    }
    throw Error(ErrorCode::kInvalidInput,
                "config key '" + key + "' must be a non-empty list of strings");
  }

  std::vector<int> Ints(const std::string &key) const {
    const json &v = Require(key);
    std::vector<int> out;
    if (v.is_array()) {
      for (const auto &e : v) {
        if (!e.is_number_integer()) break;
        out.push_back(e.get<int>());
      }
      if (out.size() == v.size() && !out.empty()) return out;
    }
    throw Error(ErrorCode::kInvalidInput,
                "config key '" + key + "' must be a non-empty list of integers");
  }

 private:
  json doc_;
};

std::size_t Positive(const Config &c, const std::string &key) {
  long long v = c.Int(key);
  if (v < 1) throw Error(ErrorCode::kInvalidInput, "config key '" + key + "' must be >= 1");
  return static_cast<std::size_t>(v);
}

TrainerConfig TrainerFrom(const Config &c) {
  TrainerConfig t;
  t.epochs = static_cast<int>(c.Int("trainer.epochs"));
  t.batch_size = static_cast<int>(c.Int("trainer.batch_size"));
  t.learning_rate = c.Double("trainer.learning_rate");
  t.adamw.weight_decay = c.Double("trainer.weight_decay");
  t.temperature = c.Double("trainer.temperature");
  t.max_pos_per_query = static_cast<int>(c.Int("trainer.max_pos_per_query"));
  t.activation = ParseActivation(c.String("trainer.activation"));
  t.seed = static_cast<std::uint64_t>(c.Int("seed"));
  t.Validate();
  return t;
}

RetrievalSetting SettingFrom(const Config &c) {
  RetrievalSetting s;
  s.mode = ParseRetrievalMode(c.String("retrieval.mode"));
  s.n_shots = Positive(c, "retrieval.shots");
  s.order = ParseShotOrder(c.String("retrieval.shot_order"));
  return s;
}

PromptSpec PromptFrom(const Config &c) {
  PromptSpec p;
  p.prompt_template = c.String("prompt.template");
  const json &sep = c.Require("prompt.separator");
  if (!sep.is_string()) {
    throw Error(ErrorCode::kInvalidInput, "config key 'prompt.separator' must be a string");
  }
  p.separator = sep.get<std::string>();
  p.Validate();
  return p;
}

int Parallelism(const Config &c) { return static_cast<int>(Positive(c, "scorer.parallelism")); }

std::unique_ptr<ScorerClient> ScorerFrom(const Config &c) {
  const std::string kind = c.String("scorer.kind");
  if (kind == "mock") return MakeMockScorer(ParseMockRule(c.String("scorer.rule")));
  if (kind == "http") {
    HttpClientConfig hc;
    hc.url = ResolveScorerUrl(c.String("scorer.url"));
    hc.retry.max_attempts = static_cast<int>(Positive(c, "scorer.max_attempts"));
    hc.retry.base_delay = std::chrono::duration<double>(c.Double("scorer.base_delay"));
    hc.timeout = std::chrono::duration<double>(c.Double("scorer.timeout"));
    return std::make_unique<HttpScorerClient>(hc);
  }
  throw Error(ErrorCode::kInvalidInput, "unknown scorer kind '" + kind + "'");
}

std::vector<Dataset> LoadEvalSets(const Config &c) {
  std::vector<Dataset> sets;
  for (const auto &p : c.Strings("paths.eval")) {
    sets.push_back(LoadDataset(p, DatasetRole::kEval));
  }
  return sets;
}

std::vector<std::string> ReportComments(const std::string &command, const Config &c,
                                        const std::vector<const EmbeddingStore *> &stores) {
  std::vector<std::string> out = {"command: xampler " + command,
                                  "effective-config: " + c.doc().dump()};
  for (const EmbeddingStore *s : stores) {
    const auto &p = s->provenance();
    out.push_back("embeddings: provider=" + p.provider + " layer=" + std::to_string(p.layer) +
                  " pooling=" + PoolingName(p.pooling));
  }
  return out;
}

void Emit(const std::string &text, const Config &c, std::ostream &out) {
  out << text;
  if (auto path = c.OptionalString("paths.report")) WriteTextFile(text, *path);
}

ReportFormat FormatFrom(const Config &c) { return ParseReportFormat(c.String("report.format")); }

std::optional<HeadCheckpoint> HeadFrom(const Config &c) {
  if (auto path = c.OptionalString("paths.head")) return LoadHead(*path);
  return std::nullopt;
}

// --- subcommands -----------------------------------------------------------

int RunMine(const Config &c, std::ostream &out) {
  const Dataset train = LoadDataset(c.String("paths.train"), DatasetRole::kTrain);
  const EmbeddingStore store = LoadEmbeddings(c.String("paths.mining_embeddings"));
  const auto cands = MineCandidates(train, store, Positive(c, "k"));
  SaveCandidates(cands, c.String("paths.candidates"));
  out << "mined " << cands.size() << " candidate sets\n";
  return kOk;
}

int RunConstruct(const Config &c, std::ostream &out) {
  const Dataset train = LoadDataset(c.String("paths.train"), DatasetRole::kTrain);
  std::vector<CandidateSet> cands;
  if (auto path = c.OptionalString("paths.candidates")) {
    cands = LoadCandidates(*path);
  } else {
    const EmbeddingStore store = LoadEmbeddings(c.String("paths.mining_embeddings"));
    cands = MineCandidates(train, store, Positive(c, "k"));
  }
  const std::string pairs_path = c.String("paths.pairs");
  auto scorer = ScorerFrom(c);
  ConstructOptions options;
  options.parallelism = Parallelism(c);
  options.checkpoint = c.OptionalString("paths.checkpoint").value_or(pairs_path + ".ckpt");
  const auto pairs = ConstructPairs(train, cands, *scorer, PromptFrom(c), options);
  SavePairs(pairs, pairs_path);
  std::size_t positives = 0;
  for (const auto &p : pairs) positives += p.polarity == Polarity::kPositive;
  out << "constructed " << pairs.size() << " pairs (" << positives << " positive)\n";
  return kOk;
}

int RunTrain(const Config &c, std::ostream &out) {
  const auto pairs = LoadPairs(c.String("paths.pairs"));
  const EmbeddingStore store = LoadEmbeddings(c.String("paths.embeddings"));
  const TrainerConfig tc = TrainerFrom(c);
  const std::string head_path = c.String("paths.head");
  const TrainResult result = Train(pairs, store, tc);
  SaveHead({result.head, tc.temperature, tc.seed, tc.epochs}, head_path);
  char buf[64];
  for (std::size_t e = 0; e < result.log.epoch_mean_loss.size(); ++e) {
    std::snprintf(buf, sizeof(buf), "%.6f", result.log.epoch_mean_loss[e]);
    out << "epoch " << (e + 1) << " loss " << buf << "\n";
  }
  out << "trained on " << result.log.trained_queries << " queries, skipped "
      << result.log.skipped_queries << " without positives\n";
  return kOk;
}

int RunRetrieve(const Config &c, std::ostream &out) {
  const EmbeddingStore queries = LoadEmbeddings(c.String("paths.query_embeddings"));
  const Dataset pool = LoadDataset(c.String("paths.pool"), DatasetRole::kTrain);
  const EmbeddingStore pool_store = LoadEmbeddings(c.String("paths.pool_embeddings"));
  const auto head = HeadFrom(c);
  const RetrievalSetting setting = SettingFrom(c);
  setting.Validate(pool.label_set.size());
  const std::string out_path = c.String("paths.shots");

  ShotRetriever retriever(pool, pool_store, head ? &head->head : nullptr);
  std::ofstream file(out_path, std::ios::binary);
  if (!file) throw Error(ErrorCode::kIo, out_path + ": cannot open for writing");
  for (std::size_t i = 0; i < queries.rows(); ++i) {
    const std::string &id = queries.ids()[i];
    const ShotList list = retriever.Retrieve(id, queries.RowAsDouble(i), setting);
    json rec = {{"query_id", id}, {"shots", json::array()}};
    for (const Shot &s : list.shots) {
      rec["shots"].push_back(
          {{"id", s.example.id}, {"label", s.example.label}, {"score", s.score}});
    }
    file << rec.dump() << "\n";
  }
  if (!file) throw Error(ErrorCode::kIo, out_path + ": write failed");
  out << "retrieved shots for " << queries.rows() << " queries\n";
  return kOk;
}

struct EvalContext {
  Dataset pool;
  EmbeddingStore pool_store;
  std::optional<EmbeddingStore> query_store;
  std::vector<Dataset> eval_sets;
  std::optional<HeadCheckpoint> head;
  std::unique_ptr<ScorerClient> scorer;
  EvalInputs inputs;
};

std::unique_ptr<EvalContext> LoadEval(const Config &c, bool needs_scorer) {
  auto ctx = std::make_unique<EvalContext>();
  ctx->pool = LoadDataset(c.String("paths.pool"), DatasetRole::kTrain);
  ctx->pool_store = LoadEmbeddings(c.String("paths.pool_embeddings"));
  if (auto q = c.OptionalString("paths.query_embeddings")) {
    ctx->query_store = LoadEmbeddings(*q);
  }
  ctx->eval_sets = LoadEvalSets(c);
  ctx->head = HeadFrom(c);
  if (needs_scorer) ctx->scorer = ScorerFrom(c);
  EvalInputs &in = ctx->inputs;
  in.pool = &ctx->pool;
  in.pool_store = &ctx->pool_store;
  in.query_store = ctx->query_store ? &*ctx->query_store : &ctx->pool_store;
  in.eval_sets = ctx->eval_sets;
  in.head = ctx->head ? &ctx->head->head : nullptr;
  in.prompt = PromptFrom(c);
  in.scorer = ctx->scorer.get();
  in.parallelism = Parallelism(c);
  return ctx;
}

int RunEval(const std::string &command, bool icl, const Config &c, std::ostream &out,
            std::ostream &err) {
  auto ctx = LoadEval(c, icl);
  const RetrievalSetting setting = SettingFrom(c);
  const std::string method =
      c.Has("method") ? c.String("method") : (icl ? std::string("ICL") : std::string("KNN"));
  std::vector<std::string> diagnostics;
  const auto records = icl ? EvaluateIcl(ctx->inputs, setting, method, &diagnostics)
                           : EvaluateKnn(ctx->inputs, setting, method, &diagnostics);
  for (const auto &d : diagnostics) err << "warning: " << d << "\n";
  const auto comments =
      ReportComments(command, c, {&ctx->pool_store, ctx->inputs.query_store});
  Emit(RenderTable(TableFromRecords(records), FormatFrom(c), comments), c, out);
  return kOk;
}

int RunSweepShots(const Config &c, std::ostream &out) {
  bool knn = false, icl = false;
  for (const auto &m : c.Strings("sweep.methods")) {
    if (m == "knn") {
      knn = true;
    } else if (m == "icl") {
      icl = true;
    } else {
      throw Error(ErrorCode::kInvalidInput, "unknown sweep method '" + m + "'");
    }
  }
  auto ctx = LoadEval(c, icl);
  const auto values = c.Ints("sweep.values");
  const ShotSweep sweep = SweepShots(values, knn, icl, ctx->inputs);
  std::vector<SweepResult> results;
  if (sweep.knn) results.push_back(*sweep.knn);
  if (sweep.icl) results.push_back(*sweep.icl);
  const auto comments =
      ReportComments("sweep-shots", c, {&ctx->pool_store, ctx->inputs.query_store});
  Emit(RenderSweeps(results, FormatFrom(c), comments), c, out);
  return kOk;
}

int RunSweepK(const Config &c, std::ostream &out) {
  const Dataset train = LoadDataset(c.String("paths.train"), DatasetRole::kTrain);
  const EmbeddingStore mining = LoadEmbeddings(c.String("paths.mining_embeddings"));
  const EmbeddingStore base = LoadEmbeddings(c.String("paths.embeddings"));
  const auto eval_sets = LoadEvalSets(c);
  auto scorer = ScorerFrom(c);
  KSweepInputs in;
  in.train = &train;
  in.mining_store = &mining;
  in.base_store = &base;
  in.eval_sets = eval_sets;
  in.scorer = scorer.get();
  in.prompt = PromptFrom(c);
  in.trainer = TrainerFrom(c);
  in.setting = SettingFrom(c);
  in.construct.parallelism = Parallelism(c);
  const SweepResult result = SweepK(c.Ints("sweep.values"), in);
  const SweepResult results[] = {result};
  Emit(RenderSweeps(results, FormatFrom(c), ReportComments("sweep-k", c, {&mining, &base})),
       c, out);
  return kOk;
}

int RunSweepLayers(const Config &c, std::ostream &out) {
  const Dataset pool = LoadDataset(c.String("paths.pool"), DatasetRole::kTrain);
  const auto eval_sets = LoadEvalSets(c);
  std::vector<EmbeddingStore> stores;
  std::vector<int> layer_ids;
  for (const auto &spec : c.Strings("paths.layer_embeddings")) {
    auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size()) {
      throw Error(ErrorCode::kInvalidInput,
                  "layer embeddings must look like LAYER=PATH, got '" + spec + "'");
    }
    layer_ids.push_back(static_cast<int>(
        Convert("--layer", spec.substr(0, eq), Kind::kInt).get<long long>()));
    stores.push_back(LoadEmbeddings(spec.substr(eq + 1)));
  }
  std::vector<LayerStore> layers;
  std::vector<const EmbeddingStore *> refs;
  for (std::size_t i = 0; i < stores.size(); ++i) {
    layers.push_back({layer_ids[i], &stores[i]});
    refs.push_back(&stores[i]);
  }
  const SweepResult result = SweepLayers(layers, pool, eval_sets, Positive(c, "retrieval.shots"));
  const SweepResult results[] = {result};
  Emit(RenderSweeps(results, FormatFrom(c), ReportComments("sweep-layers", c, refs)), c, out);
  return kOk;
}

int RunAggregate(const Config &c, std::ostream &out) {
  const ReportFormat format = FormatFrom(c);
  std::string text;
  if (c.Has("paths.fixtures")) {
    for (const auto &path : c.Strings("paths.fixtures")) {
      const std::vector<std::string> comments = {"source: " + path};
      text += RenderTable(ReadResultTable(path), format, comments);
    }
  }
  if (auto ablation = c.OptionalString("paths.ablation")) {
    const auto entries = ReadAblationTable(*ablation);
    char buf[128];
    text += "method,accuracy,gap\r\n";
    for (const auto &e : entries) {
      std::snprintf(buf, sizeof(buf), ",%.2f,%.2f\r\n", e.accuracy, e.gap);
      std::string name = e.method;
      if (name.find_first_of(",\"\r\n") != std::string::npos) {
        for (std::size_t i = name.find('"'); i != std::string::npos; i = name.find('"', i + 2)) {
          name.insert(i, 1, '"');
        }
        name = "\"" + name + "\"";
      }
      text += name + buf;
    }
  }
  if (text.empty()) {
    throw Error(ErrorCode::kInvalidInput, "missing config key 'paths.fixtures'");
  }
  Emit(text, c, out);
  return kOk;
}

int RunSelftestCommand(const Config &c, std::ostream &out) {
  SelftestOptions options;
  options.seed = static_cast<std::uint64_t>(c.Int("seed"));
  options.parallelism = Parallelism(c);
  if (c.Has("selftest.epochs")) options.trainer.epochs = static_cast<int>(c.Int("selftest.epochs"));
  if (c.Has("selftest.learning_rate")) {
    options.trainer.learning_rate = c.Double("selftest.learning_rate");
  }
  if (auto dir = c.OptionalString("paths.workdir")) options.workdir = *dir;
  out << FormatSelftestReport(RunSelftest(options));
  return kOk;
}

// --- flag wiring -----------------------------------------------------------

void AddScorerFlags(Command &cmd) {
  cmd.Add("--scorer", "scorer.kind", Kind::kString, "mock or http")
      .Add("--mock-rule", "scorer.rule", Kind::kString, "label-echo or similarity-gated")
      .Add("--scorer-url", "scorer.url", Kind::kString, "bridge base URL")
      .Add("--max-attempts", "scorer.max_attempts", Kind::kInt, "HTTP attempts per request")
      .Add("--template", "prompt.template", Kind::kString, "prompt template")
      .Add("--separator", "prompt.separator", Kind::kString, "demonstration separator");
}

void AddTrainerFlags(Command &cmd) {
  cmd.Add("--epochs", "trainer.epochs", Kind::kInt, "training epochs")
      .Add("--lr", "trainer.learning_rate", Kind::kDouble, "learning rate")
      .Add("--batch", "trainer.batch_size", Kind::kInt, "queries per batch")
      .Add("--weight-decay", "trainer.weight_decay", Kind::kDouble, "AdamW weight decay")
      .Add("--temperature", "trainer.temperature", Kind::kDouble, "InfoNCE temperature")
      .Add("--max-pos", "trainer.max_pos_per_query", Kind::kInt, "positives sampled per query")
      .Add("--activation", "trainer.activation", Kind::kString, "identity or tanh");
}

void AddRetrievalFlags(Command &cmd) {
  cmd.Add("--mode", "retrieval.mode", Kind::kString, "label_aware or label_agnostic")
      .Add("--shots", "retrieval.shots", Kind::kInt, "shots per prompt")
      .Add("--shot-order", "retrieval.shot_order", Kind::kString, "asc or desc");
}

void AddEvalFlags(Command &cmd) {
  cmd.Add("--pool", "paths.pool", Kind::kString, "English pool JSONL")
      .Add("--pool-embeddings", "paths.pool_embeddings", Kind::kString, "pool XEMB")
      .Add("--query-embeddings", "paths.query_embeddings", Kind::kString,
           "eval XEMB (defaults to the pool embeddings)")
      .Add("--eval", "paths.eval", Kind::kStringList, "eval JSONL, repeatable")
      .Add("--head", "paths.head", Kind::kString, "trained head; raw cosine when absent")
      .Add("--out", "paths.report", Kind::kString, "report file")
      .Add("--format", "report.format", Kind::kString, "csv or markdown");
}

int ExitCodeFor(const Error &e) {
  switch (e.code()) {
    case ErrorCode::kInvalidInput:
    case ErrorCode::kFormat:
      return kValidationError;
    default:
      return kRuntimeError;
  }
}

}  // namespace

int Run(int argc, const char *const *argv, std::ostream &out, std::ostream &err) {
  CLI::App app{"xampler: cross-lingual example retrieval pipeline", "xampler"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "JSON config file (flags override its values)");

  std::map<std::string, std::unique_ptr<Command>> commands;
  auto sub = [&](const std::string &name, const std::string &help) -> Command & {
    auto cmd = std::make_unique<Command>(app.add_subcommand(name, help));
    cmd->app()->add_option("--config", config_path, "JSON config file");
    cmd->Add("--seed", "seed", Kind::kInt, "seed for all randomness")
        .Add("--parallelism", "scorer.parallelism", Kind::kInt, "in-flight scorer requests");
    auto &ref = *cmd;
    commands[name] = std::move(cmd);
    return ref;
  };

  sub("mine", "mine top-k candidates per training query")
      .Add("--train", "paths.train", Kind::kString, "English training JSONL")
      .Add("--embeddings", "paths.mining_embeddings", Kind::kString, "mining XEMB")
      .Add("--k", "k", Kind::kInt, "candidates per query")
      .Add("--out", "paths.candidates", Kind::kString, "candidates JSONL");

  auto &construct = sub("construct", "score mined candidates and split into pairs");
  construct.Add("--train", "paths.train", Kind::kString, "English training JSONL")
      .Add("--embeddings", "paths.mining_embeddings", Kind::kString, "mining XEMB")
      .Add("--candidates", "paths.candidates", Kind::kString, "precomputed candidates JSONL")
      .Add("--k", "k", Kind::kInt, "candidates per query")
      .Add("--checkpoint", "paths.checkpoint", Kind::kString, "resume file")
      .Add("--out", "paths.pairs", Kind::kString, "pairs JSONL");
  AddScorerFlags(construct);

  auto &train = sub("train", "fine-tune the retrieval head");
  train.Add("--pairs", "paths.pairs", Kind::kString, "pairs JSONL")
      .Add("--embeddings", "paths.embeddings", Kind::kString, "base XEMB")
      .Add("--out", "paths.head", Kind::kString, "head checkpoint");
  AddTrainerFlags(train);

  auto &retrieve = sub("retrieve", "select shots for every query");
  retrieve.Add("--query-embeddings", "paths.query_embeddings", Kind::kString, "query XEMB")
      .Add("--pool", "paths.pool", Kind::kString, "English pool JSONL")
      .Add("--pool-embeddings", "paths.pool_embeddings", Kind::kString, "pool XEMB")
      .Add("--head", "paths.head", Kind::kString, "trained head; raw cosine when absent")
      .Add("--out", "paths.shots", Kind::kString, "shots JSONL");
  AddRetrievalFlags(retrieve);

  for (const char *name : {"eval-icl", "eval-knn"}) {
    auto &cmd = sub(name, std::string(name) == "eval-icl" ? "in-context evaluation"
                                                          : "nearest-neighbour evaluation");
    AddEvalFlags(cmd);
    AddRetrievalFlags(cmd);
    cmd.Add("--method", "method", Kind::kString, "method column name");
    if (std::string(name) == "eval-icl") AddScorerFlags(cmd);
  }

  auto &sweep_shots = sub("sweep-shots", "KNN and ICL accuracy per shot count");
  AddEvalFlags(sweep_shots);
  AddRetrievalFlags(sweep_shots);
  AddScorerFlags(sweep_shots);
  sweep_shots.Add("--values", "sweep.values", Kind::kIntList, "shot counts, e.g. 1,2,4,8")
      .Add("--methods", "sweep.methods", Kind::kStringList, "knn and/or icl");

  auto &sweep_k = sub("sweep-k", "rerun construct, train and ICL per k");
  sweep_k.Add("--train", "paths.train", Kind::kString, "English training JSONL")
      .Add("--mining-embeddings", "paths.mining_embeddings", Kind::kString, "mining XEMB")
      .Add("--embeddings", "paths.embeddings", Kind::kString, "base XEMB")
      .Add("--eval", "paths.eval", Kind::kStringList, "eval JSONL, repeatable")
      .Add("--values", "sweep.values", Kind::kIntList, "k values, e.g. 1,2,5,10")
      .Add("--out", "paths.report", Kind::kString, "report file")
      .Add("--format", "report.format", Kind::kString, "csv or markdown");
  AddTrainerFlags(sweep_k);
  AddRetrievalFlags(sweep_k);
  AddScorerFlags(sweep_k);

  sub("sweep-layers", "KNN accuracy per embedding layer")
      .Add("--pool", "paths.pool", Kind::kString, "English pool JSONL")
      .Add("--layer", "paths.layer_embeddings", Kind::kStringList,
           "LAYER=PATH covering pool and eval ids, repeatable")
      .Add("--eval", "paths.eval", Kind::kStringList, "eval JSONL, repeatable")
      .Add("--shots", "retrieval.shots", Kind::kInt, "neighbours (default 10)")
      .Add("--out", "paths.report", Kind::kString, "report file")
      .Add("--format", "report.format", Kind::kString, "csv or markdown");

  sub("aggregate", "average per-language result tables")
      .Add("--fixtures", "paths.fixtures", Kind::kStringList, "result CSV, repeatable")
      .Add("--ablation", "paths.ablation", Kind::kString, "method,accuracy CSV")
      .Add("--out", "paths.report", Kind::kString, "report file")
      .Add("--format", "report.format", Kind::kString, "csv or markdown");

  sub("selftest", "run the mock pipeline end to end on synthetic data")
      .Add("--workdir", "paths.workdir", Kind::kString, "keep intermediate files here")
      .Add("--epochs", "selftest.epochs", Kind::kInt, "training epochs")
      .Add("--lr", "selftest.learning_rate", Kind::kDouble, "learning rate");

  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--config") {
      ++i;
      continue;
    }
    if (arg.starts_with("-")) continue;
    if (commands.count(arg) == 0) {
      err << "error: unknown subcommand '" << arg << "'\n\n" << app.help();
      return kValidationError;
    }
    break;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp &) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError &e) {
    err << "error: " << e.what() << "\n\n";
    const auto *active = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    err << active->help();
    return kValidationError;
  }

  CLI::App *active = app.get_subcommands().front();
  const std::string name = active->get_name();
  try {
    json doc = Defaults(name);
    if (!config_path.empty()) {
      doc.merge_patch(LoadConfigFile(config_path));
    }
    commands.at(name)->Overlay(doc);
    const Config config(std::move(doc));

    if (name == "mine") return RunMine(config, out);
    if (name == "construct") return RunConstruct(config, out);
    if (name == "train") return RunTrain(config, out);
    if (name == "retrieve") return RunRetrieve(config, out);
    if (name == "eval-icl") return RunEval(name, true, config, out, err);
    if (name == "eval-knn") return RunEval(name, false, config, out, err);
    if (name == "sweep-shots") return RunSweepShots(config, out);
    if (name == "sweep-k") return RunSweepK(config, out);
    if (name == "sweep-layers") return RunSweepLayers(config, out);
    if (name == "aggregate") return RunAggregate(config, out);
    return RunSelftestCommand(config, out);
  } catch (const Error &e) {
    err << "error: " << e.what() << "\n";
    return ExitCodeFor(e);
  } catch (const std::exception &e) {
    err << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
}

}  // namespace xampler::cli
