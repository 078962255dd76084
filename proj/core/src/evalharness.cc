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

#include "xampler/evalharness.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "csv.h"
#include "xampler/error.h"

namespace xampler {

namespace {

std::string Fixed2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string MarkdownRow(const std::vector<std::string> &cells) {
  std::string out = "|";
  for (const auto &c : cells) out += " " + c + " |";
  return out + "\n";
}

std::string Render(const std::vector<std::vector<std::string>> &rows,
                   ReportFormat format, std::span<const std::string> comments) {
  std::string out;
  if (format == ReportFormat::kCsv) {
    for (const auto &c : comments) out += "# " + c + "\r\n";
    for (const auto &r : rows) out += internal::CsvLine(r);
    return out;
  }
  if (rows.empty()) return out;
  out += MarkdownRow(rows.front());
  std::vector<std::string> rule(rows.front().size(), "---");
  out += MarkdownRow(rule);
  for (std::size_t i = 1; i < rows.size(); ++i) out += MarkdownRow(rows[i]);
  if (!comments.empty()) {
    out += "\n<!--\n";
    for (const auto &c : comments) out += c + "\n";
    out += "-->\n";
  }
  return out;
}

void CheckCoverage(const EmbeddingStore &store, const Dataset &ds,
                   const std::string &what) {
  for (const auto &ex : ds.examples) {
    if (!store.Contains(ex.id)) {
      throw Error(ErrorCode::kInvalidInput,
                  what + ": missing embedding for id '" + ex.id + "'");
    }
  }
}

std::vector<int> SortedUnique(std::span<const int> values, const char *axis) {
  if (values.empty()) {
    throw Error(ErrorCode::kInvalidInput, std::string(axis) + " sweep: empty range");
  }
  std::vector<int> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw Error(ErrorCode::kInvalidInput, "duplicate sweep point");
  }
  return sorted;
}

}  // namespace

std::vector<EvalRecord> Evaluate(std::span<const Dataset> eval_sets,
                                 const BatchPredictor &predict,
                                 std::string_view method,
                                 std::string_view setting,
                                 std::vector<std::string> *diagnostics) {
  std::map<std::string, std::vector<Example>> by_language;
  for (const auto &ds : eval_sets) {
    if (ds.examples.empty()) {
      throw Error(ErrorCode::kInvalidInput,
                  "eval set '" + ds.name + "' has no examples");
    }
    for (const auto &ex : ds.examples) by_language[ex.language].push_back(ex);
  }

  std::vector<EvalRecord> records;
  for (const auto &[language, examples] : by_language) {
    std::vector<std::string> predicted;
    try {
      predicted = predict(examples);
      if (predicted.size() != examples.size()) {
        throw Error(ErrorCode::kProtocol, "predictor returned wrong count");
      }
    } catch (const std::exception &e) {
      if (diagnostics) {
        diagnostics->push_back(language + ": " + std::string(method) +
                               " failed: " + e.what());
      }
      continue;
    }
    EvalRecord r{language, std::string(method), std::string(setting), 0,
                 static_cast<std::int64_t>(examples.size())};
    for (std::size_t i = 0; i < examples.size(); ++i) {
      if (predicted[i] == examples[i].label) ++r.correct;
    }
    records.push_back(std::move(r));
  }
  return records;
}

std::vector<EvalRecord> Evaluate(std::span<const Dataset> eval_sets,
                                 const Predictor &predict,
                                 std::string_view method,
                                 std::string_view setting,
                                 std::vector<std::string> *diagnostics) {
  BatchPredictor batch = [&](std::span<const Example> examples) {
    std::vector<std::string> out;
    out.reserve(examples.size());
    for (const auto &ex : examples) out.push_back(predict(ex));
    return out;
  };
  return Evaluate(eval_sets, batch, method, setting, diagnostics);
}

double MacroAverage(std::span<const double> values) {
  if (values.empty()) {
    throw Error(ErrorCode::kInvalidInput, "macro average of nothing");
  }
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

double MacroAverage(std::span<const EvalRecord> records) {
  std::vector<double> acc;
  acc.reserve(records.size());
  for (const auto &r : records) {
    if (r.total < 1 || r.correct < 0 || r.correct > r.total) {
      throw Error(ErrorCode::kInvalidInput,
                  "invalid eval record for language '" + r.language + "'");
    }
    acc.push_back(r.accuracy());
  }
  return MacroAverage(std::span<const double>(acc));
}

std::vector<EvalRecord> EvaluateKnn(const EvalInputs &in,
                                    const RetrievalSetting &setting,
                                    std::string_view method,
                                    std::vector<std::string> *diagnostics) {
  ShotRetriever retriever(*in.pool, *in.pool_store, in.head);
  Predictor predict = [&](const Example &q) {
    auto shots = retriever.Retrieve(q.id, in.query_store->Vector(q.id), setting);
    return KnnPredict(shots, in.pool->label_set);
  };
  return Evaluate(in.eval_sets, predict, method, RetrievalModeName(setting.mode),
                  diagnostics);
}

std::vector<EvalRecord> EvaluateIcl(const EvalInputs &in,
                                    const RetrievalSetting &setting,
                                    std::string_view method,
                                    std::vector<std::string> *diagnostics) {
  if (!in.scorer) throw Error(ErrorCode::kInvalidInput, "ICL evaluation needs a scorer");
  ShotRetriever retriever(*in.pool, *in.pool_store, in.head);
  BatchPredictor predict = [&](std::span<const Example> queries) {
    std::vector<ScoreRequest> requests;
    requests.reserve(queries.size());
    for (const auto &q : queries) {
      auto shots = retriever.Retrieve(q.id, in.query_store->Vector(q.id), setting);
      requests.push_back(BuildIclRequest(q, shots, in.prompt, in.pool->label_set));
    }
    std::vector<std::string> labels;
    for (auto &p : ScoreAll(*in.scorer, requests, in.parallelism)) {
      labels.push_back(std::move(p.label));
    }
    return labels;
  };
  return Evaluate(in.eval_sets, predict, method, RetrievalModeName(setting.mode),
                  diagnostics);
}

double TopOneLabelMatchRate(const EvalInputs &in) {
  ShotRetriever retriever(*in.pool, *in.pool_store, in.head);
  RetrievalSetting top1{RetrievalMode::kLabelAgnostic, 1, ShotOrder::kAscending};
  std::size_t hits = 0;
  std::size_t total = 0;
  for (const auto &ds : in.eval_sets) {
    for (const auto &q : ds.examples) {
      auto shots = retriever.Retrieve(q.id, in.query_store->Vector(q.id), top1);
      ++total;
      if (!shots.shots.empty() && shots.shots.front().example.label == q.label) {
        ++hits;
      }
    }
  }
  if (total == 0) throw Error(ErrorCode::kInvalidInput, "no eval queries");
  return static_cast<double>(hits) / static_cast<double>(total);
}

const char *SweepAxisName(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::kShots: return "shots";
    case SweepAxis::kK: return "k";
    case SweepAxis::kLayer: return "layer";
  }
  return "shots";
}

int SweepResult::BestValue() const {
  if (points.empty()) throw Error(ErrorCode::kInvalidInput, "empty sweep");
  const SweepPoint *best = &points.front();
  for (const auto &p : points) {
    if (p.macro_accuracy > best->macro_accuracy) best = &p;
  }
  return best->value;
}

ShotSweep SweepShots(std::span<const int> shots, bool knn, bool icl,
                     const EvalInputs &in) {
  const auto values = SortedUnique(shots, "shots");
  if (values.front() < 1) throw Error(ErrorCode::kInvalidInput, "shot counts must be >= 1");
  ShotSweep out;
  if (knn) out.knn = SweepResult{SweepAxis::kShots, "KNN", {}};
  if (icl) out.icl = SweepResult{SweepAxis::kShots, "ICL", {}};
  for (int n : values) {
    RetrievalSetting setting{RetrievalMode::kLabelAgnostic,
                             static_cast<std::size_t>(n), ShotOrder::kAscending};
    if (knn) {
      auto records = EvaluateKnn(in, setting, "KNN");
      out.knn->points.push_back({n, MacroAverage(records), false, n});
    }
    if (icl) {
      auto records = EvaluateIcl(in, setting, "ICL");
      out.icl->points.push_back({n, MacroAverage(records), false, n});
    }
  }
  return out;
}

SweepResult SweepK(std::span<const int> k_values, const KSweepInputs &in) {
  const auto values = SortedUnique(k_values, "k");
  if (values.front() < 1) throw Error(ErrorCode::kInvalidInput, "k must be >= 1");
  const Dataset &train = *in.train;
  if (train.examples.size() < 2) {
    throw Error(ErrorCode::kInvalidInput, "k sweep needs at least two training examples");
  }
  CheckCoverage(*in.base_store, train, "k sweep");
  for (const auto &ds : in.eval_sets) CheckCoverage(*in.base_store, ds, "k sweep");

  const int max_k = static_cast<int>(train.examples.size()) - 1;
  SweepResult result{SweepAxis::kK, "ICL", {}};
  for (int k : values) {
    const int effective = std::min(k, max_k);
    auto cands = MineCandidates(train, *in.mining_store,
                                static_cast<std::size_t>(effective));
    auto pairs = ConstructPairs(train, cands, *in.scorer, in.prompt, in.construct);
    auto trained = Train(pairs, *in.base_store, in.trainer);

    EvalInputs eval;
    eval.pool = &train;
    eval.pool_store = in.base_store;
    eval.query_store = in.base_store;
    eval.eval_sets = in.eval_sets;
    eval.head = &trained.head;
    eval.prompt = in.prompt;
    eval.scorer = in.scorer;
    eval.parallelism = in.construct.parallelism;
    auto records = EvaluateIcl(eval, in.setting, "ICL");
    result.points.push_back({k, MacroAverage(records), effective != k, effective});
  }
  return result;
}

SweepResult SweepLayers(std::span<const LayerStore> layers, const Dataset &pool,
                        std::span<const Dataset> eval_sets, std::size_t n_shots) {
  std::vector<int> layer_ids;
  for (const auto &l : layers) layer_ids.push_back(l.layer);
  const auto values = SortedUnique(layer_ids, "layer");

  SweepResult result{SweepAxis::kLayer, "KNN", {}};
  RetrievalSetting setting{RetrievalMode::kLabelAgnostic, n_shots,
                           ShotOrder::kAscending};
  for (int layer : values) {
    const auto it = std::find_if(layers.begin(), layers.end(),
                                 [&](const LayerStore &l) { return l.layer == layer; });
    const EmbeddingStore &store = *it->store;
    const std::string what = "layer " + std::to_string(layer);
    CheckCoverage(store, pool, what);
    for (const auto &ds : eval_sets) CheckCoverage(store, ds, what);

    EvalInputs in;
    in.pool = &pool;
    in.pool_store = &store;
    in.query_store = &store;
    in.eval_sets = eval_sets;
    auto records = EvaluateKnn(in, setting, "KNN");
    result.points.push_back({layer, MacroAverage(records), false, layer});
  }
  return result;
}

std::vector<double> ResultTable::ColumnAverages() const {
  std::vector<double> out;
  for (std::size_t m = 0; m < methods.size(); ++m) {
    std::vector<double> column;
    for (const auto &row : cells) {
      if (m < row.size() && row[m]) column.push_back(*row[m]);
    }
    out.push_back(column.empty() ? std::nan("") : MacroAverage(column));
  }
  return out;
}

ResultTable TableFromRecords(std::span<const EvalRecord> records) {
  ResultTable table;
  std::set<std::string> languages;
  for (const auto &r : records) {
    std::string column = r.setting.empty() ? r.method : r.method + " [" + r.setting + "]";
    if (std::find(table.methods.begin(), table.methods.end(), column) ==
        table.methods.end()) {
      table.methods.push_back(column);
    }
    languages.insert(r.language);
  }
  table.languages.assign(languages.begin(), languages.end());
  table.cells.assign(table.languages.size(),
                     std::vector<std::optional<double>>(table.methods.size()));
  for (const auto &r : records) {
    std::string column = r.setting.empty() ? r.method : r.method + " [" + r.setting + "]";
    const auto m = std::find(table.methods.begin(), table.methods.end(), column) -
                   table.methods.begin();
    const auto l = std::lower_bound(table.languages.begin(), table.languages.end(),
                                    r.language) -
                   table.languages.begin();
    table.cells[l][m] = 100.0 * r.accuracy();
  }
  return table;
}

ResultTable ParseResultTable(std::string_view csv_text) {
  auto rows = internal::ParseCsv(csv_text);
  if (rows.empty() || rows.front().size() < 2) {
    throw Error(ErrorCode::kFormat, "result table lacks a header row");
  }
  ResultTable table;
  table.methods.assign(rows.front().begin() + 1, rows.front().end());
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto &row = rows[i];
    if (row.front() == "Avg") continue;
    if (row.size() != table.methods.size() + 1) {
      throw Error(ErrorCode::kFormat,
                  "result table row " + std::to_string(i + 1) + " ('" + row.front() +
                      "') has " + std::to_string(row.size()) + " fields, expected " +
                      std::to_string(table.methods.size() + 1));
    }
    table.languages.push_back(row.front());
    std::vector<std::optional<double>> values;
    for (std::size_t c = 1; c < row.size(); ++c) {
      if (row[c].empty()) {
        values.emplace_back();
        continue;
      }
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(row[c], &used);
      } catch (const std::exception &) {
        used = 0;
      }
      if (used != row[c].size()) {
        throw Error(ErrorCode::kFormat,
                    "result table: non-numeric cell '" + row[c] + "' for '" +
                        row.front() + "'");
      }
      values.emplace_back(v);
    }
    table.cells.push_back(std::move(values));
  }
  return table;
}

ResultTable ReadResultTable(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return ParseResultTable(buf.str());
}

ReportFormat ParseReportFormat(std::string_view name) {
  if (name == "csv") return ReportFormat::kCsv;
  if (name == "markdown" || name == "md") return ReportFormat::kMarkdown;
  throw Error(ErrorCode::kInvalidInput,
              "unknown report format '" + std::string(name) + "'");
}

std::string RenderTable(const ResultTable &table, ReportFormat format,
                        std::span<const std::string> comments) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> header = {"language"};
  header.insert(header.end(), table.methods.begin(), table.methods.end());
  rows.push_back(header);
  for (std::size_t l = 0; l < table.languages.size(); ++l) {
    std::vector<std::string> row = {table.languages[l]};
    for (const auto &cell : table.cells[l]) row.push_back(cell ? Fixed2(*cell) : "");
    rows.push_back(std::move(row));
  }
  std::vector<std::string> avg = {"Avg"};
  for (double v : table.ColumnAverages()) avg.push_back(std::isnan(v) ? "" : Fixed2(v));
  rows.push_back(std::move(avg));
  return Render(rows, format, comments);
}

std::string RenderSweeps(std::span<const SweepResult> sweeps, ReportFormat format,
                         std::span<const std::string> comments) {
  std::vector<std::vector<std::string>> rows;
  if (sweeps.empty()) return Render(rows, format, comments);
  std::vector<std::string> header = {SweepAxisName(sweeps.front().axis)};
  std::set<int> values;
  for (const auto &s : sweeps) {
    header.push_back(s.method);
    for (const auto &p : s.points) values.insert(p.value);
  }
  rows.push_back(header);
  for (int v : values) {
    std::vector<std::string> row = {std::to_string(v)};
    for (const auto &s : sweeps) {
      auto it = std::find_if(s.points.begin(), s.points.end(),
                             [v](const SweepPoint &p) { return p.value == v; });
      if (it == s.points.end()) {
        row.push_back("");
      } else {
        std::string cell = Fixed2(100.0 * it->macro_accuracy);
        if (it->clamped) cell += " (clamped to " + std::to_string(it->effective_value) + ")";
        row.push_back(cell);
      }
    }
    rows.push_back(std::move(row));
  }
  std::vector<std::string> best = {"best"};
  for (const auto &s : sweeps) best.push_back(std::to_string(s.BestValue()));
  rows.push_back(std::move(best));
  return Render(rows, format, comments);
}

void WriteTextFile(const std::string &content, const std::filesystem::path &path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << content;
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

std::vector<AblationEntry> ReadAblationTable(const std::filesystem::path &path,
                                             std::string_view reference) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  auto rows = internal::ParseCsv(buf.str());
  if (rows.empty()) throw Error(ErrorCode::kFormat, path.string() + ": empty ablation table");
  std::vector<AblationEntry> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() != 2) {
      throw Error(ErrorCode::kFormat,
                  path.string() + ": ablation row " + std::to_string(i + 1) +
                      " needs method,accuracy");
    }
    try {
      out.push_back({rows[i][0], std::stod(rows[i][1]), 0.0});
    } catch (const std::exception &) {
      throw Error(ErrorCode::kFormat,
                  path.string() + ": non-numeric accuracy for '" + rows[i][0] + "'");
    }
  }
  auto ref = std::find_if(out.begin(), out.end(),
                          [&](const AblationEntry &e) { return e.method == reference; });
  if (ref == out.end()) {
    throw Error(ErrorCode::kInvalidInput,
                path.string() + ": no '" + std::string(reference) + "' row");
  }
  const double ref_acc = ref->accuracy;
  for (auto &e : out) e.gap = ref_acc - e.accuracy;
  return out;
}

}  // namespace xampler
