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

#include "xampler/corpus.h"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include "json.hpp"
#include "xampler/error.h"

namespace xampler {

using json = nlohmann::json;

namespace {

[[noreturn]] void FailAt(const std::filesystem::path &path, std::size_t line,
                         const std::string &what) {
  std::ostringstream os;
  os << path.string() << ":" << line << ": " << what;
  throw Error(ErrorCode::kInvalidInput, os.str());
}

std::string RequireString(const json &record, const char *key,
                          const std::filesystem::path &path,
                          std::size_t line) {
  auto it = record.find(key);
  if (it == record.end() || !it->is_string()) {
    FailAt(path, line, std::string("missing or non-string field \"") + key +
                           "\"");
  }
  return it->get<std::string>();
}

}  // namespace

const char *DatasetRoleName(DatasetRole role) {
  return role == DatasetRole::kTrain ? "train" : "eval";
}

bool Dataset::HasLabel(std::string_view label) const {
  return std::find(label_set.begin(), label_set.end(), label) !=
         label_set.end();
}

void Dataset::Validate() const {
  if (label_set.empty()) {
    throw Error(ErrorCode::kInvalidInput, "dataset '" + name +
                                              "': empty label set");
  }
  std::unordered_set<std::string> labels;
  for (const auto &label : label_set) {
    if (!labels.insert(label).second) {
      throw Error(ErrorCode::kInvalidInput,
                  "dataset '" + name + "': duplicate label '" + label + "'");
    }
  }
  std::unordered_set<std::string> ids;
  for (const auto &ex : examples) {
    if (ex.id.empty()) {
      throw Error(ErrorCode::kInvalidInput,
                  "dataset '" + name + "': example with empty id");
    }
    if (!ids.insert(ex.id).second) {
      throw Error(ErrorCode::kInvalidInput,
                  "dataset '" + name + "': duplicate id '" + ex.id + "'");
    }
    if (ex.text.empty()) {
      throw Error(ErrorCode::kInvalidInput,
                  "dataset '" + name + "': example '" + ex.id +
                      "' has empty text");
    }
    if (labels.count(ex.label) == 0) {
      throw Error(ErrorCode::kInvalidInput,
                  "dataset '" + name + "': example '" + ex.id +
                      "' has label '" + ex.label +
                      "' outside the declared label set");
    }
  }
}

std::unordered_map<std::string, std::size_t> IndexById(const Dataset &ds) {
  std::unordered_map<std::string, std::size_t> index;
  index.reserve(ds.examples.size());
  for (std::size_t i = 0; i < ds.examples.size(); ++i) {
    index.emplace(ds.examples[i].id, i);
  }
  return index;
}

Dataset LoadDataset(const std::filesystem::path &path, DatasetRole role) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::kIo, "cannot open dataset " + path.string());
  }

  Dataset ds;
  ds.name = path.stem().string();
  ds.role = role;
  bool declared = false;
  bool saw_record = false;
  std::unordered_map<std::string, std::size_t> first_line_of_id;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;

    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error &e) {
      FailAt(path, line_no, std::string("malformed JSON: ") + e.what());
    }
    if (!record.is_object()) FailAt(path, line_no, "record is not an object");

    if (record.contains("label_set")) {
      if (saw_record) {
        FailAt(path, line_no, "label_set header must be the first line");
      }
      const auto &labels = record["label_set"];
      if (!labels.is_array()) FailAt(path, line_no, "label_set is not a list");
      for (const auto &label : labels) {
        if (!label.is_string()) {
          FailAt(path, line_no, "label_set entries must be strings");
        }
        ds.label_set.push_back(label.get<std::string>());
      }
      if (auto it = record.find("name"); it != record.end() && it->is_string())
        ds.name = it->get<std::string>();
      declared = true;
      saw_record = true;
      continue;
    }
    saw_record = true;

    Example ex;
    ex.id = RequireString(record, "id", path, line_no);
    ex.text = RequireString(record, "text", path, line_no);
    ex.label = RequireString(record, "label", path, line_no);
    ex.language = RequireString(record, "language", path, line_no);
    if (ex.id.empty()) FailAt(path, line_no, "empty id");
    if (ex.text.empty()) FailAt(path, line_no, "empty text for id '" + ex.id + "'");
    auto [it, inserted] = first_line_of_id.emplace(ex.id, line_no);
    if (!inserted) {
      FailAt(path, line_no,
             "duplicate id '" + ex.id + "' (first seen on line " +
                 std::to_string(it->second) + ")");
    }
    if (declared && !ds.HasLabel(ex.label)) {
      FailAt(path, line_no,
             "label '" + ex.label + "' outside the declared label set");
    }
    ds.examples.push_back(std::move(ex));
  }

  if (!saw_record) {
    throw Error(ErrorCode::kInvalidInput,
                path.string() + ": empty dataset");
  }
  if (!declared) {
    std::set<std::string> labels;
    for (const auto &ex : ds.examples) labels.insert(ex.label);
    ds.label_set.assign(labels.begin(), labels.end());
  }
  ds.Validate();
  return ds;
}

void SaveDataset(const Dataset &ds, const std::filesystem::path &path) {
  ds.Validate();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error(ErrorCode::kIo, "cannot write dataset " + path.string());
  }
  json header = {{"label_set", ds.label_set}, {"name", ds.name}};
  out << header.dump() << '\n';
  for (const auto &ex : ds.examples) {
    json record = {{"id", ex.id},
                   {"text", ex.text},
                   {"label", ex.label},
                   {"language", ex.language}};
    out << record.dump() << '\n';
  }
  out.flush();
  if (!out) {
    throw Error(ErrorCode::kIo, "write failed for " + path.string());
  }
}

}  // namespace xampler
