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

#include "xampler/dataconstruct.h"

#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_set>
#include <utility>

#include "json.hpp"
#include "xampler/error.h"

namespace xampler {

using json = nlohmann::json;

namespace {

using PairKey = std::pair<std::string, std::string>;

[[noreturn]] void FailAt(const std::filesystem::path &path, std::size_t line,
                         const std::string &what) {
  std::ostringstream os;
  os << path.string() << ":" << line << ": " << what;
  throw Error(ErrorCode::kInvalidInput, os.str());
}

Polarity ParsePolarity(const std::string &s, const std::filesystem::path &path,
                       std::size_t line) {
  if (s == "positive") return Polarity::kPositive;
  if (s == "negative") return Polarity::kNegative;
  FailAt(path, line, "unknown polarity '" + s + "'");
}

json PairToJson(const TrainingPair &p) {
  return {{"query_id", p.query_id},
          {"candidate_id", p.candidate_id},
          {"polarity", PolarityName(p.polarity)},
          {"mined_rank", p.mined_rank},
          {"mined_score", p.mined_score}};
}

}  // namespace

const char *PolarityName(Polarity p) {
  return p == Polarity::kPositive ? "positive" : "negative";
}

std::vector<CandidateSet> MineCandidates(const Dataset &train,
                                         const EmbeddingStore &store,
                                         std::size_t k) {
  if (k == 0) throw Error(ErrorCode::kInvalidInput, "k must be >= 1");
  std::vector<std::string> ids;
  ids.reserve(train.examples.size());
  Matrix pool(train.examples.size(), store.dim());
  for (std::size_t i = 0; i < train.examples.size(); ++i) {
    const auto &id = train.examples[i].id;
    auto row = store.Find(id);
    if (!row) {
      throw Error(ErrorCode::kInvalidInput,
                  "missing embedding row for id '" + id + "'");
    }
    ids.push_back(id);
    auto src = store.row(*row);
    std::copy(src.begin(), src.end(), pool.row(i).begin());
  }

  std::vector<CandidateSet> out;
  out.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    auto hits = TopKCosine(ids, pool, pool.row(i), k, {ids[i]});
    CandidateSet cs;
    cs.query_id = ids[i];
    for (auto &hit : hits) {
      cs.candidate_ids.push_back(std::move(hit.id));
      cs.scores.push_back(hit.score);
    }
    out.push_back(std::move(cs));
  }
  return out;
}

std::vector<TrainingPair> ConstructPairs(const Dataset &train,
                                         std::span<const CandidateSet> cands,
                                         ScorerClient &scorer,
                                         const PromptSpec &spec,
                                         const ConstructOptions &options) {
  spec.Validate();
  const auto index = IndexById(train);
  auto lookup = [&](const std::string &id) -> const Example & {
    auto it = index.find(id);
    if (it == index.end()) {
      throw Error(ErrorCode::kInvalidInput,
                  "candidate id '" + id + "' is not in the training pool");
    }
    return train.examples[it->second];
  };

  // Flatten to the full pair list first so that ordering is fixed by the
  // candidate sets, independent of scoring order.
  std::vector<TrainingPair> pairs;
  std::set<PairKey> seen;
  for (const auto &cs : cands) {
    lookup(cs.query_id);
    for (std::size_t r = 0; r < cs.candidate_ids.size(); ++r) {
      const auto &cid = cs.candidate_ids[r];
      if (cid == cs.query_id) {
        throw Error(ErrorCode::kInvalidInput,
                    "query '" + cs.query_id + "' appears in its own candidates");
      }
      lookup(cid);
      if (!seen.emplace(cs.query_id, cid).second) {
        throw Error(ErrorCode::kInvalidInput,
                    "duplicate pair (" + cs.query_id + ", " + cid + ")");
      }
      TrainingPair p;
      p.query_id = cs.query_id;
      p.candidate_id = cid;
      p.mined_rank = static_cast<int>(r + 1);
      p.mined_score = r < cs.scores.size() ? cs.scores[r] : 0.0;
      pairs.push_back(std::move(p));
    }
  }

  std::map<PairKey, Polarity> done;
  if (options.checkpoint && std::filesystem::exists(*options.checkpoint)) {
    for (const auto &p : LoadPairs(*options.checkpoint)) {
      if (seen.count({p.query_id, p.candidate_id})) {
        done.emplace(PairKey{p.query_id, p.candidate_id}, p.polarity);
      }
    }
  }

  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    auto it = done.find({pairs[i].query_id, pairs[i].candidate_id});
    if (it != done.end()) {
      pairs[i].polarity = it->second;
    } else {
      todo.push_back(i);
    }
  }

  auto write_checkpoint = [&] {
    if (!options.checkpoint) return;
    std::vector<TrainingPair> scored;
    for (const auto &p : pairs) {
      if (done.count({p.query_id, p.candidate_id})) scored.push_back(p);
    }
    SavePairs(scored, *options.checkpoint);
  };

  const std::size_t chunk = std::max<std::size_t>(options.checkpoint_every, 1);
  for (std::size_t begin = 0; begin < todo.size(); begin += chunk) {
    const std::size_t end = std::min(todo.size(), begin + chunk);
    std::vector<ScoreRequest> requests;
    requests.reserve(end - begin);
    for (std::size_t t = begin; t < end; ++t) {
      const TrainingPair &p = pairs[todo[t]];
      const Example &query = lookup(p.query_id);
      const Example &shot = lookup(p.candidate_id);
      ScoreRequest req;
      req.prompt_prefix = RenderPrompt(spec, std::span(&shot, 1), query.text);
      req.continuations = train.label_set;
      req.meta = PromptMeta{{shot.label}, shot.label, query.label};
      requests.push_back(std::move(req));
    }
    std::vector<Prediction> predictions;
    try {
      predictions = ScoreAll(scorer, requests, options.parallelism);
    } catch (...) {
      write_checkpoint();
      throw;
    }
    for (std::size_t t = begin; t < end; ++t) {
      TrainingPair &p = pairs[todo[t]];
      p.polarity = predictions[t - begin].label == lookup(p.query_id).label
                       ? Polarity::kPositive
                       : Polarity::kNegative;
      done.emplace(PairKey{p.query_id, p.candidate_id}, p.polarity);
    }
    write_checkpoint();
  }

  if (options.checkpoint) {
    std::error_code ec;
    std::filesystem::remove(*options.checkpoint, ec);
  }
  return pairs;
}

void SavePairs(std::span<const TrainingPair> pairs,
               const std::filesystem::path &path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  for (const auto &p : pairs) out << PairToJson(p).dump() << '\n';
  out.flush();
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

std::vector<TrainingPair> LoadPairs(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::vector<TrainingPair> pairs;
  std::set<PairKey> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json r;
    try {
      r = json::parse(line);
    } catch (const json::parse_error &) {
      FailAt(path, line_no, "malformed JSON record");
    }
    if (!r.is_object() || !r.contains("query_id") || !r["query_id"].is_string() ||
        !r.contains("candidate_id") || !r["candidate_id"].is_string() ||
        !r.contains("polarity") || !r["polarity"].is_string() ||
        !r.contains("mined_rank") || !r["mined_rank"].is_number_integer() ||
        !r.contains("mined_score") || !r["mined_score"].is_number()) {
      FailAt(path, line_no, "malformed pair record");
    }
    TrainingPair p;
    p.query_id = r["query_id"].get<std::string>();
    p.candidate_id = r["candidate_id"].get<std::string>();
    p.polarity = ParsePolarity(r["polarity"].get<std::string>(), path, line_no);
    p.mined_rank = r["mined_rank"].get<int>();
    p.mined_score = r["mined_score"].get<double>();
    if (!seen.emplace(p.query_id, p.candidate_id).second) {
      FailAt(path, line_no,
             "duplicate pair (" + p.query_id + ", " + p.candidate_id + ")");
    }
    pairs.push_back(std::move(p));
  }
  return pairs;
}

void SaveCandidates(std::span<const CandidateSet> cands,
                    const std::filesystem::path &path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  for (const auto &cs : cands) {
    json r = {{"query_id", cs.query_id},
              {"candidate_ids", cs.candidate_ids},
              {"scores", cs.scores}};
    out << r.dump() << '\n';
  }
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

std::vector<CandidateSet> LoadCandidates(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::vector<CandidateSet> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      json r = json::parse(line);
      CandidateSet cs;
      cs.query_id = r.at("query_id").get<std::string>();
      cs.candidate_ids = r.at("candidate_ids").get<std::vector<std::string>>();
      cs.scores = r.value("scores", std::vector<double>{});
      std::unordered_set<std::string> uniq(cs.candidate_ids.begin(),
                                           cs.candidate_ids.end());
      if (uniq.size() != cs.candidate_ids.size() || uniq.count(cs.query_id)) {
        FailAt(path, line_no, "candidate list repeats an id or the query");
      }
      out.push_back(std::move(cs));
    } catch (const json::exception &) {
      FailAt(path, line_no, "malformed candidate record");
    }
  }
  return out;
}

}  // namespace xampler
