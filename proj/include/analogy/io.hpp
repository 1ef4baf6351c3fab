// Copyright 2026 The Analogy Lab Authors.
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

// JSON encodings of tasks, alphabets and dataset configs, plus the
// line-delimited dataset files.

#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "analogy/core.hpp"
#include "analogy/taskgen.hpp"
#include "json.hpp"

namespace analogy {

using Json = nlohmann::json;
using OrderedJson = nlohmann::ordered_json;

inline constexpr int kDatasetFormatVersion = 1;

inline OrderedJson AlphabetToJson(const Alphabet& a) {
  return {{"order", a.ToString()},
          {"permutation_count", a.permutation_count()},
          {"seed", a.seed()}};
}

inline Alphabet AlphabetFromJson(const Json& j) {
  return Alphabet::FromString(j.at("order").get<std::string>(),
                              j.value("permutation_count", 0),
                              j.value("seed", std::uint64_t{0}));
}

inline OrderedJson TaskToJson(const AnalogyTask& t) {
  OrderedJson examples = OrderedJson::array();
  for (const ExamplePair& ex : t.examples) {
    examples.push_back({ToSpaced(ex.input), ToSpaced(ex.output)});
  }
  OrderedJson j;
  j["id"] = t.id;
  j["alphabet"] = t.alphabet.ToString();
  j["alphabet_meta"] = {{"permutation_count", t.alphabet.permutation_count()},
                        {"seed", t.alphabet.seed()},
                        {"ref", t.alphabet_ref},
                        {"set", AlphabetSetName(t.alphabet_set)}};
  j["examples"] = std::move(examples);
  j["query"] = ToSpaced(t.query);
  j["target"] = ToSpaced(t.target);
  j["transformation"] = TransformName(t.transformation.tag);
  if (t.transformation.tag == TransformTag::kShift) {
    j["shift_offset"] = t.transformation.shift_offset;
  }
  j["is_copy"] = t.is_copy;
  j["split"] = t.split;
  return j;
}

inline AnalogyTask TaskFromJson(const Json& j) {
  AnalogyTask t;
  t.id = j.value("id", std::uint64_t{0});
  int k = 0;
  std::uint64_t seed = 0;
  if (j.contains("alphabet_meta")) {
    const Json& m = j.at("alphabet_meta");
    k = m.value("permutation_count", 0);
    seed = m.value("seed", std::uint64_t{0});
    t.alphabet_ref = m.value("ref", -1);
    t.alphabet_set = m.value("set", std::string("seen")) == "new" ? AlphabetSet::kNew
                                                                  : AlphabetSet::kSeen;
  }
  t.alphabet = Alphabet::FromString(j.at("alphabet").get<std::string>(), k, seed);
  for (const Json& ex : j.at("examples")) {
    t.examples.push_back({ParseLetters(ex.at(0).get<std::string>()),
                          ParseLetters(ex.at(1).get<std::string>())});
  }
  t.query = ParseLetters(j.at("query").get<std::string>());
  t.target = ParseLetters(j.at("target").get<std::string>());
  t.transformation.tag = ParseTransformTag(j.at("transformation").get<std::string>());
  t.transformation.shift_offset = j.value("shift_offset", 3);
  t.is_copy = j.value("is_copy", false);
  t.split = j.value("split", std::string());
  return t;
}

inline OrderedJson DatasetConfigToJson(const DatasetConfig& c) {
  return {{"alphabet_pool_size", c.alphabet_pool_size},
          {"include_copy", c.include_copy},
          {"n_examples", c.n_examples},
          {"n_train", c.n_train},
          {"n_val", c.n_val},
          {"n_test", c.n_test},
          {"n_ood", c.n_ood},
          {"shift_offset", c.shift_offset},
          {"seed", c.seed}};
}

// Unknown keys are rejected so typos surface as errors.
inline DatasetConfig DatasetConfigFromJson(const Json& j) {
  static const std::vector<std::string> kKeys = {
      "alphabet_pool_size", "include_copy", "n_examples", "n_train", "n_val",
      "n_test",             "n_ood",        "shift_offset", "seed"};
  DatasetConfig c = DatasetConfig::Default(j.value("include_copy", false));
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(kKeys.begin(), kKeys.end(), it.key()) == kKeys.end()) {
      throw Error(ErrorCode::kInvalidConfig, "dataset: unknown field '" + it.key() + "'");
    }
  }
  auto get = [&](const char* key, auto& field) {
    if (!j.contains(key)) return;
    try {
      j.at(key).get_to(field);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kInvalidConfig,
                  std::string("dataset.") + key + ": " + e.what());
    }
  };
  get("alphabet_pool_size", c.alphabet_pool_size);
  get("include_copy", c.include_copy);
  get("n_examples", c.n_examples);
  get("n_train", c.n_train);
  get("n_val", c.n_val);
  get("n_test", c.n_test);
  get("n_ood", c.n_ood);
  get("shift_offset", c.shift_offset);
  get("seed", c.seed);
  c.Validate();
  return c;
}

inline void WriteTasks(const std::filesystem::path& path,
                       const std::vector<AnalogyTask>& tasks) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  for (const AnalogyTask& t : tasks) out << TaskToJson(t).dump() << '\n';
}

inline std::vector<AnalogyTask> ReadTasks(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path.string());
  std::vector<AnalogyTask> tasks;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      tasks.push_back(TaskFromJson(Json::parse(line)));
    } catch (const std::exception& e) {
      throw Error(ErrorCode::kParseError,
                  path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return tasks;
}

// Writes <dir>/<split>.jsonl for every split plus manifest.json.
inline void WriteDataset(const std::filesystem::path& dir, const Dataset& ds) {
  std::filesystem::create_directories(dir);
  OrderedJson manifest;
  manifest["format_version"] = kDatasetFormatVersion;
  manifest["config"] = DatasetConfigToJson(ds.config);
  OrderedJson pool = OrderedJson::array();
  for (const Alphabet& a : ds.pool) pool.push_back(AlphabetToJson(a));
  OrderedJson fresh = OrderedJson::array();
  for (const Alphabet& a : ds.new_alphabets) fresh.push_back(AlphabetToJson(a));
  manifest["alphabet_pool"] = std::move(pool);
  manifest["new_alphabets"] = std::move(fresh);
  OrderedJson counts;
  for (const auto& [name, tasks] : ds.splits) {
    WriteTasks(dir / (name + ".jsonl"), tasks);
    counts[name] = tasks.size();
  }
  manifest["splits"] = std::move(counts);
  std::ofstream(dir / "manifest.json") << manifest.dump(2) << '\n';
}

inline Dataset ReadDataset(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw Error(ErrorCode::kIo, "missing " + (dir / "manifest.json").string());
  Json manifest = Json::parse(in);
  Dataset ds;
  ds.config = DatasetConfigFromJson(manifest.at("config"));
  for (const Json& a : manifest.at("alphabet_pool")) ds.pool.push_back(AlphabetFromJson(a));
  for (const Json& a : manifest.at("new_alphabets")) {
    ds.new_alphabets.push_back(AlphabetFromJson(a));
  }
  for (auto it = manifest.at("splits").begin(); it != manifest.at("splits").end(); ++it) {
    ds.splits[it.key()] = ReadTasks(dir / (it.key() + ".jsonl"));
  }
  return ds;
}

inline Json ReadJsonFile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kInvalidConfig, path.string() + ": " + e.what());
  }
}

}  // namespace analogy
