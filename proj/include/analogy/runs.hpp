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

#pragma once

// Reading run directories back: spec, checkpoints, metrics, and the
// evaluation suites regenerated from the run's dataset config.

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "analogy/checkpoint.hpp"
#include "analogy/eval.hpp"
#include "analogy/io.hpp"
#include "analogy/train.hpp"

namespace analogy {

struct OpenedRun {
  std::filesystem::path dir;
  RunSpec spec;
  ModelParams<float> params;
  CheckpointMeta meta;
};

inline RunSpec ReadRunSpec(const std::filesystem::path& dir) {
  return RunSpecFromJson(ReadJsonFile(dir / "config.json"));
}

// `checkpoint` is a file name under <dir>/checkpoints or a path.
inline OpenedRun OpenRun(const std::filesystem::path& dir,
                         const std::string& checkpoint = "final.ckpt") {
  namespace fs = std::filesystem;
  OpenedRun r;
  r.dir = dir;
  r.spec = ReadRunSpec(dir);
  fs::path ck = checkpoint;
  if (!ck.has_parent_path()) ck = dir / "checkpoints" / ck;
  if (!fs::exists(ck)) throw Error(ErrorCode::kIo, "missing checkpoint " + ck.string());
  LoadedCheckpoint lc = LoadCheckpoint(ck);
  r.params = std::move(lc.params);
  r.meta = lc.meta;
  return r;
}

inline std::vector<EpochMetrics> ReadMetrics(const std::filesystem::path& dir) {
  std::ifstream in(dir / "metrics.jsonl");
  if (!in) throw Error(ErrorCode::kIo, "missing " + (dir / "metrics.jsonl").string());
  std::vector<EpochMetrics> out;
  for (std::string line; std::getline(in, line);) {
    if (line.empty()) continue;
    const Json j = Json::parse(line);
    EpochMetrics m;
    m.epoch = j.at("epoch");
    m.lr = j.at("lr");
    m.train_loss = j.at("train_loss");
    m.val_accuracy = j.at("val_accuracy");
    m.wall_time = j.at("wall_time");
    out.push_back(m);
  }
  return out;
}

// Held-out splits of the run's dataset. Every task is generated from its own
// (seed, split, index) stream, so these match the full dataset's first
// n_test / n_ood tasks without regenerating the training split.
inline Dataset EvaluationSuites(const DatasetConfig& c, int n_test, int n_ood) {
  DatasetConfig e = c;
  e.n_train = 0;
  e.n_val = 0;
  e.n_test = n_test;
  e.n_ood = n_ood;
  return BuildDataset(e, true);
}

// Non-copy results of a run over the in-distribution test split and the
// three out-of-distribution suites.
inline std::vector<EvalResult> EvaluateRun(const OpenedRun& run, int n_per_suite) {
  const Dataset ds = EvaluationSuites(run.spec.dataset, n_per_suite, n_per_suite);
  std::vector<EvalResult> all;
  for (const char* s : {kSplitTest, kSuiteNewAlphabet, kSuiteNewTransform, kSuiteNewBoth}) {
    auto rs = Evaluate(run.params, ds.splits.at(s));
    all.insert(all.end(), rs.begin(), rs.end());
  }
  return all;
}

}  // namespace analogy
