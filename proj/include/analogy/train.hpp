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

// Training loop: batching strategies, Adam with per-epoch linear decay,
// validation and checkpointing.

#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "analogy/checkpoint.hpp"
#include "analogy/decode.hpp"
#include "analogy/io.hpp"
#include "analogy/model.hpp"
#include "analogy/taskgen.hpp"

namespace analogy {

enum class BatchingStrategy { kRandom, kByTransformation, kByAlphabet, kByTransformationAndAlphabet };

inline const char* BatchingName(BatchingStrategy s) {
  switch (s) {
    case BatchingStrategy::kRandom: return "random";
    case BatchingStrategy::kByTransformation: return "by_transformation";
    case BatchingStrategy::kByAlphabet: return "by_alphabet";
    case BatchingStrategy::kByTransformationAndAlphabet: return "by_transformation_and_alphabet";
  }
  return "?";
}

inline BatchingStrategy ParseBatching(const std::string& name) {
  for (auto s : {BatchingStrategy::kRandom, BatchingStrategy::kByTransformation,
                 BatchingStrategy::kByAlphabet, BatchingStrategy::kByTransformationAndAlphabet}) {
    if (name == BatchingName(s)) return s;
  }
  throw Error(ErrorCode::kInvalidConfig, "unknown batching strategy '" + name + "'");
}

struct TrainConfig {
  int batch_size = 32;
  int epochs = 20;
  double base_lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double clip_norm = 1.0;
  BatchingStrategy batching = BatchingStrategy::kRandom;
  std::uint64_t model_seed = 1;
  int val_subsample = 2000;
  bool checkpoint_every_epoch = true;

  // Linear decay applied after each epoch: base_lr * (1 - epoch / epochs).
  double LearningRate(int epoch) const {
    return base_lr * (1.0 - static_cast<double>(epoch) / epochs);
  }

  void Validate() const {
    if (batch_size < 1) throw Error(ErrorCode::kInvalidConfig, "batch_size must be >= 1");
    if (epochs < 1) throw Error(ErrorCode::kInvalidConfig, "epochs must be >= 1");
    if (!(base_lr > 0)) throw Error(ErrorCode::kInvalidConfig, "base_lr must be > 0");
    if (clip_norm < 0) throw Error(ErrorCode::kInvalidConfig, "clip_norm must be >= 0");
  }
};

inline OrderedJson TrainConfigToJson(const TrainConfig& c) {
  return {{"batch_size", c.batch_size},   {"epochs", c.epochs},
          {"base_lr", c.base_lr},         {"beta1", c.beta1},
          {"beta2", c.beta2},             {"adam_eps", c.adam_eps},
          {"clip_norm", c.clip_norm},     {"batching", BatchingName(c.batching)},
          {"model_seed", c.model_seed},   {"val_subsample", c.val_subsample},
          {"checkpoint_every_epoch", c.checkpoint_every_epoch}};
}

inline TrainConfig TrainConfigFromJson(const Json& j) {
  static const std::vector<std::string> kKeys = {
      "batch_size", "epochs",     "base_lr",       "beta1",
      "beta2",      "adam_eps",   "clip_norm",     "batching",
      "model_seed", "val_subsample", "checkpoint_every_epoch"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(kKeys.begin(), kKeys.end(), it.key()) == kKeys.end()) {
      throw Error(ErrorCode::kInvalidConfig, "train: unknown field '" + it.key() + "'");
    }
  }
  TrainConfig c;
  c.batch_size = j.value("batch_size", c.batch_size);
  c.epochs = j.value("epochs", c.epochs);
  c.base_lr = j.value("base_lr", c.base_lr);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.adam_eps = j.value("adam_eps", c.adam_eps);
  c.clip_norm = j.value("clip_norm", c.clip_norm);
  if (j.contains("batching")) c.batching = ParseBatching(j.at("batching").get<std::string>());
  c.model_seed = j.value("model_seed", c.model_seed);
  c.val_subsample = j.value("val_subsample", c.val_subsample);
  c.checkpoint_every_epoch = j.value("checkpoint_every_epoch", c.checkpoint_every_epoch);
  c.Validate();
  return c;
}

// Partitions task indices into batches for one epoch. Constrained strategies
// group tasks by the held-constant attribute and cut each group separately,
// so a group's last batch may be short.
inline std::vector<std::vector<int>> MakeBatches(const std::vector<AnalogyTask>& tasks,
                                                 BatchingStrategy strategy, int batch_size,
                                                 std::uint64_t epoch_seed) {
  std::mt19937_64 rng(epoch_seed);
  auto shuffle = [&](std::vector<int>& v) {
    for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
      std::swap(v[i], v[UniformIndex(rng, i + 1)]);
    }
  };
  auto key = [&](const AnalogyTask& t) -> std::pair<int, int> {
    const int tag = static_cast<int>(t.transformation.tag);
    switch (strategy) {
      case BatchingStrategy::kRandom: return {0, 0};
      case BatchingStrategy::kByTransformation: return {tag, 0};
      case BatchingStrategy::kByAlphabet: return {0, t.alphabet_ref};
      case BatchingStrategy::kByTransformationAndAlphabet: return {tag, t.alphabet_ref};
    }
    return {0, 0};
  };
  std::map<std::pair<int, int>, std::vector<int>> groups;
  for (int i = 0; i < static_cast<int>(tasks.size()); ++i) groups[key(tasks[i])].push_back(i);

  std::vector<std::vector<int>> batches;
  for (auto& [k, members] : groups) {
    shuffle(members);
    for (std::size_t s = 0; s < members.size(); s += batch_size) {
      const std::size_t e = std::min(members.size(), s + batch_size);
      batches.emplace_back(members.begin() + s, members.begin() + e);
    }
  }
  // Interleave groups by shuffling the batch order.
  std::vector<int> order(batches.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  shuffle(order);
  std::vector<std::vector<int>> out;
  out.reserve(batches.size());
  for (int i : order) out.push_back(std::move(batches[i]));
  return out;
}

// Adam with first/second moment estimates over every tensor.
class AdamOptimizer {
 public:
  AdamOptimizer(const ModelParams<float>& like, const TrainConfig& c)
      : m_(like.ZerosLike()), v_(like.ZerosLike()), c_(c) {}

  void Step(ModelParams<float>& p, const ModelParams<float>& g, double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(c_.beta1, t_);
    const double bc2 = 1.0 - std::pow(c_.beta2, t_);
    const float b1 = static_cast<float>(c_.beta1);
    const float b2 = static_cast<float>(c_.beta2);
    const float step = static_cast<float>(lr / bc1);
    const float inv_bc2 = static_cast<float>(1.0 / bc2);
    const float eps = static_cast<float>(c_.adam_eps);
    std::vector<float*> ps, ms, vs;
    std::vector<const float*> gs;
    std::vector<std::size_t> sizes;
    p.ForEachTensor([&](const std::string&, auto& t) {
      ps.push_back(t.data());
      sizes.push_back(t.size());
    });
    m_.ForEachTensor([&](const std::string&, auto& t) { ms.push_back(t.data()); });
    v_.ForEachTensor([&](const std::string&, auto& t) { vs.push_back(t.data()); });
    g.ForEachTensor([&](const std::string&, const auto& t) { gs.push_back(t.data()); });
    for (std::size_t k = 0; k < ps.size(); ++k) {
      for (std::size_t i = 0; i < sizes[k]; ++i) {
        const float gi = gs[k][i];
        ms[k][i] = b1 * ms[k][i] + (1 - b1) * gi;
        vs[k][i] = b2 * vs[k][i] + (1 - b2) * gi * gi;
        ps[k][i] -= step * ms[k][i] / (std::sqrt(vs[k][i] * inv_bc2) + eps);
      }
    }
  }

  long steps() const { return t_; }

 private:
  ModelParams<float> m_;
  ModelParams<float> v_;
  TrainConfig c_;
  long t_ = 0;
};

template <typename T>
double GlobalNorm(const ModelParams<T>& g) {
  double s = 0;
  g.ForEachTensor([&](const std::string&, const auto& t) {
    s += static_cast<double>(t.template cast<double>().squaredNorm());
  });
  return std::sqrt(s);
}

template <typename T>
void Scale(ModelParams<T>& g, T factor) {
  g.ForEachTensor([&](const std::string&, auto& t) { t *= factor; });
}

// Exact-match accuracy of greedy decoding over `tasks` (0 when empty).
inline double GreedyAccuracy(const ModelParams<float>& p, const std::vector<const AnalogyTask*>& tasks,
                             int chunk = 64) {
  if (tasks.empty()) return 0.0;
  int correct = 0;
  for (std::size_t s = 0; s < tasks.size(); s += chunk) {
    const std::size_t e = std::min(tasks.size(), s + chunk);
    std::vector<TokenSeq> enc;
    std::vector<int> bounds;
    for (std::size_t i = s; i < e; ++i) {
      enc.push_back(EncodeEncoder(tasks[i]->alphabet, tasks[i]->examples, tasks[i]->query));
      bounds.push_back(static_cast<int>(tasks[i]->target.size()) + kDecodeSlack);
    }
    const auto decoded = GreedyDecode(p, enc, bounds);
    for (std::size_t i = s; i < e; ++i) {
      const Decoded& d = decoded[i - s];
      correct += d.finished && !d.malformed && d.letters == tasks[i]->target;
    }
  }
  return static_cast<double>(correct) / tasks.size();
}

struct EpochMetrics {
  int epoch = 0;  // 1-based count of completed epochs
  double lr = 0;
  double train_loss = 0;
  double val_accuracy = 0;
  double wall_time = 0;
};

inline OrderedJson MetricsToJson(const EpochMetrics& m) {
  return {{"epoch", m.epoch},
          {"lr", m.lr},
          {"train_loss", m.train_loss},
          {"val_accuracy", m.val_accuracy},
          {"wall_time", m.wall_time}};
}

struct TrainResult {
  ModelParams<float> params;
  std::vector<EpochMetrics> metrics;
  std::uint64_t checksum = 0;
};

struct TrainHooks {
  // Called after every epoch; the run directory writer hangs off this.
  std::function<void(const EpochMetrics&, const ModelParams<float>&)> on_epoch;
  // Optional progress line sink.
  std::function<void(const std::string&)> log;
};

// Fixed validation subsample: the first `n` non-copy tasks of the split.
inline std::vector<const AnalogyTask*> ValidationSubsample(const std::vector<AnalogyTask>& val,
                                                           int n) {
  std::vector<const AnalogyTask*> out;
  for (const AnalogyTask& t : val) {
    if (static_cast<int>(out.size()) >= n) break;
    if (!t.is_copy) out.push_back(&t);
  }
  return out;
}

// Trains from `init` on `train_tasks`. Deterministic given the config seeds;
// wall_time is the only non-reproducible metrics field.
inline TrainResult Train(ModelParams<float> params, const std::vector<AnalogyTask>& train_tasks,
                         const std::vector<AnalogyTask>& val_tasks, const TrainConfig& config,
                         const TrainHooks& hooks = {}) {
  config.Validate();
  if (train_tasks.empty()) throw Error(ErrorCode::kInvalidConfig, "empty training split");
  TrainResult result;
  AdamOptimizer adam(params, config);
  ModelParams<float> grads = params.ZerosLike();
  const auto val = ValidationSubsample(val_tasks, config.val_subsample);
  const auto start = std::chrono::steady_clock::now();
  long step = 0;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = config.LearningRate(epoch);
    const auto batches = MakeBatches(train_tasks, config.batching, config.batch_size,
                                     MixSeed(config.model_seed, 0xE90C0000ull + epoch));
    double loss_sum = 0;
    long loss_count = 0;
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      std::vector<const AnalogyTask*> members;
      for (int i : batches[bi]) members.push_back(&train_tasks[i]);
      const TrainBatch batch = TrainBatch::FromTasks(members);
      grads.ForEachTensor([](const std::string&, auto& t) { t.setZero(); });
      float loss;
      try {
        loss = LossAndGradients(params, batch, Mode::kTrain,
                                MixSeed(config.model_seed ^ 0xD0D0D0D0ull, step), &grads);
      } catch (const Error& e) {
        if (e.code() == ErrorCode::kNonFinite) {
          throw Error(ErrorCode::kDiverged, "epoch " + std::to_string(epoch + 1) + " step " +
                                                std::to_string(step) + ": " + e.what());
        }
        throw;
      }
      const double norm = GlobalNorm(grads);
      if (!std::isfinite(norm)) {
        throw Error(ErrorCode::kDiverged, "non-finite gradient norm at step " + std::to_string(step));
      }
      if (config.clip_norm > 0 && norm > config.clip_norm) {
        Scale(grads, static_cast<float>(config.clip_norm / norm));
      }
      adam.Step(params, grads, lr);
      loss_sum += loss;
      ++loss_count;
      ++step;
      if (hooks.log && (bi + 1) % 200 == 0) {
        hooks.log("epoch " + std::to_string(epoch + 1) + " batch " + std::to_string(bi + 1) + "/" +
                  std::to_string(batches.size()) + " loss " +
                  std::to_string(loss_sum / loss_count));
      }
    }
    EpochMetrics m;
    m.epoch = epoch + 1;
    m.lr = lr;
    m.train_loss = loss_sum / std::max(1L, loss_count);
    m.val_accuracy = GreedyAccuracy(params, val);
    m.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.metrics.push_back(m);
    if (hooks.log) {
      hooks.log("epoch " + std::to_string(m.epoch) + " lr " + std::to_string(m.lr) +
                " train_loss " + std::to_string(m.train_loss) + " val_accuracy " +
                std::to_string(m.val_accuracy));
    }
    if (hooks.on_epoch) hooks.on_epoch(m, params);
  }
  result.checksum = Checksum(params);
  result.params = std::move(params);
  return result;
}

// ---------------------------------------------------------------------------
// Run directories
//
//   <run>/config.json          snapshot written before training starts
//   <run>/dataset_manifest.json
//   <run>/metrics.jsonl        one EpochMetrics record per line
//   <run>/checkpoints/epoch_NNN.ckpt, final.ckpt
//   <run>/reports/, <run>/figures/

struct RunSpec {
  std::string name;
  DatasetConfig dataset;
  TrainConfig train;
  ModelConfig model;
};

inline OrderedJson RunSpecToJson(const RunSpec& r) {
  return {{"name", r.name},
          {"dataset", DatasetConfigToJson(r.dataset)},
          {"train", TrainConfigToJson(r.train)},
          {"model", ModelConfigToJson(r.model)}};
}

inline RunSpec RunSpecFromJson(const Json& j) {
  static const std::vector<std::string> kKeys = {"name", "dataset", "train", "model"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(kKeys.begin(), kKeys.end(), it.key()) == kKeys.end()) {
      throw Error(ErrorCode::kInvalidConfig, "unknown top-level field '" + it.key() + "'");
    }
  }
  RunSpec r;
  r.name = j.value("name", std::string("run"));
  r.dataset = DatasetConfigFromJson(j.value("dataset", Json::object()));
  r.train = TrainConfigFromJson(j.value("train", Json::object()));
  r.model = ModelConfigFromJson(j.value("model", Json::object()));
  return r;
}

// Trains one run and materialises its directory. The dataset is regenerated
// from the spec's dataset config (generation is deterministic).
inline TrainResult TrainRun(const RunSpec& spec, const std::filesystem::path& dir,
                            const Dataset& ds,
                            std::function<void(const std::string&)> log = nullptr) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "checkpoints");
  fs::create_directories(dir / "reports");
  fs::create_directories(dir / "figures");
  std::ofstream(dir / "config.json") << RunSpecToJson(spec).dump(2) << '\n';
  {
    OrderedJson m;
    m["config"] = DatasetConfigToJson(ds.config);
    OrderedJson counts;
    for (const auto& [name, tasks] : ds.splits) counts[name] = tasks.size();
    m["splits"] = counts;
    OrderedJson pool = OrderedJson::array();
    for (const Alphabet& a : ds.pool) pool.push_back(AlphabetToJson(a));
    m["alphabet_pool"] = pool;
    OrderedJson fresh = OrderedJson::array();
    for (const Alphabet& a : ds.new_alphabets) fresh.push_back(AlphabetToJson(a));
    m["new_alphabets"] = fresh;
    std::ofstream(dir / "dataset_manifest.json") << m.dump(2) << '\n';
  }
  std::ofstream metrics(dir / "metrics.jsonl", std::ios::app);

  auto meta_for = [&](int epoch) {
    CheckpointMeta meta;
    meta.seed = spec.train.model_seed;
    meta.epoch = epoch;
    meta.extra = {{"run", spec.name}, {"dataset_seed", ds.config.seed}};
    return meta;
  };
  TrainHooks hooks;
  hooks.log = log;
  hooks.on_epoch = [&](const EpochMetrics& m, const ModelParams<float>& p) {
    metrics << MetricsToJson(m).dump() << '\n';
    metrics.flush();
    if (spec.train.checkpoint_every_epoch) {
      char name[32];
      std::snprintf(name, sizeof(name), "epoch_%03d.ckpt", m.epoch);
      SaveCheckpoint(dir / "checkpoints" / name, p, meta_for(m.epoch));
    }
  };
  ModelParams<float> init = InitParams<float>(spec.model, spec.train.model_seed);
  SaveCheckpoint(dir / "checkpoints" / "init.ckpt", init, meta_for(0));
  TrainResult r = Train(std::move(init), ds.splits.at(kSplitTrain), ds.splits.at(kSplitVal),
                        spec.train, hooks);
  SaveCheckpoint(dir / "checkpoints" / "final.ckpt", r.params, meta_for(spec.train.epochs));
  return r;
}

}  // namespace analogy
