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

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "analogy/checkpoint.hpp"
#include "analogy/train.hpp"

namespace analogy {
namespace {

ModelConfig Tiny() {
  ModelConfig c;
  c.embed_dim = 16;
  c.n_layers = 1;
  c.n_heads = 2;
  c.ff_dim = 32;
  c.dropout = 0.0;
  return c;
}

DatasetConfig SmallData(int n_train) {
  DatasetConfig c;
  c.n_train = n_train;
  c.n_val = 32;
  c.n_test = 0;
  c.include_copy = true;
  return c;
}

TEST(Schedule, LinearDecayPerEpoch) {
  TrainConfig c;
  c.epochs = 20;
  EXPECT_NEAR(c.LearningRate(0), 1e-3, 1e-15);
  EXPECT_NEAR(c.LearningRate(10), 5e-4, 1e-15);
  EXPECT_NEAR(c.LearningRate(19), 5e-5, 1e-15);
  for (int e = 1; e < 20; ++e) EXPECT_LT(c.LearningRate(e), c.LearningRate(e - 1));
}

TEST(Config, JsonRoundTripAndUnknownKeys) {
  TrainConfig c;
  c.epochs = 7;
  c.batching = BatchingStrategy::kByAlphabet;
  const TrainConfig back = TrainConfigFromJson(Json::parse(TrainConfigToJson(c).dump()));
  EXPECT_EQ(back.epochs, 7);
  EXPECT_EQ(back.batching, BatchingStrategy::kByAlphabet);
  EXPECT_THROW(TrainConfigFromJson(Json{{"epoch", 3}}), Error);
  EXPECT_THROW(TrainConfigFromJson(Json{{"batch_size", 0}}), Error);
  EXPECT_THROW(ParseBatching("sometimes"), Error);
}

class Batching : public ::testing::TestWithParam<BatchingStrategy> {};

TEST_P(Batching, PartitionsAndGroups) {
  const Dataset ds = BuildDataset(SmallData(700), false);
  const auto& tasks = ds.splits.at(kSplitTrain);
  const auto batches = MakeBatches(tasks, GetParam(), 32, 5);
  std::vector<int> seen(tasks.size(), 0);
  for (const auto& b : batches) {
    ASSERT_FALSE(b.empty());
    ASSERT_LE(b.size(), 32u);
    std::set<int> tags, alphabets;
    for (int i : b) {
      ++seen[i];
      tags.insert(static_cast<int>(tasks[i].transformation.tag));
      alphabets.insert(tasks[i].alphabet_ref);
    }
    const BatchingStrategy s = GetParam();
    if (s == BatchingStrategy::kByTransformation ||
        s == BatchingStrategy::kByTransformationAndAlphabet) {
      EXPECT_EQ(tags.size(), 1u);
    }
    if (s == BatchingStrategy::kByAlphabet ||
        s == BatchingStrategy::kByTransformationAndAlphabet) {
      EXPECT_EQ(alphabets.size(), 1u);
    }
  }
  for (int c : seen) EXPECT_EQ(c, 1);
  EXPECT_EQ(MakeBatches(tasks, GetParam(), 32, 5), batches);
  EXPECT_NE(MakeBatches(tasks, GetParam(), 32, 6), batches);
}

INSTANTIATE_TEST_SUITE_P(All, Batching,
                         ::testing::Values(BatchingStrategy::kRandom,
                                           BatchingStrategy::kByTransformation,
                                           BatchingStrategy::kByAlphabet,
                                           BatchingStrategy::kByTransformationAndAlphabet),
                         [](const auto& info) {
                           std::string n = BatchingName(info.param);
                           for (char& c : n) {
                             if (!std::isalnum(static_cast<unsigned char>(c))) c = '_';
                           }
                           return n;
                         });

TEST(Adam, FirstStepMovesByLearningRate) {
  auto p = InitParams<float>(Tiny(), 1);
  const auto before = p;
  auto g = p.ZerosLike();
  g.out_b.setConstant(0.5f);
  TrainConfig c;
  AdamOptimizer adam(p, c);
  adam.Step(p, g, 1e-2);
  // With bias correction the first update is lr * sign(g) up to eps.
  for (Eigen::Index i = 0; i < p.out_b.size(); ++i) {
    EXPECT_NEAR(before.out_b(i) - p.out_b(i), 1e-2f, 1e-6f);
  }
  EXPECT_TRUE(p.out_w == before.out_w);
}

TEST(Clip, GlobalNormAndScale) {
  auto g = InitParams<double>(Tiny(), 1).ZerosLike();
  g.out_b(0) = 3.0;
  g.out_w(0, 0) = 4.0;
  EXPECT_DOUBLE_EQ(GlobalNorm(g), 5.0);
  Scale(g, 0.2);
  EXPECT_DOUBLE_EQ(GlobalNorm(g), 1.0);
}

TEST(Train, LossDecreasesAndIsReproducible) {
  const Dataset ds = BuildDataset(SmallData(256), false);
  TrainConfig c;
  c.epochs = 6;
  c.base_lr = 3e-3;
  c.val_subsample = 32;
  const auto init = InitParams<float>(Tiny(), 3);
  const TrainResult a = Train(init, ds.splits.at(kSplitTrain), ds.splits.at(kSplitVal), c);
  ASSERT_EQ(a.metrics.size(), 6u);
  EXPECT_LT(a.metrics.back().train_loss, a.metrics.front().train_loss - 0.3);
  for (std::size_t e = 1; e < a.metrics.size(); ++e) {
    EXPECT_LT(a.metrics[e].train_loss, a.metrics[e - 1].train_loss);
  }
  for (const auto& m : a.metrics) {
    EXPECT_GE(m.val_accuracy, 0.0);
    EXPECT_LE(m.val_accuracy, 1.0);
  }
  const TrainResult b = Train(init, ds.splits.at(kSplitTrain), ds.splits.at(kSplitVal), c);
  EXPECT_EQ(a.checksum, b.checksum);
  EXPECT_DOUBLE_EQ(a.metrics.back().train_loss, b.metrics.back().train_loss);
}

TEST(Train, NonFiniteParametersDiverge) {
  const Dataset ds = BuildDataset(SmallData(64), false);
  auto init = InitParams<float>(Tiny(), 3);
  init.out_b(0) = std::numeric_limits<float>::quiet_NaN();
  TrainConfig c;
  c.epochs = 1;
  try {
    Train(init, ds.splits.at(kSplitTrain), ds.splits.at(kSplitVal), c);
    FAIL() << "training on NaN parameters did not stop";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDiverged);
  }
}

TEST(Validation, SubsampleSkipsCopies) {
  const Dataset ds = BuildDataset(SmallData(10), false);
  const auto sub = ValidationSubsample(ds.splits.at(kSplitVal), 10);
  EXPECT_EQ(sub.size(), 10u);
  for (const AnalogyTask* t : sub) EXPECT_FALSE(t->is_copy);
}

TEST(Run, DirectoryLayout) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / ("run_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  RunSpec spec;
  spec.name = "tiny";
  spec.dataset = SmallData(96);
  spec.model = Tiny();
  spec.train.epochs = 2;
  spec.train.val_subsample = 16;
  const Dataset ds = BuildDataset(spec.dataset, false);
  const TrainResult r = TrainRun(spec, dir, ds);

  for (const char* f : {"config.json", "dataset_manifest.json", "metrics.jsonl",
                        "checkpoints/init.ckpt", "checkpoints/epoch_001.ckpt",
                        "checkpoints/epoch_002.ckpt", "checkpoints/final.ckpt"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  EXPECT_TRUE(fs::is_directory(dir / "reports"));
  std::ifstream metrics(dir / "metrics.jsonl");
  std::string line;
  int lines = 0;
  while (std::getline(metrics, line)) {
    const Json m = Json::parse(line);
    EXPECT_EQ(m.at("epoch").get<int>(), ++lines);
    for (const char* k : {"lr", "train_loss", "val_accuracy", "wall_time"}) {
      EXPECT_TRUE(m.contains(k)) << k;
    }
  }
  EXPECT_EQ(lines, 2);
  EXPECT_EQ(LoadCheckpoint(dir / "checkpoints/final.ckpt").meta.checksum, r.checksum);
  const RunSpec back = RunSpecFromJson(Json::parse(std::ifstream(dir / "config.json")));
  EXPECT_EQ(back.train.epochs, 2);
  EXPECT_EQ(back.model.embed_dim, 16);
  fs::remove_all(dir);
}

}  // namespace
}  // namespace analogy
