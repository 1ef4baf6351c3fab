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

// analogy: command-line entry point.
//
// Config precedence: built-in defaults < config file (--config) < flags.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "analogy/checkpoint.hpp"
#include "analogy/io.hpp"
#include "analogy/train.hpp"
#include "cli_commands.hpp"

namespace fs = std::filesystem;
using namespace analogy;

namespace {

struct GenArgs {
  std::string config;
  std::string out = "data";
  std::optional<std::uint64_t> seed;
  std::optional<bool> copy;
  std::optional<int> pool;
  std::optional<int> n_examples;
  std::optional<int> n_train;
  bool no_ood = false;
};

int RunGen(const GenArgs& a) {
  DatasetConfig c = a.config.empty() ? DatasetConfig::Default(a.copy.value_or(false))
                                     : DatasetConfigFromJson(ReadJsonFile(a.config));
  if (a.copy) c.include_copy = *a.copy;
  if (a.seed) c.seed = *a.seed;
  if (a.pool) c.alphabet_pool_size = *a.pool;
  if (a.n_examples) c.n_examples = *a.n_examples;
  if (a.n_train) c.n_train = *a.n_train;
  c.Validate();
  fs::create_directories(a.out);
  std::ofstream(fs::path(a.out) / "config.json") << DatasetConfigToJson(c).dump(2) << '\n';
  const Dataset ds = BuildDataset(c, !a.no_ood);
  WriteDataset(a.out, ds);
  for (const auto& [name, tasks] : ds.splits) {
    std::cout << name << ": " << tasks.size() << " tasks\n";
  }
  return 0;
}

struct TrainArgs {
  std::string config;
  std::string run_dir;
  std::optional<std::uint64_t> data_seed;
  std::optional<std::uint64_t> model_seed;
  std::optional<bool> copy;
  std::optional<int> pool;
  std::optional<int> n_examples;
  std::optional<int> n_train;
  std::optional<int> n_val;
  std::optional<int> epochs;
  std::optional<std::string> batching;
  bool quiet = false;
};

int RunTrain(const TrainArgs& a) {
  RunSpec spec;
  if (!a.config.empty()) {
    spec = RunSpecFromJson(ReadJsonFile(a.config));
  } else {
    spec.dataset = DatasetConfig::Default(a.copy.value_or(false));
  }
  if (a.copy) {
    spec.dataset.include_copy = *a.copy;
  }
  if (a.data_seed) spec.dataset.seed = *a.data_seed;
  if (a.pool) spec.dataset.alphabet_pool_size = *a.pool;
  if (a.n_examples) spec.dataset.n_examples = *a.n_examples;
  if (a.n_train) spec.dataset.n_train = *a.n_train;
  if (a.n_val) spec.dataset.n_val = *a.n_val;
  if (a.model_seed) spec.train.model_seed = *a.model_seed;
  if (a.epochs) spec.train.epochs = *a.epochs;
  if (a.batching) spec.train.batching = ParseBatching(*a.batching);
  spec.dataset.Validate();
  spec.train.Validate();
  spec.model.Validate();
  if (spec.name.empty() || spec.name == "run") spec.name = fs::path(a.run_dir).filename().string();

  if (fs::exists(fs::path(a.run_dir) / "checkpoints" / "final.ckpt")) {
    throw Error(ErrorCode::kInvalidConfig, a.run_dir + " already holds a finished run");
  }
  // Only the splits that training touches are generated here.
  DatasetConfig gen = spec.dataset;
  gen.n_test = 0;
  const Dataset ds = BuildDataset(gen, false);
  auto log = [&](const std::string& line) {
    if (!a.quiet) std::cerr << "[" << spec.name << "] " << line << std::endl;
  };
  TrainResult r = TrainRun(spec, a.run_dir, ds, log);
  std::cout << "final checksum " << HexChecksum(r.checksum) << " val_accuracy "
            << r.metrics.back().val_accuracy << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Letter-string analogy experiments"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "Generate dataset splits and manifest");
  gen_cmd->add_option("--config", gen.config, "Dataset config JSON");
  gen_cmd->add_option("--out", gen.out, "Output directory");
  gen_cmd->add_option("--seed", gen.seed, "Dataset seed");
  gen_cmd->add_option("--copy", gen.copy, "Include copy tasks (true/false)");
  gen_cmd->add_option("--alphabets", gen.pool, "Alphabet pool size");
  gen_cmd->add_option("--examples", gen.n_examples, "Examples per task");
  gen_cmd->add_option("--n-train", gen.n_train, "Training split size");
  gen_cmd->add_flag("--no-ood", gen.no_ood, "Skip the out-of-distribution suites");
  gen_cmd->callback([&] { std::exit(RunGen(gen)); });

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train a model into a run directory");
  train_cmd->add_option("--config", tr.config, "Run config JSON {name, dataset, train, model}");
  train_cmd->add_option("--run-dir", tr.run_dir, "Run directory")->required();
  train_cmd->add_option("--data-seed", tr.data_seed, "Dataset seed");
  train_cmd->add_option("--model-seed", tr.model_seed, "Model init / dropout / batching seed");
  train_cmd->add_option("--copy", tr.copy, "Include copy tasks (true/false)");
  train_cmd->add_option("--alphabets", tr.pool, "Alphabet pool size");
  train_cmd->add_option("--examples", tr.n_examples, "Examples per task");
  train_cmd->add_option("--n-train", tr.n_train, "Training split size");
  train_cmd->add_option("--n-val", tr.n_val, "Validation split size");
  train_cmd->add_option("--epochs", tr.epochs, "Training epochs");
  train_cmd->add_option("--batching", tr.batching,
                        "random | by_transformation | by_alphabet | by_transformation_and_alphabet");
  train_cmd->add_flag("--quiet", tr.quiet, "Suppress progress lines");
  train_cmd->callback([&] { std::exit(RunTrain(tr)); });

  RegisterCommands(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
