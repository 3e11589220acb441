// Copyright 2026 The MEST Lab Authors.
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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mest/datasets.hpp"
#include "mest/footprint.hpp"
#include "mest/forgetting.hpp"
#include "mest/mutation.hpp"
#include "mest/network.hpp"
#include "mest/sparsity.hpp"

namespace mest {

struct DatasetConfig {
  std::string kind = "synth";  // synth | mnist | cifar10
  std::string path;            // relative paths resolve against the data dir
  std::size_t train_limit = 0;  // 0 keeps every example
  std::size_t test_limit = 0;
  std::size_t synth_train = 1200;
  std::size_t synth_test = 400;
  std::size_t synth_classes = 4;
  std::size_t synth_side = 12;
  bool augment = false;
};

struct OptimizerConfig {
  double lr0 = 0.1;
  double lr_end = 4e-8;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  double warmup_epochs = 0;
};

struct DeConfig {
  bool enabled = false;
  std::size_t e1 = 0;  // 0 means round(0.4 * epochs)
  int th = 0;
};

struct RunConfig {
  std::string name = "run";
  DatasetConfig dataset;
  std::string model = "tiny-cnn";  // tiny-cnn | resnet-8-slim
  std::size_t width = 1;           // channel multiplier for the zoo models

  Scheme scheme = Scheme::unstructured();
  /// Per-node scheme overrides, keyed by node id.
  std::map<std::size_t, Scheme> layer_schemes;
  double overall_s = 0.9;
  SparsityStrategy strategy = SparsityStrategy::uniform;
  double ratio = 1.12;
  /// Node ids kept dense. Unset means the first conv and the last fc.
  std::vector<std::size_t> dense_layers;
  bool dense_layers_set = false;

  MutationSchedule mutation;
  DeConfig de;
  OptimizerConfig optimizer;
  std::size_t batch_size = 64;
  std::size_t epochs = 20;
  std::uint64_t seed = 1;
  unsigned storage_bits = 64;  // 32 rounds weights and momentum to float
  bool record_forgetting = true;
  bool keep_history = false;

  std::string output_dir;  // empty: no files written
  std::size_t checkpoint_every = 0;  // 0: final checkpoint only

  /// Throws config errors on inconsistent settings.
  void validate() const;
  /// Phase-1 length with the 0.4 * epochs default resolved.
  std::size_t de_e1() const;
};

RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::filesystem::path& path);
std::string run_config_json(const RunConfig& cfg);
/// FNV-1a of the canonical JSON without output settings.
std::uint64_t config_hash(const RunConfig& cfg);

struct DataBundle {
  LabeledDataset train;
  LabeledDataset test;
  Normalization norm;
};

/// Loads or generates the configured data. `data_dir` resolves relative paths.
DataBundle load_data(const DatasetConfig& cfg, const std::filesystem::path& data_dir,
                     std::uint64_t seed);

/// Built-in networks for a C x H x W input.
Network build_model(const std::string& name, const Shape& input,
                    std::size_t classes, std::size_t width = 1);

struct SparsityPlan {
  std::vector<double> layer_s;          // by node; 0 for dense and weightless
  std::vector<std::optional<Scheme>> schemes;  // by node; empty for dense
};

/// Resolves per-layer schemes and sparsity. Pattern falls back to
/// unstructured on layers that are not 3x3 convolutions.
SparsityPlan plan_sparsity(const Network& net, const RunConfig& cfg);

}  // namespace mest
