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
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mest/config.hpp"
#include "mest/forgetting.hpp"
#include "mest/mutation.hpp"
#include "mest/network.hpp"

namespace mest {

struct MetricsRow {
  std::size_t epoch = 0;
  double lr = 0;  // at the epoch's last step
  double train_loss = 0;
  double train_acc = 0;
  double test_acc = 0;
  std::size_t nnz_total = 0;
  double sparsity_actual = 0;
  std::size_t dataset_size = 0;
  double p_current = 0;
  double footprint_bits = 0;

  friend bool operator==(const MetricsRow&, const MetricsRow&) = default;
};

struct EpochTiming {
  std::size_t epoch = 0;
  double train_ms = 0;
  double eval_ms = 0;
  std::size_t dataset_size = 0;
};

/// Linear warm-up then cosine from lr0 to lr_end, evaluated at step `batch`
/// of `batches` in `epoch`. The last step of the last epoch gets lr_end.
double lr_at(const OptimizerConfig& opt, std::size_t epochs, std::size_t epoch,
             std::size_t batch, std::size_t batches);

/// Momentum SGD with L2 decay. Entries outside `mask` are left untouched.
void sgd_step(Tensor& weight, Tensor& momentum, const Tensor& grad,
              const Mask* mask, double lr, const OptimizerConfig& opt);

struct TrainingState {
  std::size_t epoch = 0;  // next epoch to run
  std::uint64_t step = 0;
  Network net;
  std::vector<Tensor> momentum_w;  // by node
  std::vector<Tensor> momentum_b;
  std::vector<Tensor> last_grads;  // final minibatch of the previous epoch
  ForgettingLog flog;
  DatasetView view;
  bool compressed = false;
  std::vector<MetricsRow> metrics;
};

struct TrainerHooks {
  MutationObserver on_mutation;
  std::function<void(const TrainingState&, const MetricsRow&)> on_epoch_end;
};

class Trainer {
 public:
  Trainer(RunConfig cfg, DataBundle data);

  /// Replaces the state with a checkpoint written by the same config.
  void resume_from(std::span<const std::uint8_t> checkpoint);

  bool done() const { return state_.epoch >= cfg_.epochs; }
  MetricsRow run_epoch();
  /// Runs the remaining epochs and writes artifacts when output_dir is set.
  void run();

  std::vector<std::uint8_t> checkpoint() const;

  const RunConfig& config() const { return cfg_; }
  const TrainingState& state() const { return state_; }
  const SparsityPlan& plan() const { return plan_; }
  const DataBundle& data() const { return data_; }
  const std::vector<EpochTiming>& timings() const { return timings_; }
  TrainerHooks& hooks() { return hooks_; }

  /// Test-set accuracy of the current weights.
  double evaluate() const;
  /// Exact footprint of the current masks (weights, gradients, indices).
  double footprint() const;
  /// Bits of compressed weights, gradients and momentum held for the current
  /// masks at 32-bit values and 8-bit indices.
  double state_bits() const;

 private:
  void write_epoch_artifacts(const MetricsRow& row) const;

  RunConfig cfg_;
  DataBundle data_;
  SparsityPlan plan_;
  TrainingState state_;
  TrainerHooks hooks_;
  std::vector<EpochTiming> timings_;
};

std::string metrics_csv(const std::vector<MetricsRow>& rows);
std::string timings_csv(const std::vector<EpochTiming>& rows);

struct CheckpointSummary {
  std::uint16_t version = 0;
  std::uint64_t config_hash = 0;
  std::size_t epoch = 0;
  std::uint64_t step = 0;
  unsigned storage_bits = 0;
  struct Layer {
    std::size_t node = 0;
    std::string scheme;  // "dense" for unmasked layers
    std::size_t weights = 0;
    std::size_t nnz = 0;
  };
  std::vector<Layer> layers;
  std::size_t dataset_size = 0;
  std::size_t metrics_rows = 0;
};

CheckpointSummary inspect_checkpoint(std::span<const std::uint8_t> bytes);

/// Everything in a checkpoint except the tensors.
struct CheckpointLogs {
  CheckpointSummary summary;
  ForgettingLog flog;
  DatasetView view;
  std::vector<MetricsRow> metrics;
};
CheckpointLogs read_checkpoint_logs(std::span<const std::uint8_t> bytes);
std::string checkpoint_summary_json(const CheckpointSummary& s);

struct LayerFlops {
  std::size_t node = 0;
  std::string kind;
  std::uint64_t macs = 0;  // dense multiply-accumulates per example
  double sparsity = 0;     // final target
};

struct FlopsReport {
  std::vector<LayerFlops> layers;
  double inference_dense = 0;   // FLOPs per example
  double inference_sparse = 0;
  double training_dense = 0;    // FLOPs over the whole schedule
  double training_sparse = 0;
};

/// 1 MAC = 2 FLOPs, training step = 3x forward. `compressed_size` is the
/// phase-2 dataset size when two-phase training is on.
FlopsReport flops_report(const RunConfig& cfg, const Network& net, const SparsityPlan& plan,
                         std::size_t train_size,
                         std::optional<std::size_t> compressed_size = std::nullopt);
std::string flops_csv(const FlopsReport& r);

}  // namespace mest
