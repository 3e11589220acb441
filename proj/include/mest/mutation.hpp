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
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mest/network.hpp"
#include "mest/sparsity.hpp"
#include "mest/tensor.hpp"

namespace mest {

/// Scr(w) = |w| + |lambda * g|. An empty `grad` counts as zero.
Tensor importance(const Tensor& weight, const Tensor& grad, double lambda);

/// Drops the lowest-scoring active units until the mask sits at sparsity `t`.
/// Unit scores are sums over the unit's active positions; ties go to the
/// lower unit index. Pattern masks drop the same number of kernels per filter.
Mask arg_remove_to(const Mask& mask, double t, std::span<const double> scores);

/// Activates uniformly random empty units until the mask sits at sparsity `t`.
/// Pattern growth picks random empty kernels per filter with a random style.
Mask arg_grow_to(const Mask& mask, double t, std::uint64_t seed);

/// Zeroes every entry of `values` outside `mask`.
void apply_mask(Tensor& values, const Mask& mask);

enum class MutationMode { none, em, ems, vanilla };

std::string to_string(MutationMode mode);
MutationMode parse_mutation_mode(std::string_view text);

struct PMilestone {
  std::size_t epoch = 0;
  double p = 0.05;
};

struct MutationSchedule {
  MutationMode mode = MutationMode::em;
  std::vector<PMilestone> milestones = {{0, 0.05}, {100, 0.025}};
  std::size_t delta = 5;    // epochs between mutations
  std::size_t stop = 130;   // no mutation from this epoch on
  std::size_t end = 160;    // total epochs
  double lambda = 0.01;

  /// Throws config errors on malformed schedules.
  void validate() const;
  /// Mutation rate in effect at `epoch`. Vanilla keeps the first value.
  double p_at(std::size_t epoch) const;
  /// Sparsity offset (relative to the layer target) that holds while
  /// training `epoch`: -p inside EM&S windows, 0 otherwise.
  double train_offset(std::size_t epoch) const;
  /// Largest p ever used.
  double p_max() const;
};

enum class StepKind { remove_to, grow_to };

/// One primitive applied to every sparse layer: target = s_l + offset.
struct MutationStep {
  StepKind kind = StepKind::remove_to;
  double offset = 0.0;
};

/// Steps to run at the boundary before training `epoch`.
std::vector<MutationStep> plan_epoch(const MutationSchedule& schedule,
                                     std::size_t epoch);

struct MutationEvent {
  std::size_t epoch = 0;
  std::size_t node = 0;
  StepKind kind = StepKind::remove_to;
  double target = 0.0;
  std::size_t nnz_before = 0;
  std::size_t nnz_after = 0;
};

using MutationObserver = std::function<void(const MutationEvent&)>;

/// Checks every sparse layer can reach s_l - p and s_l + p under its scheme.
void validate_schedule_for(const Network& net, std::span<const double> layer_s,
                           const MutationSchedule& schedule);

/// Runs the planned steps for `epoch` on every masked node. `last_grads` holds
/// the masked gradient of the previous epoch's final minibatch, by node.
/// `layer_s` is the target sparsity by node. Removed weights are zeroed;
/// grown weights start at zero.
std::vector<MutationEvent> em_epoch_hook(Network& net,
                                         std::span<const Tensor> last_grads,
                                         std::span<const double> layer_s,
                                         const MutationSchedule& schedule,
                                         std::size_t epoch, std::uint64_t seed,
                                         const MutationObserver& observer = {});

}  // namespace mest
