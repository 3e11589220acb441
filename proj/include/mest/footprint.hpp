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
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mest/sparsity.hpp"

namespace mest {

/// Accounting modes: one per scheme row of the footprint table plus the two
/// comparison modes for pruning-at-initialization and dense-gradient methods.
enum class FootprintMode {
  dense,
  structured,
  unstructured,
  pattern,
  block,
  dense_pruning_at_init,
  dense_gradient_sparse_weight,
};

inline constexpr FootprintMode kAllFootprintModes[] = {
    FootprintMode::dense,
    FootprintMode::structured,
    FootprintMode::unstructured,
    FootprintMode::pattern,
    FootprintMode::block,
    FootprintMode::dense_pruning_at_init,
    FootprintMode::dense_gradient_sparse_weight,
};

std::string to_string(FootprintMode mode);
FootprintMode parse_footprint_mode(std::string_view text);
FootprintMode footprint_mode_for(const Scheme& scheme);

/// One layer as the formulas see it: N^l weights and F_l filters.
struct LayerDims {
  std::size_t weights = 0;
  std::size_t filters = 0;
};

struct FootprintParams {
  double weight_bits = 32;  // b_w
  double index_bits = 8;    // b_index
  std::size_t block_m = 4;
  std::size_t block_n = 1;
  bool exact = true;  // false drops the per-layer row_index term
};

struct LayerFootprint {
  double weight_bits = 0;
  double gradient_bits = 0;
  double index_bits = 0;
  double total() const { return weight_bits + gradient_bits + index_bits; }
};

struct FootprintReport {
  FootprintMode mode = FootprintMode::dense;
  FootprintParams params;
  std::vector<LayerFootprint> layers;
  double weight_bits = 0;
  double gradient_bits = 0;
  double index_bits = 0;
  double total_bits = 0;
  /// Optional momentum row, (1-s) N b_w; not part of total_bits.
  double momentum_bits = 0;
};

/// Evaluates the footprint formulas with one sparsity per layer.
FootprintReport footprint_bits(std::span<const LayerDims> layers,
                               FootprintMode mode,
                               std::span<const double> sparsity,
                               const FootprintParams& params = {});
/// Same sparsity s for every layer.
FootprintReport footprint_bits(std::span<const LayerDims> layers,
                               FootprintMode mode, double s,
                               const FootprintParams& params = {});

// ---------------------------------------------------------------------------
// Layer-wise sparsity assignment

enum class SparsityStrategy { uniform, fixed_ratio, proportional };

SparsityStrategy parse_strategy(std::string_view text);
std::string to_string(SparsityStrategy strategy);

struct LayerBudget {
  std::size_t weights = 0;  // N^l
  std::size_t kernel = 1;   // K_l (3 for 3x3 conv)
  bool dense = false;       // kept dense, excluded from the budget
  double min_sparsity = 0.0;
  double max_sparsity = 0.999;
};

/// Per-layer sparsity such that the weight-weighted mean over the non-dense
/// layers equals overall_s. fixed_ratio gives 3x3 layers `ratio` times the
/// sparsity of the others; proportional keeps density proportional to
/// 1/sqrt(N^l).
std::vector<double> assign_layer_sparsity(std::span<const LayerBudget> layers,
                                          SparsityStrategy strategy,
                                          double overall_s,
                                          double ratio = 1.12);

}  // namespace mest
