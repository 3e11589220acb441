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

#include "mest/footprint.hpp"

#include <algorithm>
#include <cmath>

namespace mest {

std::string to_string(FootprintMode mode) {
  switch (mode) {
    case FootprintMode::dense: return "dense";
    case FootprintMode::structured: return "structured";
    case FootprintMode::unstructured: return "unstructured";
    case FootprintMode::pattern: return "pattern";
    case FootprintMode::block: return "block";
    case FootprintMode::dense_pruning_at_init: return "dense-pruning-at-init";
    case FootprintMode::dense_gradient_sparse_weight:
      return "dense-gradient-sparse-weight";
  }
  return "?";
}

FootprintMode parse_footprint_mode(std::string_view text) {
  for (auto m : kAllFootprintModes)
    if (to_string(m) == text) return m;
  if (text == "channel") return FootprintMode::structured;
  fail(ErrorKind::config, "unknown footprint mode '" + std::string(text) + "'");
}

FootprintMode footprint_mode_for(const Scheme& scheme) {
  switch (scheme.kind) {
    case SchemeKind::unstructured: return FootprintMode::unstructured;
    case SchemeKind::channel: return FootprintMode::structured;
    case SchemeKind::block: return FootprintMode::block;
    case SchemeKind::pattern: return FootprintMode::pattern;
  }
  return FootprintMode::dense;
}

namespace {

// (1-s) N, snapped to the nearest integer when s came from an integral
// nonzero count so the bit totals are exact.
double kept_weights(double s, std::size_t n) {
  const double kept = (1.0 - s) * static_cast<double>(n);
  const double r = std::round(kept);
  return std::abs(kept - r) <= 1e-7 * std::max(1.0, kept) ? r : kept;
}

}  // namespace

FootprintReport footprint_bits(std::span<const LayerDims> layers,
                               FootprintMode mode,
                               std::span<const double> sparsity,
                               const FootprintParams& params) {
  require(sparsity.size() == layers.size(), ErrorKind::dimension,
          "one sparsity per layer required");
  FootprintReport rep;
  rep.mode = mode;
  rep.params = params;
  const double bw = params.weight_bits;
  const double bi = params.index_bits;
  const double block = static_cast<double>(params.block_m * params.block_n);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const double s = sparsity[l];
    require(s >= 0.0 && s < 1.0, ErrorKind::feasibility,
            "sparsity outside [0,1)");
    const double n = static_cast<double>(layers[l].weights);
    const double f = static_cast<double>(layers[l].filters);
    const double kept = kept_weights(s, layers[l].weights);
    const double row_terms = params.exact ? 1.0 : 0.0;
    LayerFootprint lf;
    switch (mode) {
      case FootprintMode::dense:
      case FootprintMode::dense_pruning_at_init:
        lf.weight_bits = n * bw;
        lf.gradient_bits = n * bw;
        break;
      case FootprintMode::structured:
        lf.weight_bits = kept * bw;
        lf.gradient_bits = kept * bw;
        break;
      case FootprintMode::unstructured:
        lf.weight_bits = kept * bw;
        lf.gradient_bits = kept * bw;
        lf.index_bits = kept * bi + row_terms * (f + 1.0) * bi;
        break;
      case FootprintMode::pattern:
        lf.weight_bits = kept * bw;
        lf.gradient_bits = kept * bw;
        lf.index_bits = kept / 4.0 * bi + row_terms * (f + 1.0) * bi;
        break;
      case FootprintMode::block:
        lf.weight_bits = kept * bw;
        lf.gradient_bits = kept * bw;
        lf.index_bits =
            kept / block * bi +
            row_terms * (f / static_cast<double>(params.block_m) + 1.0) * bi;
        break;
      case FootprintMode::dense_gradient_sparse_weight:
        lf.weight_bits = kept * bw;
        lf.gradient_bits = n * bw;
        lf.index_bits = kept * bi;
        break;
    }
    rep.layers.push_back(lf);
    rep.weight_bits += lf.weight_bits;
    rep.gradient_bits += lf.gradient_bits;
    rep.index_bits += lf.index_bits;
    rep.momentum_bits += (mode == FootprintMode::dense ||
                          mode == FootprintMode::dense_pruning_at_init)
                             ? n * bw
                             : kept * bw;
  }
  rep.total_bits = rep.weight_bits + rep.gradient_bits + rep.index_bits;
  return rep;
}

FootprintReport footprint_bits(std::span<const LayerDims> layers,
                               FootprintMode mode, double s,
                               const FootprintParams& params) {
  const std::vector<double> per_layer(layers.size(), s);
  return footprint_bits(layers, mode, per_layer, params);
}

SparsityStrategy parse_strategy(std::string_view text) {
  if (text == "uniform") return SparsityStrategy::uniform;
  if (text == "fixed-ratio" || text == "fixed_ratio")
    return SparsityStrategy::fixed_ratio;
  if (text == "proportional") return SparsityStrategy::proportional;
  fail(ErrorKind::config, "unknown sparsity strategy '" + std::string(text) + "'");
}

std::string to_string(SparsityStrategy strategy) {
  switch (strategy) {
    case SparsityStrategy::uniform: return "uniform";
    case SparsityStrategy::fixed_ratio: return "fixed-ratio";
    case SparsityStrategy::proportional: return "proportional";
  }
  return "?";
}

std::vector<double> assign_layer_sparsity(std::span<const LayerBudget> layers,
                                          SparsityStrategy strategy,
                                          double overall_s, double ratio) {
  require(overall_s >= 0.0 && overall_s < 1.0, ErrorKind::feasibility,
          "overall sparsity outside [0,1)");
  std::vector<double> out(layers.size(), 0.0);
  double total = 0.0;
  for (const auto& l : layers)
    if (!l.dense) total += static_cast<double>(l.weights);
  if (total == 0.0) {
    require(overall_s == 0.0, ErrorKind::feasibility,
            "no sparse layers to carry the requested sparsity");
    return out;
  }

  auto check_bounds = [&] {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      if (layers[i].dense) continue;
      require(out[i] >= layers[i].min_sparsity - 1e-12 &&
                  out[i] <= layers[i].max_sparsity + 1e-12,
              ErrorKind::feasibility,
              "layer " + std::to_string(i) + " would need sparsity " +
                  std::to_string(out[i]) + " outside its scheme range [" +
                  std::to_string(layers[i].min_sparsity) + ", " +
                  std::to_string(layers[i].max_sparsity) + "]");
    }
  };

  switch (strategy) {
    case SparsityStrategy::uniform:
      for (std::size_t i = 0; i < layers.size(); ++i)
        if (!layers[i].dense) out[i] = overall_s;
      check_bounds();
      return out;
    case SparsityStrategy::fixed_ratio: {
      require(ratio > 0.0, ErrorKind::config, "ratio must be positive");
      double big = 0.0, rest = 0.0;
      for (const auto& l : layers) {
        if (l.dense) continue;
        (l.kernel == 3 ? big : rest) += static_cast<double>(l.weights);
      }
      const double base = overall_s * total / (ratio * big + rest);
      for (std::size_t i = 0; i < layers.size(); ++i)
        if (!layers[i].dense)
          out[i] = layers[i].kernel == 3 ? ratio * base : base;
      check_bounds();
      return out;
    }
    case SparsityStrategy::proportional: {
      // Water-filling on density d_l = c / sqrt(N_l) with per-layer clamps.
      const double budget = (1.0 - overall_s) * total;
      std::vector<int> state(layers.size(), 0);  // 0 free, 1 clamped
      std::vector<double> density(layers.size(), 1.0);
      for (int iter = 0; iter < 64; ++iter) {
        double fixed = 0.0, free_scale = 0.0;
        for (std::size_t i = 0; i < layers.size(); ++i) {
          if (layers[i].dense) continue;
          const double n = static_cast<double>(layers[i].weights);
          if (state[i])
            fixed += density[i] * n;
          else
            free_scale += std::sqrt(n);
        }
        if (free_scale == 0.0) break;
        const double c = (budget - fixed) / free_scale;
        bool changed = false;
        for (std::size_t i = 0; i < layers.size(); ++i) {
          if (layers[i].dense || state[i]) continue;
          const double n = static_cast<double>(layers[i].weights);
          const double lo = 1.0 - layers[i].max_sparsity;
          const double hi = 1.0 - layers[i].min_sparsity;
          double d = c / std::sqrt(n);
          if (d < lo || d > hi) {
            d = std::clamp(d, lo, hi);
            state[i] = 1;
            changed = true;
          }
          density[i] = d;
        }
        if (!changed) break;
      }
      double kept = 0.0;
      for (std::size_t i = 0; i < layers.size(); ++i) {
        if (layers[i].dense) continue;
        out[i] = 1.0 - density[i];
        kept += density[i] * static_cast<double>(layers[i].weights);
      }
      require(std::abs(kept - budget) <= 1e-9 * total, ErrorKind::feasibility,
              "proportional assignment cannot reach the overall sparsity");
      check_bounds();
      return out;
    }
  }
  return out;
}

}  // namespace mest
