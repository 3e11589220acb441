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
#include <string>
#include <utility>
#include <vector>

#include "mest/compressed.hpp"
#include "mest/tensor.hpp"

namespace mest {

struct KernelConfig {
  std::size_t tile_rows = 8;
  std::size_t tile_cols = 64;
  std::size_t unroll = 4;  // 1, 2, 4 or 8
  bool reorder = false;

  /// Throws a config error unless 1 <= tiles <= dims and unroll is supported.
  void validate(std::size_t rows, std::size_t cols) const;
  /// This config with tiles shrunk to fit a rows x cols output.
  KernelConfig fitted(std::size_t rows, std::size_t cols) const;
  std::string str() const;

  friend auto operator<=>(const KernelConfig&, const KernelConfig&) = default;
};

/// Lowers an N x C x H x W batch to a (C K K) x (N Ho Wo) matrix.
Tensor im2col(const Tensor& x, std::size_t kernel, std::size_t stride,
              std::size_t pad);
/// Adjoint of im2col: scatters columns back into an N x C x H x W tensor.
Tensor col2im(const Tensor& cols, const Shape& x_shape, std::size_t kernel,
              std::size_t stride, std::size_t pad);
/// (F, N Ho Wo) -> (N, F, Ho, Wo) and back.
Tensor rows_to_nchw(const Tensor& z, std::size_t n, std::size_t ho, std::size_t wo);
Tensor nchw_to_rows(const Tensor& z);

/// Z = W A with W given as an F x cols dense matrix.
Tensor dense_gemm(const Tensor& w, const Tensor& a);
/// dA = W^T delta and G = delta A^T, dense.
std::pair<Tensor, Tensor> dense_gemm_backward(const Tensor& w, const Tensor& delta,
                                              const Tensor& a);

/// Z = W A for a compressed W. Each output accumulates in ascending column
/// order, so results do not depend on the tiling, unroll or row order.
Tensor spmm(const CompressedLayer& cl, const Tensor& a, const KernelConfig& cfg);

struct SparseGrad {
  Tensor delta_prev;  // cols x P
  CompressedLayer grad;  // shares the index arrays of the weights
};

SparseGrad spmm_backward(const CompressedLayer& cl, const Tensor& delta,
                         const Tensor& a, const KernelConfig& cfg);

/// Stable sort of rows (block rows for block layers) by descending nnz.
/// perm[i] is the original row stored at position i.
struct Reordered {
  std::vector<std::size_t> perm;
  CompressedLayer layer;
};
Reordered matrix_reorder(const CompressedLayer& cl);
/// Restores the original row order of an output computed on a reordered layer.
Tensor unpermute_rows(const Tensor& z, const std::vector<std::size_t>& perm,
                      std::size_t rows_per_unit = 1);

struct TuneTrial {
  KernelConfig config;
  double median_us = 0;
};

struct TuneResult {
  KernelConfig best;
  std::vector<TuneTrial> trials;  // in the order they ran
};

/// Candidate grid: the default fitted config first, then lexicographic order.
std::vector<KernelConfig> tuning_grid(std::size_t rows, std::size_t cols);

/// Times up to `budget` grid points (median of 5 forward runs) and returns the
/// fastest; ties go to the lexicographically smaller config.
TuneResult autotune(const CompressedLayer& cl, const Tensor& a, std::size_t budget);

struct BenchLayer {
  std::size_t channels = 64;
  std::size_t filters = 64;
  std::size_t kernel = 3;
  std::size_t size = 16;  // square feature map
  std::size_t pad = 1;
  std::size_t batch = 1;
};

struct BenchOptions {
  std::vector<Scheme> schemes;
  std::vector<double> sparsities;
  std::size_t repeats = 20;
  std::size_t warmup = 10;
  std::size_t tune_budget = 0;  // 0: default config
  std::uint64_t seed = 1;
};

struct AccelPoint {
  std::string scheme;
  double sparsity = 0;
  double fwd_us = 0;
  double bwd_us = 0;
  double accel = 0;  // dense (fwd+bwd) time over this point's time
  std::string config;
};

struct AccelReport {
  BenchLayer layer;
  std::string machine;
  std::size_t threads = 1;
  double dense_fwd_us = 0;
  double dense_bwd_us = 0;
  std::vector<AccelPoint> points;  // includes the dense control point
  std::vector<std::string> skipped;  // infeasible (scheme, sparsity) pairs
};

BenchLayer fig2_layer();
std::vector<double> fig2_sparsities();
std::vector<Scheme> fig2_schemes();

AccelReport bench(const BenchLayer& layer, const BenchOptions& opts);

/// CSV: scheme,sparsity,fwd_us,bwd_us,accel
std::string accel_csv(const AccelReport& r);
/// One block per scheme, columns: sparsity accel, blank-line separated.
std::string accel_gnuplot(const AccelReport& r);

}  // namespace mest
