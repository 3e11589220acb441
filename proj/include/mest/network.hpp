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

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "mest/nn.hpp"

namespace mest {

struct LayerParams {
  Tensor weight;
  Tensor bias;
  std::optional<Mask> mask;  // empty: dense layer
};

struct Gradients {
  std::vector<Tensor> weight;  // indexed by node; empty for weightless nodes
  std::vector<Tensor> bias;
};

struct ForwardCache {
  std::vector<Tensor> z;
  std::vector<Tensor> a;
};

struct LossResult {
  double loss = 0.0;                  // mean cross-entropy over the batch
  std::vector<std::uint8_t> correct;  // argmax(logits) == label, per example
};

/// Feed-forward graph ending in a softmax cross-entropy node.
class Network {
 public:
  Network() = default;
  /// `input_shape` is (C, H, W) of one example.
  Network(std::vector<LayerSpec> layers, Shape input_shape);

  const std::vector<LayerSpec>& layers() const noexcept { return layers_; }
  const Shape& input_shape() const noexcept { return input_shape_; }
  std::vector<LayerParams>& params() noexcept { return params_; }
  const std::vector<LayerParams>& params() const noexcept { return params_; }
  std::size_t num_classes() const noexcept { return num_classes_; }

  /// Node ids of conv2d / fc layers in graph order.
  const std::vector<std::size_t>& weighted() const noexcept { return weighted_; }
  /// Node ids feeding each node (resolved, -1 for the network input).
  const std::vector<int>& inputs_of(std::size_t node) const {
    return inputs_[node];
  }

  /// He-normal weights, zero biases, then masks applied.
  void init_weights(std::uint64_t seed);
  void set_mask(std::size_t node, Mask mask);
  void clear_mask(std::size_t node);
  /// Zeroes every weight outside its mask.
  void apply_masks();

  std::size_t total_weights() const;
  std::size_t total_nnz() const;

  ForwardCache forward(const Tensor& x) const;
  Tensor logits(const Tensor& x) const;
  double loss(const Tensor& x, std::span<const int> labels) const;
  /// Forward + backward. Weight gradients are masked.
  LossResult loss_and_gradients(const Tensor& x, std::span<const int> labels,
                                Gradients& grads) const;

 private:
  std::vector<LayerSpec> layers_;
  Shape input_shape_;
  std::vector<std::vector<int>> inputs_;
  std::vector<LayerParams> params_;
  std::vector<std::size_t> weighted_;
  std::size_t num_classes_ = 0;
};

/// Softmax cross-entropy (mean over batch) and its gradient w.r.t. logits.
double softmax_xent(const Tensor& logits, std::span<const int> labels,
                    Tensor* grad, std::vector<std::uint8_t>* correct);

/// Central finite differences of the loss over every unmasked weight and
/// every bias, compared against `analytic`. Returns the max relative error
/// |a - n| / max(|a|, |n|, 1e-6).
double fd_check_against(Network& net, const Tensor& x,
                        std::span<const int> labels,
                        const Gradients& analytic, double eps);
double fd_check(Network& net, const Tensor& x, std::span<const int> labels,
                double eps);

}  // namespace mest
