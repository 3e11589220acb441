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
#include <string>
#include <vector>

#include "mest/sparsity.hpp"
#include "mest/tensor.hpp"

namespace mest {

enum class LayerKind { conv2d, fc, relu, maxpool, avgpool, add, softmax_xent };
enum class Activation { identity, relu };

std::string to_string(LayerKind kind);
LayerKind parse_layer_kind(const std::string& text);

/// Node of a feed-forward graph. Activations are batched NCHW tensors
/// (fully connected layers flatten everything after the batch axis).
struct LayerSpec {
  LayerKind kind = LayerKind::fc;
  std::string name;

  // conv2d: F_l filters, Ch_l channels, K_l kernel.
  std::size_t filters = 0;
  std::size_t channels = 0;
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::size_t padding = 0;

  // fc
  std::size_t in_features = 0;
  std::size_t out_features = 0;

  // pooling window (kernel == stride); 0 means global.
  std::size_t pool = 2;

  bool bias = true;
  Activation activation = Activation::identity;

  /// Producer node ids; -1 is the network input. Empty means the previous
  /// node (or the input for node 0).
  std::vector<int> inputs;

  bool has_weights() const {
    return kind == LayerKind::conv2d || kind == LayerKind::fc;
  }
  std::size_t weight_count() const;
  WeightLayout weight_layout() const;
  Shape weight_shape() const;

  static LayerSpec conv(std::size_t channels, std::size_t filters,
                        std::size_t kernel, std::size_t stride = 1,
                        std::size_t padding = 0,
                        Activation act = Activation::identity);
  static LayerSpec dense(std::size_t in, std::size_t out,
                         Activation act = Activation::identity);
};

/// Output shape for a batch input of shape `in` (rank 4 for spatial layers).
Shape output_shape(const LayerSpec& layer, const Shape& in);

struct LayerOutput {
  Tensor z;  // pre-activation
  Tensor a;  // activation
};

/// z = W * a_prev + b, a = act(z). For weightless layers W and b are ignored
/// and z == a.
LayerOutput forward(const LayerSpec& layer, const Tensor& weights,
                    const Tensor& bias, const Tensor& a_prev);

double activation_derivative(Activation act, double z);

/// Gradient w.r.t. the layer input given the error at its pre-activation:
/// a full-padded transposed convolution (or W^T delta for fc). `a_prev` is
/// only consulted by max pooling.
Tensor input_gradient(const LayerSpec& layer, const Tensor& weights,
                      const Tensor& delta, const Tensor& a_prev);

/// Error at the lower layer: (delta_next * rot180(W_next)) ⊙ act'(z).
/// `z` is the lower layer's cached pre-activation; an empty z is a state
/// error.
Tensor backward_error(const LayerSpec& next, const Tensor& next_weights,
                      const Tensor& delta_next, const Tensor& z,
                      Activation act);

/// G = a_prev * delta restricted to the mask support; positions outside the
/// mask are exactly zero and never computed. A null mask means dense.
Tensor weight_gradient(const LayerSpec& layer, const Tensor& a_prev,
                       const Tensor& delta, const Mask* mask);

Tensor bias_gradient(const LayerSpec& layer, const Tensor& delta);

}  // namespace mest
