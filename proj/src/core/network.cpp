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

#include "mest/network.hpp"

#include <algorithm>
#include <cmath>

#include "mest/rng.hpp"

namespace mest {

Network::Network(std::vector<LayerSpec> layers, Shape input_shape)
    : layers_(std::move(layers)), input_shape_(std::move(input_shape)) {
  require(!layers_.empty() && layers_.back().kind == LayerKind::softmax_xent,
          ErrorKind::config, "network must end with a softmax-xent node");
  require(input_shape_.size() == 3, ErrorKind::dimension,
          "input shape must be (C,H,W)");
  inputs_.resize(layers_.size());
  params_.resize(layers_.size());
  // Shape inference doubles as graph validation.
  std::vector<Shape> shapes(layers_.size());
  const Shape in{1, input_shape_[0], input_shape_[1], input_shape_[2]};
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    auto& ins = inputs_[i];
    ins = layers_[i].inputs;
    if (ins.empty()) ins.push_back(static_cast<int>(i) - 1);
    for (int p : ins)
      require(p >= -1 && p < static_cast<int>(i), ErrorKind::config,
              "node " + std::to_string(i) + " reads a later node");
    const Shape& s0 = ins[0] < 0 ? in : shapes[static_cast<std::size_t>(ins[0])];
    if (layers_[i].kind == LayerKind::add) {
      require(ins.size() == 2, ErrorKind::config, "add takes two inputs");
      const Shape& s1 = ins[1] < 0 ? in : shapes[static_cast<std::size_t>(ins[1])];
      require(s0 == s1, ErrorKind::dimension,
              "add inputs differ: " + shape_string(s0) + " vs " + shape_string(s1));
    } else {
      require(ins.size() == 1, ErrorKind::config,
              to_string(layers_[i].kind) + " takes one input");
    }
    shapes[i] = output_shape(layers_[i], s0);
    if (layers_[i].has_weights()) {
      weighted_.push_back(i);
      params_[i].weight = Tensor(layers_[i].weight_shape());
      const std::size_t nb = layers_[i].kind == LayerKind::conv2d
                                 ? layers_[i].filters
                                 : layers_[i].out_features;
      params_[i].bias = Tensor({layers_[i].bias ? nb : 0});
    }
  }
  require(inputs_.back()[0] >= 0, ErrorKind::config,
          "softmax-xent cannot read the raw input");
  const Shape& logit_shape = shapes[static_cast<std::size_t>(inputs_.back()[0])];
  require(logit_shape.size() == 2, ErrorKind::config,
          "softmax-xent must read a (B, classes) tensor");
  num_classes_ = logit_shape[1];
}

void Network::init_weights(std::uint64_t seed) {
  for (std::size_t id : weighted_) {
    const auto& L = layers_[id];
    Rng rng(derive_seed(seed, {0x1417, id}));
    const std::size_t fan_in =
        L.kind == LayerKind::conv2d ? L.channels * L.kernel * L.kernel : L.in_features;
    const double std_dev = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (auto& w : params_[id].weight.values()) w = rng.normal() * std_dev;
    params_[id].bias.fill(0.0);
  }
  apply_masks();
}

void Network::set_mask(std::size_t node, Mask mask) {
  require(layers_.at(node).has_weights(), ErrorKind::config,
          "mask on a weightless node");
  require(mask.layout() == layers_[node].weight_layout(), ErrorKind::dimension,
          "mask layout does not match node " + std::to_string(node));
  params_[node].mask = std::move(mask);
  apply_masks();
}

void Network::clear_mask(std::size_t node) { params_.at(node).mask.reset(); }

void Network::apply_masks() {
  for (std::size_t id : weighted_) {
    auto& p = params_[id];
    if (!p.mask) continue;
    for (std::size_t i = 0; i < p.weight.size(); ++i)
      if (!p.mask->test(i)) p.weight[i] = 0.0;
  }
}

std::size_t Network::total_weights() const {
  std::size_t n = 0;
  for (std::size_t id : weighted_) n += layers_[id].weight_count();
  return n;
}

std::size_t Network::total_nnz() const {
  std::size_t n = 0;
  for (std::size_t id : weighted_)
    n += params_[id].mask ? params_[id].mask->nnz() : layers_[id].weight_count();
  return n;
}

ForwardCache Network::forward(const Tensor& x) const {
  require(x.rank() == 4 && x.dim(1) == input_shape_[0] &&
              x.dim(2) == input_shape_[1] && x.dim(3) == input_shape_[2],
          ErrorKind::dimension,
          "network input must be (B," + std::to_string(input_shape_[0]) + "," +
              std::to_string(input_shape_[1]) + "," +
              std::to_string(input_shape_[2]) + "), got " + shape_string(x.shape()));
  ForwardCache cache;
  const std::size_t n = layers_.size() - 1;  // loss node excluded
  cache.z.resize(n);
  cache.a.resize(n);
  auto input = [&](int id) -> const Tensor& {
    return id < 0 ? x : cache.a[static_cast<std::size_t>(id)];
  };
  for (std::size_t i = 0; i < n; ++i) {
    const auto& L = layers_[i];
    if (L.kind == LayerKind::add) {
      Tensor sum = input(inputs_[i][0]);
      const Tensor& rhs = input(inputs_[i][1]);
      for (std::size_t k = 0; k < sum.size(); ++k) sum[k] += rhs[k];
      cache.z[i] = sum;
      cache.a[i] = std::move(sum);
      continue;
    }
    auto out = mest::forward(L, params_[i].weight, params_[i].bias, input(inputs_[i][0]));
    cache.z[i] = std::move(out.z);
    cache.a[i] = std::move(out.a);
  }
  return cache;
}

Tensor Network::logits(const Tensor& x) const {
  auto cache = forward(x);
  return std::move(cache.a[static_cast<std::size_t>(inputs_.back()[0])]);
}

double softmax_xent(const Tensor& logits, std::span<const int> labels,
                    Tensor* grad, std::vector<std::uint8_t>* correct) {
  require(logits.rank() == 2 && logits.dim(0) == labels.size(),
          ErrorKind::dimension, "logits/labels batch mismatch");
  const std::size_t B = logits.dim(0), K = logits.dim(1);
  if (grad) *grad = Tensor({B, K});
  if (correct) correct->assign(B, 0);
  double total = 0.0;
  for (std::size_t n = 0; n < B; ++n) {
    const double* z = logits.data() + n * K;
    const auto label = static_cast<std::size_t>(labels[n]);
    require(labels[n] >= 0 && label < K, ErrorKind::dimension, "label out of range");
    std::size_t arg = 0;
    for (std::size_t k = 1; k < K; ++k)
      if (z[k] > z[arg]) arg = k;
    const double mx = z[arg];
    double sum = 0.0;
    for (std::size_t k = 0; k < K; ++k) sum += std::exp(z[k] - mx);
    const double lse = mx + std::log(sum);
    total += lse - z[label];
    if (correct) (*correct)[n] = arg == label ? 1 : 0;
    if (grad) {
      for (std::size_t k = 0; k < K; ++k) {
        const double p = std::exp(z[k] - lse);
        (*grad)[n * K + k] = (p - (k == label ? 1.0 : 0.0)) / static_cast<double>(B);
      }
    }
  }
  const double loss = total / static_cast<double>(B);
  require(std::isfinite(loss), ErrorKind::numeric, "non-finite loss");
  return loss;
}

double Network::loss(const Tensor& x, std::span<const int> labels) const {
  return softmax_xent(logits(x), labels, nullptr, nullptr);
}

LossResult Network::loss_and_gradients(const Tensor& x,
                                       std::span<const int> labels,
                                       Gradients& grads) const {
  ForwardCache cache = forward(x);
  const std::size_t n = layers_.size() - 1;
  const auto logit_id = static_cast<std::size_t>(inputs_.back()[0]);
  LossResult result;
  Tensor dlogits;
  result.loss = softmax_xent(cache.a[logit_id], labels, &dlogits, &result.correct);

  grads.weight.assign(layers_.size(), Tensor());
  grads.bias.assign(layers_.size(), Tensor());
  // Gradient w.r.t. each node's output activation.
  std::vector<Tensor> dout(n);
  dout[logit_id] = std::move(dlogits);
  auto accumulate = [&](int id, Tensor g) {
    if (id < 0) return;
    Tensor& dst = dout[static_cast<std::size_t>(id)];
    if (dst.empty()) {
      dst = std::move(g);
    } else {
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += g[k];
    }
  };
  auto input = [&](int id) -> const Tensor& {
    return id < 0 ? x : cache.a[static_cast<std::size_t>(id)];
  };
  for (std::size_t ii = n; ii-- > 0;) {
    if (dout[ii].empty()) continue;
    const auto& L = layers_[ii];
    const int src = inputs_[ii][0];
    switch (L.kind) {
      case LayerKind::conv2d:
      case LayerKind::fc: {
        Tensor delta = std::move(dout[ii]);
        if (L.activation != Activation::identity)
          for (std::size_t k = 0; k < delta.size(); ++k)
            delta[k] *= activation_derivative(L.activation, cache.z[ii][k]);
        const Mask* mask = params_[ii].mask ? &*params_[ii].mask : nullptr;
        grads.weight[ii] = weight_gradient(L, input(src), delta, mask);
        if (L.bias) grads.bias[ii] = bias_gradient(L, delta);
        if (src >= 0)
          accumulate(src, input_gradient(L, params_[ii].weight, delta, input(src)));
        break;
      }
      case LayerKind::add:
        accumulate(inputs_[ii][1], dout[ii]);
        accumulate(src, std::move(dout[ii]));
        break;
      default:
        if (src >= 0)
          accumulate(src, input_gradient(L, Tensor(), dout[ii], input(src)));
        break;
    }
  }
  return result;
}

double fd_check_against(Network& net, const Tensor& x,
                        std::span<const int> labels,
                        const Gradients& analytic, double eps) {
  require(eps >= 1e-7 && eps <= 1e-3, ErrorKind::config,
          "finite-difference eps must lie in [1e-7, 1e-3]");
  double worst = 0.0;
  auto probe = [&](double& param, double a) {
    const double saved = param;
    param = saved + eps;
    const double lp = net.loss(x, labels);
    param = saved - eps;
    const double lm = net.loss(x, labels);
    param = saved;
    require(std::isfinite(lp) && std::isfinite(lm), ErrorKind::numeric,
            "non-finite loss during finite differences");
    const double numeric = (lp - lm) / (2.0 * eps);
    const double denom = std::max({std::abs(a), std::abs(numeric), 1e-6});
    worst = std::max(worst, std::abs(a - numeric) / denom);
  };
  for (std::size_t id : net.weighted()) {
    auto& p = net.params()[id];
    for (std::size_t i = 0; i < p.weight.size(); ++i) {
      if (p.mask && !p.mask->test(i)) continue;
      probe(p.weight[i], analytic.weight[id][i]);
    }
    for (std::size_t i = 0; i < p.bias.size(); ++i)
      probe(p.bias[i], analytic.bias[id][i]);
  }
  return worst;
}

double fd_check(Network& net, const Tensor& x, std::span<const int> labels,
                double eps) {
  Gradients g;
  net.loss_and_gradients(x, labels, g);
  return fd_check_against(net, x, labels, g, eps);
}

}  // namespace mest
