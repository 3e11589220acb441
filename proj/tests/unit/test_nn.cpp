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

#include <cmath>

#include "doctest.h"
#include "mest/network.hpp"
#include "mest/nn.hpp"
#include "test_util.hpp"

using namespace mest;
using mest::testing::error_kind_of;
using mest::testing::random_tensor;

namespace {

LayerSpec kind_only(LayerKind k) {
  LayerSpec l;
  l.kind = k;
  return l;
}

// Sum of r ⊙ t, the linear functional used by the finite-difference oracles.
double dot(const Tensor& r, const Tensor& t) {
  double s = 0;
  for (std::size_t i = 0; i < t.size(); ++i) s += r[i] * t[i];
  return s;
}

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

Network toy_net(std::uint64_t seed) {
  std::vector<LayerSpec> layers = {
      LayerSpec::conv(1, 3, 3, 1, 1, Activation::relu),
      LayerSpec::dense(3 * 4 * 4, 4),
      kind_only(LayerKind::softmax_xent),
  };
  Network net(layers, {1, 4, 4});
  net.init_weights(seed);
  return net;
}

}  // namespace

TEST_CASE("conv forward: identity 1x1 kernel reproduces the input") {
  Rng rng(1);
  auto layer = LayerSpec::conv(1, 1, 1);
  layer.bias = false;
  Tensor x = random_tensor({2, 1, 3, 3}, rng);
  auto out = forward(layer, Tensor({1, 1, 1, 1}, 1.0), Tensor(), x);
  CHECK(out.a == x);
}

TEST_CASE("conv forward: 2x2 diagonal kernel on [[1,2],[3,4]] gives 5") {
  auto layer = LayerSpec::conv(1, 1, 2);
  layer.bias = false;
  Tensor x({1, 1, 2, 2}, {1, 2, 3, 4});
  Tensor w({1, 1, 2, 2}, {1, 0, 0, 1});
  auto out = forward(layer, w, Tensor(), x);
  REQUIRE(out.z.shape() == Shape{1, 1, 1, 1});
  CHECK(out.z[0] == 5.0);
}

TEST_CASE("fc forward with zero weights and bias is zero") {
  Rng rng(2);
  auto layer = LayerSpec::dense(5, 3);
  auto out = forward(layer, Tensor({3, 5}), Tensor({3}), random_tensor({4, 5}, rng));
  for (double v : out.z.values()) CHECK(v == 0.0);
}

TEST_CASE("forward rejects mismatched input shapes") {
  auto layer = LayerSpec::conv(3, 2, 3);
  CHECK(error_kind_of([&] {
          forward(layer, Tensor({2, 3, 3, 3}), Tensor({2}), Tensor({1, 2, 5, 5}));
        }) == ErrorKind::dimension);
  auto fc = LayerSpec::dense(4, 2);
  CHECK(error_kind_of([&] {
          forward(fc, Tensor({2, 4}), Tensor({2}), Tensor({1, 5}));
        }) == ErrorKind::dimension);
}

TEST_CASE("relu derivative at exactly zero is zero") {
  CHECK(activation_derivative(Activation::relu, 0.0) == 0.0);
  CHECK(activation_derivative(Activation::relu, 1e-300) == 1.0);
  CHECK(activation_derivative(Activation::identity, 0.0) == 1.0);
}

TEST_CASE("backward_error: zero upstream error gives zero error") {
  Rng rng(3);
  auto next = LayerSpec::conv(2, 3, 3, 1, 1);
  Tensor z = random_tensor({1, 2, 5, 5}, rng);
  Tensor d = backward_error(next, random_tensor({3, 2, 3, 3}, rng),
                            Tensor({1, 3, 5, 5}), z, Activation::relu);
  for (double v : d.values()) CHECK(v == 0.0);
}

TEST_CASE("backward_error: linear 1x1 conv scales by the weight") {
  Rng rng(4);
  auto next = LayerSpec::conv(1, 1, 1);
  Tensor z = random_tensor({1, 1, 3, 3}, rng);
  Tensor dn = random_tensor({1, 1, 3, 3}, rng);
  Tensor d = backward_error(next, Tensor({1, 1, 1, 1}, 2.5), dn, z,
                            Activation::identity);
  for (std::size_t i = 0; i < d.size(); ++i) CHECK(d[i] == 2.5 * dn[i]);
}

TEST_CASE("backward_error: missing cached pre-activation is a state error") {
  auto next = LayerSpec::conv(1, 1, 1);
  CHECK(error_kind_of([&] {
          backward_error(next, Tensor({1, 1, 1, 1}, 1.0), Tensor({1, 1, 2, 2}),
                         Tensor(), Activation::relu);
        }) == ErrorKind::state);
}

TEST_CASE("backward_error matches finite differences on a random 3x3 conv") {
  // L(z) = <r, conv(relu(z))>; dL/dz is the lower layer's error.
  for (std::uint64_t seed = 10; seed < 15; ++seed) {
    Rng rng(seed);
    for (std::size_t stride : {1, 2}) {
      auto next = LayerSpec::conv(2, 3, 3, stride, 1);
      next.bias = false;
      Tensor w = random_tensor({3, 2, 3, 3}, rng);
      Tensor z = random_tensor({2, 2, 6, 6}, rng);
      auto fwd = [&](const Tensor& zz) {
        Tensor a = zz;
        for (auto& v : a.values()) v = v > 0 ? v : 0;
        return forward(next, w, Tensor(), a).z;
      };
      Tensor r = random_tensor(fwd(z).shape(), rng);
      Tensor d = backward_error(next, w, r, z, Activation::relu);
      const double eps = 1e-6;
      for (std::size_t i = 0; i < z.size(); ++i) {
        if (std::abs(z[i]) < 1e-3) continue;  // stay off the kink
        Tensor zp = z, zm = z;
        zp[i] += eps;
        zm[i] -= eps;
        const double fd = (dot(r, fwd(zp)) - dot(r, fwd(zm))) / (2 * eps);
        CHECK(rel_err(d[i], fd) <= 1e-6);
      }
    }
  }
}

TEST_CASE("weight_gradient: all-zero mask gives zero gradient") {
  Rng rng(5);
  auto layer = LayerSpec::conv(2, 2, 3, 1, 1);
  Mask mask(layer.weight_layout(), Scheme::unstructured());
  Tensor g = weight_gradient(layer, random_tensor({2, 2, 4, 4}, rng),
                             random_tensor({2, 2, 4, 4}, rng), &mask);
  for (double v : g.values()) CHECK(v == 0.0);
}

TEST_CASE("weight_gradient: dense fc, batch 1 is the outer product") {
  Rng rng(6);
  auto layer = LayerSpec::dense(4, 3);
  Tensor a = random_tensor({1, 4}, rng);
  Tensor d = random_tensor({1, 3}, rng);
  Tensor g = weight_gradient(layer, a, d, nullptr);
  for (std::size_t o = 0; o < 3; ++o)
    for (std::size_t i = 0; i < 4; ++i) CHECK(g[o * 4 + i] == d[o] * a[i]);
}

TEST_CASE("weight_gradient matches finite differences on the mask support") {
  for (std::uint64_t seed = 20; seed < 24; ++seed) {
    Rng rng(seed);
    auto layer = LayerSpec::conv(3, 4, 3, 1 + seed % 2, 1);
    layer.bias = false;
    Tensor w = random_tensor(layer.weight_shape(), rng);
    Mask mask = random_mask(layer.weight_layout(), Scheme::unstructured(), 0.5, seed);
    for (std::size_t i = 0; i < w.size(); ++i)
      if (!mask.test(i)) w[i] = 0;
    Tensor a = random_tensor({2, 3, 5, 5}, rng);
    Tensor r = random_tensor(forward(layer, w, Tensor(), a).z.shape(), rng);
    Tensor g = weight_gradient(layer, a, r, &mask);
    const double eps = 1e-6;
    std::size_t stored = 0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (!mask.test(i)) {
        CHECK(g[i] == 0.0);
        continue;
      }
      ++stored;
      Tensor wp = w, wm = w;
      wp[i] += eps;
      wm[i] -= eps;
      const double fd = (dot(r, forward(layer, wp, Tensor(), a).z) -
                         dot(r, forward(layer, wm, Tensor(), a).z)) / (2 * eps);
      CHECK(rel_err(g[i], fd) <= 1e-6);
    }
    CHECK(stored == mask.nnz());
  }
}

TEST_CASE("fd_check: two-layer toy net agrees within 1e-4") {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    Network net = toy_net(seed);
    Rng rng(seed + 100);
    Tensor x = random_tensor({3, 1, 4, 4}, rng);
    std::vector<int> labels = {0, 1, 3};
    CHECK(fd_check(net, x, labels, 1e-5) <= 1e-4);
  }
}

TEST_CASE("fd_check: zero input and zero bias keep dead-relu gradients at zero") {
  Network net = toy_net(7);
  Tensor x({2, 1, 4, 4});
  std::vector<int> labels = {1, 2};
  Gradients g;
  net.loss_and_gradients(x, labels, g);
  for (double v : g.weight[0].values()) CHECK(v == 0.0);
  // Biases sit on the relu kink, so only weights are finite-differenced.
  const double eps = 1e-5;
  auto& w = net.params()[0].weight;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double saved = w[i];
    w[i] = saved + eps;
    const double lp = net.loss(x, labels);
    w[i] = saved - eps;
    const double lm = net.loss(x, labels);
    w[i] = saved;
    CHECK(std::abs((lp - lm) / (2 * eps)) <= 1e-9);
  }
}

TEST_CASE("fd_check: a corrupted gradient entry is detected") {
  Network net = toy_net(8);
  Rng rng(9);
  Tensor x = random_tensor({2, 1, 4, 4}, rng);
  std::vector<int> labels = {0, 2};
  Gradients g;
  net.loss_and_gradients(x, labels, g);
  g.weight[1][5] += 0.1;
  CHECK(fd_check_against(net, x, labels, g, 1e-5) > 1e-2);
}

TEST_CASE("fd_check: eps outside [1e-7, 1e-3] is rejected") {
  Network net = toy_net(1);
  Tensor x({1, 1, 4, 4});
  std::vector<int> labels = {0};
  CHECK(error_kind_of([&] { fd_check(net, x, labels, 1e-2); }) == ErrorKind::config);
}

TEST_CASE("forward is bitwise deterministic") {
  Network a = toy_net(11), b = toy_net(11);
  Rng rng(12);
  Tensor x = random_tensor({4, 1, 4, 4}, rng);
  CHECK(a.logits(x) == b.logits(x));
}

TEST_CASE("masked network gradients carry the mask topology") {
  Network net = toy_net(13);
  net.set_mask(1, random_mask(net.layers()[1].weight_layout(), Scheme::unstructured(), 0.75, 3));
  Rng rng(14);
  Tensor x = random_tensor({2, 1, 4, 4}, rng);
  std::vector<int> labels = {0, 1};
  Gradients g;
  net.loss_and_gradients(x, labels, g);
  const Mask& m = *net.params()[1].mask;
  for (std::size_t i = 0; i < m.size(); ++i)
    if (!m.test(i)) CHECK(g.weight[1][i] == 0.0);
  CHECK(fd_check(net, x, labels, 1e-5) <= 1e-4);
}

TEST_CASE("residual add and pooling nodes backpropagate correctly") {
  std::vector<LayerSpec> layers;
  layers.push_back(LayerSpec::conv(2, 3, 3, 1, 1, Activation::relu));  // 0
  layers.push_back(LayerSpec::conv(3, 3, 3, 1, 1));                    // 1
  LayerSpec add = kind_only(LayerKind::add);
  add.inputs = {1, 0};
  layers.push_back(add);                                               // 2
  layers.push_back(kind_only(LayerKind::relu));                // 3
  LayerSpec mp = kind_only(LayerKind::maxpool);
  mp.pool = 2;
  layers.push_back(mp);                                                // 4
  LayerSpec gap = kind_only(LayerKind::avgpool);
  gap.pool = 0;
  layers.push_back(gap);                                               // 5
  layers.push_back(LayerSpec::dense(3, 3));                            // 6
  layers.push_back(kind_only(LayerKind::softmax_xent));
  Network net(layers, {2, 6, 6});
  net.init_weights(21);
  Rng rng(22);
  Tensor x = random_tensor({2, 2, 6, 6}, rng);
  std::vector<int> labels = {2, 0};
  CHECK(fd_check(net, x, labels, 1e-6) <= 1e-4);
}
