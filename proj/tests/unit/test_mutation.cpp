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

#include <algorithm>
#include <numeric>

#include "doctest.h"
#include "mest/mutation.hpp"
#include "test_util.hpp"

using namespace mest;
using mest::testing::error_kind_of;
using mest::testing::random_tensor;

namespace {

LayerSpec softmax() {
  LayerSpec l;
  l.kind = LayerKind::softmax_xent;
  return l;
}

// Single fc layer with N = 1000 weights.
Network fc_net(double s, std::uint64_t seed) {
  Network net({LayerSpec::dense(100, 10), softmax()}, {100, 1, 1});
  net.set_mask(0, random_mask(net.layers()[0].weight_layout(),
                              Scheme::unstructured(), s, seed));
  net.init_weights(seed);
  return net;
}

MutationSchedule table_f1() {
  MutationSchedule s;
  s.mode = MutationMode::em;
  s.milestones = {{0, 0.05}, {100, 0.025}};
  s.delta = 5;
  s.stop = 130;
  s.end = 160;
  s.lambda = 0.01;
  return s;
}

}  // namespace

TEST_CASE("importance: hand evaluation and lambda = 0") {
  Tensor w({2}, {0.5, -0.25});
  Tensor g({2}, {-2.0, 4.0});
  auto s = importance(w, g, 0.01);
  CHECK(s[0] == doctest::Approx(0.52));
  CHECK(s[1] == doctest::Approx(0.29));
  auto m = importance(w, g, 0.0);
  CHECK(m[0] == 0.5);
  CHECK(m[1] == 0.25);
  Tensor bad({2}, {0.5, std::numeric_limits<double>::infinity()});
  CHECK(error_kind_of([&] { importance(bad, g, 0.01); }) == ErrorKind::numeric);
}

TEST_CASE("arg_remove_to: six weights, remove to 50%") {
  Mask m({1, 6, 1}, Scheme::unstructured(), true);
  std::vector<double> scores = {5, 4, 3, 2, 1, 0};
  auto out = arg_remove_to(m, 0.5, scores);
  CHECK(out.bits() == std::vector<std::uint8_t>{1, 1, 1, 0, 0, 0});
  CHECK(arg_remove_to(m, 0.0, scores) == m);
}

TEST_CASE("arg_remove_to: block (2,1) removes the low-score block whole") {
  Mask m({4, 1, 1}, Scheme::block(2, 1), true);
  std::vector<double> scores = {6, 4, 0.5, 0.5};  // block sums 10 and 1
  auto out = arg_remove_to(m, 0.5, scores);
  CHECK(out.bits() == std::vector<std::uint8_t>{1, 1, 0, 0});
}

TEST_CASE("arg_remove_to with lambda 0 equals magnitude pruning") {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    WeightLayout l{8, 5, 3};
    Mask m = random_mask(l, Scheme::unstructured(), 0.5, trial);
    Tensor w = random_tensor({8, 5, 3, 3}, rng);
    apply_mask(w, m);
    auto out = arg_remove_to(m, 0.8, importance(w, Tensor(), 0.0).span());
    // Oracle: keep the largest |w| among active weights.
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < m.size(); ++i)
      if (m.test(i)) idx.push_back(i);
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) {
      return std::abs(w[a]) > std::abs(w[b]);
    });
    idx.resize(target_nnz(l, Scheme::unstructured(), 0.8));
    Mask oracle(l, Scheme::unstructured());
    for (auto i : idx) oracle.set(i, true);
    CHECK(out == oracle);
  }
}

TEST_CASE("arg_remove_to: channel and pattern aggregate scores") {
  WeightLayout l{2, 3, 3};
  Mask ch(l, Scheme::channel(), true);
  std::vector<double> scores(l.size(), 1.0);
  for (std::size_t f = 0; f < 2; ++f)
    for (std::size_t k = 0; k < 9; ++k) scores[f * 27 + 9 + k] = 0.1;
  auto out = arg_remove_to(ch, 1.0 / 3.0, scores);
  CHECK(out.channel_active(0));
  CHECK_FALSE(out.channel_active(1));
  CHECK(out.channel_active(2));

  WeightLayout pl{2, 4, 3};
  Mask p(pl, Scheme::pattern());
  for (std::size_t f = 0; f < 2; ++f)
    for (std::size_t c = 0; c < 4; ++c) p.set_kernel(f, c, int(c));
  std::vector<double> ps(pl.size(), 1.0);
  ps[0 * 36 + 2 * 9 + 4] = 0.0;  // filter 0: kernel 2 weakest
  ps[1 * 36 + 0 * 9 + 4] = 0.0;  // filter 1: kernel 0 weakest
  // 9 (1 - s) / 4 * 4 = 3 kernels kept at s = 2/3.
  auto po = arg_remove_to(p, 2.0 / 3.0, ps);
  CHECK_FALSE(po.kernel_active(0, 2));
  CHECK_FALSE(po.kernel_active(1, 0));
  CHECK(po.nnz() == 2 * 3 * 4);
  CHECK_NOTHROW(po.check_invariants());
}

TEST_CASE("arg_remove_to rejects a denser target") {
  Mask m = random_mask({4, 4, 3}, Scheme::unstructured(), 0.9, 1);
  std::vector<double> scores(m.size(), 1.0);
  CHECK(error_kind_of([&] { arg_remove_to(m, 0.5, scores); }) == ErrorKind::feasibility);
}

TEST_CASE("arg_grow_to: 95% to 90% on N=1000 adds exactly 50 empty positions") {
  WeightLayout l{10, 100, 1};
  Mask m = random_mask(l, Scheme::unstructured(), 0.95, 4);
  auto out = arg_grow_to(m, 0.9, 5);
  CHECK(out.nnz() == 100);
  std::size_t fresh = 0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m.test(i)) CHECK(out.test(i));
    fresh += out.test(i) && !m.test(i);
  }
  CHECK(fresh == 50);
  CHECK(arg_grow_to(m, 0.95, 5) == m);
  CHECK(arg_grow_to(m, 0.9, 5) == out);
}

TEST_CASE("arg_grow_to: pattern growth keeps styles and per-filter balance") {
  WeightLayout l{6, 12, 3};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Mask m = random_mask(l, Scheme::pattern(), 0.9, seed);
    auto out = arg_grow_to(m, 0.8, seed + 100);
    CHECK_NOTHROW(out.check_invariants());
    CHECK(out.nnz() == target_nnz(l, Scheme::pattern(), 0.8));
    for (std::size_t f = 0; f < 6; ++f)
      for (std::size_t c = 0; c < 12; ++c)
        if (m.kernel_active(f, c)) CHECK(out.kernel_style(f, c) == m.kernel_style(f, c));
  }
}

TEST_CASE("arg_grow_to: block and channel growth stays on unit boundaries") {
  WeightLayout l{8, 4, 3};
  for (auto scheme : {Scheme::block(4, 1), Scheme::channel()}) {
    Mask m = random_mask(l, scheme, 0.75, 2);
    auto out = arg_grow_to(m, 0.5, 3);
    CHECK_NOTHROW(out.check_invariants());
    CHECK(out.nnz() == target_nnz(l, scheme, 0.5));
  }
}

TEST_CASE("schedule: Table F.1 CIFAR values") {
  auto s = table_f1();
  CHECK_NOTHROW(s.validate());
  CHECK(s.p_at(0) == 0.05);
  CHECK(s.p_at(95) == 0.05);
  CHECK(s.p_at(100) == 0.025);
  CHECK(s.p_at(129) == 0.025);
  CHECK(plan_epoch(s, 0).empty());
  CHECK(plan_epoch(s, 3).empty());
  auto at5 = plan_epoch(s, 5);
  REQUIRE(at5.size() == 2);
  CHECK(at5[0].kind == StepKind::remove_to);
  CHECK(at5[0].offset == 0.05);
  CHECK(at5[1].kind == StepKind::grow_to);
  CHECK(plan_epoch(s, 125)[0].offset == 0.025);
  CHECK(plan_epoch(s, 130).empty());
  CHECK(plan_epoch(s, 150).empty());
}

TEST_CASE("schedule: vanilla keeps p fixed, EM&S windows carry -p") {
  auto v = table_f1();
  v.mode = MutationMode::vanilla;
  CHECK(v.p_at(120) == 0.05);
  auto e = table_f1();
  e.mode = MutationMode::ems;
  CHECK(e.train_offset(0) == -0.05);
  CHECK(e.train_offset(104) == -0.025);
  CHECK(e.train_offset(130) == 0.0);
  auto first = plan_epoch(e, 0);
  REQUIRE(first.size() == 1);
  CHECK(first[0].kind == StepKind::grow_to);
  auto last = plan_epoch(e, 130);
  REQUIRE(last.size() == 1);
  CHECK(last[0].kind == StepKind::remove_to);
}

TEST_CASE("schedule validation") {
  auto s = table_f1();
  s.milestones = {{0, 0.025}, {100, 0.05}};
  CHECK(error_kind_of([&] { s.validate(); }) == ErrorKind::config);
  s = table_f1();
  s.stop = 160;
  CHECK(error_kind_of([&] { s.validate(); }) == ErrorKind::config);
  s = table_f1();
  s.milestones = {{0, 0.05}, {102, 0.025}};
  CHECK(error_kind_of([&] { s.validate(); }) == ErrorKind::config);
}

TEST_CASE("EM counting: s=0.9, p=0.05, N=1000") {
  Network net = fc_net(0.9, 1);
  std::vector<double> layer_s = {0.9, 0.0};
  std::vector<Tensor> grads(2);
  Rng rng(2);
  grads[0] = random_tensor({10, 100}, rng);
  apply_mask(grads[0], *net.params()[0].mask);
  std::vector<std::size_t> seen;
  auto events = em_epoch_hook(net, grads, layer_s, table_f1(), 5, 7,
                              [&](const MutationEvent& e) { seen.push_back(e.nnz_after); });
  CHECK(seen == std::vector<std::size_t>{50, 100});
  CHECK(events.size() == 2);
  // Grown weights are zero; weights outside the mask are zero.
  for (std::size_t i = 0; i < 1000; ++i)
    if (!net.params()[0].mask->test(i)) CHECK(net.params()[0].weight[i] == 0.0);
}

TEST_CASE("EM&S counting: s=0.9, p=0.05, N=1000") {
  Network net = fc_net(0.9, 1);
  std::vector<double> layer_s = {0.9, 0.0};
  std::vector<Tensor> grads(2);
  auto s = table_f1();
  s.mode = MutationMode::ems;
  em_epoch_hook(net, grads, layer_s, s, 0, 7);
  CHECK(net.total_nnz() == 150);
  std::vector<std::size_t> seen;
  em_epoch_hook(net, grads, layer_s, s, 5, 7,
                [&](const MutationEvent& e) { seen.push_back(e.nnz_after); });
  CHECK(seen == std::vector<std::size_t>{100, 150});
  em_epoch_hook(net, grads, layer_s, s, 130, 7);
  CHECK(net.total_nnz() == 100);
}

TEST_CASE("validate_schedule_for catches infeasible elastic ranges") {
  Network net = fc_net(0.98, 1);
  std::vector<double> layer_s = {0.98, 0.0};
  CHECK(error_kind_of([&] { validate_schedule_for(net, layer_s, table_f1()); }) ==
        ErrorKind::feasibility);
  auto s = table_f1();
  s.milestones = {{0, 0.01}, {100, 0.005}};
  CHECK_NOTHROW(validate_schedule_for(net, layer_s, s));
}
