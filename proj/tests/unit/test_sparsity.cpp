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
#include <set>

#include "doctest.h"
#include "mest/compressed.hpp"
#include "mest/footprint.hpp"
#include "mest/sparsity.hpp"
#include "test_util.hpp"

using namespace mest;
using mest::testing::error_kind_of;
using mest::testing::random_float_tensor;

namespace {

Tensor masked_weights(const Mask& m, std::uint64_t seed) {
  Rng rng(seed);
  const auto& l = m.layout();
  Tensor w = random_float_tensor({l.filters, l.channels, l.kernel, l.kernel}, rng);
  for (std::size_t i = 0; i < w.size(); ++i)
    if (!m.test(i)) w[i] = 0;
  return w;
}

}  // namespace

TEST_CASE("scheme names round-trip") {
  for (auto s : {Scheme::unstructured(), Scheme::channel(), Scheme::block(4, 1),
                 Scheme::block(2, 2), Scheme::pattern()})
    CHECK(parse_scheme(to_string(s)) == s);
  CHECK(parse_scheme("structured") == Scheme::channel());
  CHECK(error_kind_of([] { parse_scheme("diagonal"); }) == ErrorKind::config);
}

TEST_CASE("pattern styles: eight distinct 4-tap kernels around the center") {
  std::set<std::array<std::uint8_t, 4>> seen;
  for (const auto& st : pattern_styles()) {
    CHECK(std::is_sorted(st.begin(), st.end()));
    CHECK(std::count(st.begin(), st.end(), 4) == 1);
    seen.insert(st);
  }
  CHECK(seen.size() == 8);
  std::uint8_t bits[9] = {};
  for (auto t : pattern_styles()[3]) bits[t] = 1;
  CHECK(match_pattern_style(bits) == 3);
  bits[4] = 0;
  CHECK(match_pattern_style(bits) == -1);
}

TEST_CASE("feasibility checks") {
  WeightLayout conv{8, 4, 3};
  CHECK_NOTHROW(check_feasible(conv, Scheme::pattern(), 5.0 / 9.0));
  CHECK(error_kind_of([&] { check_feasible(conv, Scheme::pattern(), 0.5); }) ==
        ErrorKind::feasibility);
  CHECK(error_kind_of([&] {
          check_feasible({8, 4, 5}, Scheme::pattern(), 0.9);
        }) == ErrorKind::feasibility);
  CHECK(error_kind_of([&] {
          check_feasible({6, 4, 3}, Scheme::block(4, 1), 0.5);
        }) == ErrorKind::feasibility);
  CHECK(error_kind_of([&] { check_feasible(conv, Scheme::unstructured(), 1.0); }) ==
        ErrorKind::feasibility);
}

TEST_CASE("random masks hit the target count and respect granularity") {
  WeightLayout conv{8, 6, 3};
  for (auto scheme : {Scheme::unstructured(), Scheme::channel(),
                      Scheme::block(4, 1), Scheme::block(2, 3), Scheme::pattern()}) {
    for (double s : {0.6, 0.8, 0.9}) {
      Mask m = random_mask(conv, scheme, s, 42);
      CHECK(m.nnz() == target_nnz(conv, scheme, s));
      CHECK_NOTHROW(m.check_invariants());
      CHECK(random_mask(conv, scheme, s, 42) == m);
    }
  }
}

TEST_CASE("pattern masks keep the same kernel count in every filter") {
  WeightLayout conv{4, 10, 3};
  Mask m = random_mask(conv, Scheme::pattern(), 0.8, 7);
  // 9 (1 - 0.8) / 4 of 10 channels = 4.5, rounded half up.
  for (std::size_t f = 0; f < 4; ++f) {
    std::size_t k = 0;
    for (std::size_t c = 0; c < 10; ++c) k += m.kernel_active(f, c);
    CHECK(k == 5);
  }
}

TEST_CASE("mask invariant violations are feasibility errors") {
  WeightLayout conv{4, 2, 3};
  Mask m(conv, Scheme::pattern());
  m.set(4, true);
  CHECK(error_kind_of([&] { m.check_invariants(); }) == ErrorKind::feasibility);
  Mask b(conv, Scheme::block(4, 1));
  b.set(0, true);
  CHECK(error_kind_of([&] { b.check_invariants(); }) == ErrorKind::feasibility);
}

TEST_CASE("CSR of a dense 2x2 matrix") {
  WeightLayout fc{2, 2, 1};
  Mask m(fc, Scheme::unstructured(), true);
  Tensor w({2, 2, 1, 1}, {1, 2, 3, 4});
  auto cl = encode(w, m);
  CHECK(cl.row_index == std::vector<std::uint32_t>{0, 2, 4});
  CHECK(cl.indices == std::vector<std::uint32_t>{0, 1, 0, 1});
  CHECK(cl.values == std::vector<double>{1, 2, 3, 4});
}

TEST_CASE("block (4,1) storage of an 8x4 matrix with two blocks") {
  WeightLayout fc{8, 4, 1};
  Mask m(fc, Scheme::block(4, 1));
  m.set_block(0, 2, true);
  m.set_block(1, 0, true);
  Tensor w = masked_weights(m, 3);
  auto cl = encode(w, m);
  CHECK(cl.values.size() == 8);
  CHECK(cl.indices == std::vector<std::uint32_t>{2, 0});
  CHECK(cl.row_index == std::vector<std::uint32_t>{0, 1, 2});
  auto [w2, m2] = decode(cl);
  CHECK(w2 == w);
  CHECK(m2 == m);
}

TEST_CASE("encode/decode and serialization round-trip for every scheme") {
  WeightLayout conv{8, 6, 3};
  for (auto scheme : {Scheme::unstructured(), Scheme::channel(),
                      Scheme::block(4, 1), Scheme::pattern()}) {
    for (unsigned bw : {32u, 64u}) {
      Mask m = random_mask(conv, scheme, 0.75, 9);
      Tensor w = masked_weights(m, 10);
      auto cl = encode(w, m, bw, 8);
      CHECK(cl.nnz() == m.nnz());
      auto [w2, m2] = decode(cl);
      CHECK(w2 == w);
      CHECK(m2 == m);
      ByteWriter out;
      serialize(cl, out);
      ByteReader in(out.bytes());
      CHECK(deserialize_compressed(in) == cl);
      CHECK(in.at_end());
    }
  }
}

TEST_CASE("compressed payload plus the gradient buffer equals the exact footprint") {
  WeightLayout conv{8, 6, 3};
  const std::vector<LayerDims> dims = {{conv.size(), conv.filters}};
  for (auto scheme : {Scheme::unstructured(), Scheme::block(4, 1), Scheme::pattern()}) {
    Mask m = random_mask(conv, scheme, 0.75, 5);
    auto cl = encode(masked_weights(m, 6), m);
    auto rep = footprint_bits(dims, footprint_mode_for(scheme), m.sparsity());
    CHECK(rep.total_bits == doctest::Approx(cl.payload_bits() + 32.0 * cl.nnz()));
  }
}

TEST_CASE("encoding errors") {
  WeightLayout fc{2, 300, 1};
  Mask m(fc, Scheme::unstructured(), true);
  Tensor w({2, 300, 1, 1}, 0.5);
  CHECK(error_kind_of([&] { encode(w, m, 32, 8); }) == ErrorKind::encoding);
  CHECK_NOTHROW(encode(w, m, 32, 16));
  w[0] = 0.1;  // not a float
  CHECK(error_kind_of([&] { encode(w, m, 32, 16); }) == ErrorKind::encoding);
  CHECK_NOTHROW(encode(w, m, 64, 16));
  Mask half(fc, Scheme::unstructured());
  CHECK(error_kind_of([&] { encode(w, half, 64, 16); }) == ErrorKind::encoding);
}

TEST_CASE("truncated compressed stream is a format error") {
  Mask m = random_mask({4, 2, 3}, Scheme::unstructured(), 0.5, 1);
  ByteWriter out;
  serialize(encode(masked_weights(m, 2), m), out);
  auto bytes = out.bytes();
  bytes.resize(bytes.size() - 3);
  ByteReader in(bytes);
  CHECK(error_kind_of([&] { deserialize_compressed(in); }) == ErrorKind::format);
}

TEST_CASE("footprint closed forms on hand-computed layers") {
  const std::vector<LayerDims> u = {{36, 4}};
  // 0.25 (2*36*32 + 36*8) + (4+1)*8
  CHECK(footprint_bits(u, FootprintMode::unstructured, 0.75).total_bits == 688.0);
  const std::vector<LayerDims> d = {{100, 10}};
  CHECK(footprint_bits(d, FootprintMode::dense, 0.9).total_bits == 6400.0);
  CHECK(footprint_bits(d, FootprintMode::dense_pruning_at_init, 0.9).total_bits == 6400.0);
  CHECK(footprint_bits(d, FootprintMode::structured, 0.5).total_bits == 3200.0);
  // (2 - 0.9) 100*32 + 0.1*100*8
  CHECK(footprint_bits(d, FootprintMode::dense_gradient_sparse_weight, 0.9).total_bits ==
        doctest::Approx(3600.0));
  const std::vector<LayerDims> p = {{90, 2}};
  // (4/9)(2*90*32 + 22.5*8) + 3*8
  CHECK(footprint_bits(p, FootprintMode::pattern, 5.0 / 9.0).total_bits ==
        doctest::Approx(2664.0));
  const std::vector<LayerDims> b = {{32, 8}};
  // 0.25 (2*32*32 + 8*8) + (8/4 + 1)*8
  CHECK(footprint_bits(b, FootprintMode::block, 0.75).total_bits == 552.0);
  FootprintParams approx;
  approx.exact = false;
  CHECK(footprint_bits(u, FootprintMode::unstructured, 0.75, approx).total_bits == 648.0);
}

TEST_CASE("footprint mode names round-trip") {
  for (auto m : kAllFootprintModes) CHECK(parse_footprint_mode(to_string(m)) == m);
}

TEST_CASE("layer sparsity strategies meet the weighted overall target") {
  std::vector<LayerBudget> layers = {
      {100, 3, true}, {900, 3}, {2304, 3}, {100, 1}, {50, 1, true}};
  for (auto strat : {SparsityStrategy::uniform, SparsityStrategy::fixed_ratio,
                     SparsityStrategy::proportional}) {
    auto s = assign_layer_sparsity(layers, strat, 0.6);
    double kept = 0, total = 0;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      if (layers[i].dense) {
        CHECK(s[i] == 0.0);
        continue;
      }
      kept += layers[i].weights * s[i];
      total += layers[i].weights;
    }
    CHECK(kept / total == doctest::Approx(0.6));
  }
  auto fr = assign_layer_sparsity(layers, SparsityStrategy::fixed_ratio, 0.6, 1.12);
  CHECK(fr[1] / fr[3] == doctest::Approx(1.12));
  auto pr = assign_layer_sparsity(layers, SparsityStrategy::proportional, 0.6);
  CHECK(pr[2] > pr[1]);
  CHECK(pr[1] > pr[3]);
  CHECK(error_kind_of([&] {
          assign_layer_sparsity(layers, SparsityStrategy::fixed_ratio, 0.997, 1.12);
        }) == ErrorKind::feasibility);
}
