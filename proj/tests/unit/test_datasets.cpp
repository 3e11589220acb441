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

#include <filesystem>

#include "doctest.h"
#include "mest/datasets.hpp"
#include "mest/io.hpp"
#include "mest/network.hpp"
#include "test_util.hpp"

using namespace mest;
using mest::testing::error_kind_of;

namespace {

std::filesystem::path temp_dir() {
  auto d = std::filesystem::temp_directory_path() / "mest_dataset_tests";
  std::filesystem::create_directories(d);
  return d;
}

}  // namespace

TEST_CASE("IDX fixture round trip") {
  IdxArray im{{4, 2, 3}, {}};
  for (int i = 0; i < 24; ++i) im.data.push_back(static_cast<std::uint8_t>(i * 10));
  IdxArray lb{{4}, {3, 1, 4, 1}};
  auto dir = temp_dir();
  write_file_atomic(dir / "im", encode_idx(im));
  write_file_atomic(dir / "lb", encode_idx(lb));
  auto ds = load_idx(dir / "im", dir / "lb", "train");
  CHECK(ds.size() == 4);
  CHECK(ds.height == 2);
  CHECK(ds.width == 3);
  CHECK(ds.images == im.data);
  CHECK(ds.labels == lb.data);
  auto bytes = encode_idx(im);
  CHECK(bytes[3] == 3);
  CHECK(parse_idx(bytes).dims == im.dims);
}

TEST_CASE("IDX format errors") {
  auto bytes = encode_idx(IdxArray{{2}, {1, 2}});
  bytes[2] = 0x09;
  CHECK(error_kind_of([&] { parse_idx(bytes); }) == ErrorKind::format);
  auto short_payload = encode_idx(IdxArray{{3}, {1, 2, 3}});
  short_payload.pop_back();
  CHECK(error_kind_of([&] { parse_idx(short_payload); }) == ErrorKind::format);
}

TEST_CASE("CIFAR-10 records") {
  std::vector<std::uint8_t> bytes(2 * 3073);
  bytes[0] = 7;
  bytes[1] = 11;
  bytes[3073] = 2;
  bytes[3073 + 3072] = 99;
  auto ds = parse_cifar10(bytes, "train");
  CHECK(ds.size() == 2);
  CHECK(ds.labels == std::vector<std::uint8_t>{7, 2});
  CHECK(ds.images[0] == 11);
  CHECK(ds.images[2 * 3072 - 1] == 99);
  CHECK(ds.channels == 3);
  auto trunc = bytes;
  trunc.pop_back();
  CHECK(error_kind_of([&] { parse_cifar10(trunc, "t"); }) == ErrorKind::format);
  bytes[0] = 10;
  CHECK(error_kind_of([&] { parse_cifar10(bytes, "t"); }) == ErrorKind::format);
}

TEST_CASE("augmentation: flip twice is identity, offsets in range, seeded") {
  Rng rng(1);
  std::vector<double> img(2 * 5 * 6);
  for (auto& v : img) v = rng.normal();
  auto orig = img;
  AugmentDraw flip{4, 4, true};
  augment_image(img, 2, 5, 6, flip);
  CHECK(img != orig);
  augment_image(img, 2, 5, 6, flip);
  CHECK(img == orig);
  for (std::uint64_t s = 0; s < 200; ++s) {
    auto d = draw_augment(s);
    CHECK(d.dx <= 8);
    CHECK(d.dy <= 8);
  }
  Tensor a({2, 2, 5, 6}, 1.0), b({2, 2, 5, 6}, 1.0);
  std::vector<std::size_t> ex = {3, 9};
  augment(a, ex, 5);
  augment(b, ex, 5);
  CHECK(a == b);
  CHECK(a.shape() == Shape{2, 2, 5, 6});
}

TEST_CASE("crop shifts content and pads with zeros") {
  std::vector<double> img = {1, 2, 3, 4};  // 1 x 2 x 2
  augment_image(img, 1, 2, 2, AugmentDraw{5, 4, false}, 4);  // shift left by one
  CHECK(img == std::vector<double>{2, 0, 4, 0});
}

TEST_CASE("synth: checksum, balance, determinism") {
  auto a = synth(60, 3, 9);
  auto b = synth(60, 3, 9);
  CHECK(a.checksum() == b.checksum());
  CHECK(a.checksum() != synth(60, 3, 10).checksum());
  std::vector<int> counts(3);
  for (auto l : a.labels) ++counts[l];
  CHECK(counts == std::vector<int>{20, 20, 20});
  CHECK_NOTHROW(a.validate());
}

TEST_CASE("synth with 2 classes is separable by a single fc layer") {
  auto ds = synth(200, 2, 4);
  auto norm = compute_normalization(ds);
  std::vector<std::size_t> all(ds.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  Tensor x = make_batch(ds, all, norm);
  auto y = batch_labels(ds, all);
  LayerSpec sm;
  sm.kind = LayerKind::softmax_xent;
  Network net({LayerSpec::dense(144, 2), sm}, {1, 12, 12});
  net.init_weights(1);
  double acc = 0;
  for (int it = 0; it < 200 && acc < 1.0; ++it) {
    Gradients g;
    auto r = net.loss_and_gradients(x, y, g);
    acc = 0;
    for (auto c : r.correct) acc += c;
    acc /= static_cast<double>(r.correct.size());
    auto& w = net.params()[0].weight;
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= 0.1 * g.weight[0][i];
    auto& bb = net.params()[0].bias;
    for (std::size_t i = 0; i < bb.size(); ++i) bb[i] -= 0.1 * g.bias[0][i];
  }
  CHECK(acc == 1.0);
}

TEST_CASE("normalization yields zero-mean unit-variance batches") {
  auto ds = synth(50, 2, 1);
  auto norm = compute_normalization(ds);
  std::vector<std::size_t> all(ds.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  Tensor x = make_batch(ds, all, norm);
  double s = 0, sq = 0;
  for (double v : x.values()) {
    s += v;
    sq += v * v;
  }
  const double n = static_cast<double>(x.size());
  CHECK(s / n == doctest::Approx(0.0).epsilon(1e-9).scale(1));
  CHECK(sq / n == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("bundled MNIST subset loads") {
  const std::filesystem::path dir = MEST_SOURCE_DIR "/data/mnist5k";
  auto tr = load_mnist(dir, true);
  auto te = load_mnist(dir, false);
  CHECK(tr.size() == 4000);
  CHECK(te.size() == 1000);
  CHECK(tr.height == 28);
}
