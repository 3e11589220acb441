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

#include "mest/datasets.hpp"

#include <algorithm>
#include <cmath>

#include "mest/error.hpp"
#include "mest/io.hpp"
#include "mest/rng.hpp"

namespace mest {
namespace {

std::uint32_t read_be32(std::span<const std::uint8_t> b, std::size_t at) {
  return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) |
         (std::uint32_t{b[at + 2]} << 8) | std::uint32_t{b[at + 3]};
}

constexpr std::size_t kCifarRecord = 3073;

}  // namespace

std::uint64_t LabeledDataset::checksum() const {
  ByteWriter w;
  w.put(static_cast<std::uint64_t>(channels));
  w.put(static_cast<std::uint64_t>(height));
  w.put(static_cast<std::uint64_t>(width));
  w.put_bytes(images.data(), images.size());
  w.put_bytes(labels.data(), labels.size());
  return fnv1a(w.bytes().data(), w.bytes().size());
}

void LabeledDataset::validate() const {
  require(images.size() == labels.size() * image_size(), ErrorKind::format,
          "image bytes do not match the label count");
  for (auto l : labels)
    require(l < num_classes, ErrorKind::format,
            "label " + std::to_string(l) + " out of range");
}

IdxArray parse_idx(std::span<const std::uint8_t> bytes) {
  require(bytes.size() >= 4, ErrorKind::format, "IDX file shorter than its magic");
  const std::uint32_t magic = read_be32(bytes, 0);
  require(magic == 0x00000801 || magic == 0x00000803, ErrorKind::format,
          "unsupported IDX magic");
  const std::size_t rank = magic & 0xFF;
  require(bytes.size() >= 4 + 4 * rank, ErrorKind::format, "IDX header truncated");
  IdxArray a;
  std::size_t count = 1;
  for (std::size_t i = 0; i < rank; ++i) {
    a.dims.push_back(read_be32(bytes, 4 + 4 * i));
    count *= a.dims.back();
  }
  const std::size_t off = 4 + 4 * rank;
  require(bytes.size() - off == count, ErrorKind::format,
          "IDX payload size does not match its dimensions");
  a.data.assign(bytes.begin() + static_cast<std::ptrdiff_t>(off), bytes.end());
  return a;
}

IdxArray read_idx(const std::filesystem::path& path) {
  return parse_idx(read_file(path));
}

std::vector<std::uint8_t> encode_idx(const IdxArray& a) {
  require(a.dims.size() == 1 || a.dims.size() == 3, ErrorKind::dimension,
          "IDX arrays here have rank 1 or 3");
  std::vector<std::uint8_t> out = {0, 0, 0x08, static_cast<std::uint8_t>(a.dims.size())};
  for (auto d : a.dims)
    for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(d >> s));
  out.insert(out.end(), a.data.begin(), a.data.end());
  return out;
}

LabeledDataset load_idx(const std::filesystem::path& images,
                        const std::filesystem::path& labels,
                        const std::string& split) {
  auto im = read_idx(images);
  auto lb = read_idx(labels);
  require(im.dims.size() == 3, ErrorKind::format, "image IDX must have rank 3");
  require(lb.dims.size() == 1, ErrorKind::format, "label IDX must have rank 1");
  require(im.dims[0] == lb.dims[0], ErrorKind::format,
          "image and label counts differ");
  LabeledDataset ds;
  ds.height = im.dims[1];
  ds.width = im.dims[2];
  ds.images = std::move(im.data);
  ds.labels = std::move(lb.data);
  ds.split = split;
  ds.validate();
  return ds;
}

LabeledDataset load_mnist(const std::filesystem::path& dir, bool train) {
  const std::string p = train ? "train" : "t10k";
  return load_idx(dir / (p + "-images-idx3-ubyte"), dir / (p + "-labels-idx1-ubyte"),
                  train ? "train" : "test");
}

LabeledDataset parse_cifar10(std::span<const std::uint8_t> bytes,
                             const std::string& split) {
  require(bytes.size() % kCifarRecord == 0, ErrorKind::format,
          "CIFAR-10 data is not a whole number of records");
  LabeledDataset ds;
  ds.channels = 3;
  ds.height = 32;
  ds.width = 32;
  ds.split = split;
  const std::size_t n = bytes.size() / kCifarRecord;
  ds.labels.reserve(n);
  ds.images.reserve(n * 3072);
  for (std::size_t r = 0; r < n; ++r) {
    const auto* rec = bytes.data() + r * kCifarRecord;
    require(rec[0] < 10, ErrorKind::format, "CIFAR-10 label out of range");
    ds.labels.push_back(rec[0]);
    ds.images.insert(ds.images.end(), rec + 1, rec + kCifarRecord);
  }
  return ds;
}

LabeledDataset load_cifar10(const std::vector<std::filesystem::path>& files,
                            const std::string& split) {
  require(!files.empty(), ErrorKind::io, "no CIFAR-10 files given");
  LabeledDataset all;
  for (std::size_t i = 0; i < files.size(); ++i) {
    auto part = parse_cifar10(read_file(files[i]), split);
    if (i == 0) {
      all = std::move(part);
      continue;
    }
    all.images.insert(all.images.end(), part.images.begin(), part.images.end());
    all.labels.insert(all.labels.end(), part.labels.begin(), part.labels.end());
  }
  return all;
}

LabeledDataset synth(std::size_t num, std::size_t classes, std::uint64_t seed,
                     std::size_t side) {
  require(classes >= 2 && classes <= 256, ErrorKind::config,
          "synth needs 2..256 classes");
  require(side >= 4, ErrorKind::config, "synth canvas too small");
  LabeledDataset ds;
  ds.height = ds.width = side;
  ds.num_classes = classes;
  ds.split = "synth";
  ds.images.resize(num * side * side);
  ds.labels.resize(num);
  // Blob centers spread on a circle around the canvas center.
  const double mid = (static_cast<double>(side) - 1) / 2, radius = side / 3.5;
  const double sigma = side / 8.0;
  Rng rng(derive_seed(seed, {0x5e7d}));
  for (std::size_t i = 0; i < num; ++i) {
    const std::size_t k = i % classes;
    const double angle = 2 * 3.14159265358979323846 * static_cast<double>(k) /
                         static_cast<double>(classes);
    const double cx = mid + radius * std::cos(angle) + 0.5 * rng.normal();
    const double cy = mid + radius * std::sin(angle) + 0.5 * rng.normal();
    ds.labels[i] = static_cast<std::uint8_t>(k);
    auto* img = ds.images.data() + i * side * side;
    for (std::size_t y = 0; y < side; ++y) {
      for (std::size_t x = 0; x < side; ++x) {
        const double dx = static_cast<double>(x) - cx, dy = static_cast<double>(y) - cy;
        double v = 220.0 * std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma)) +
                   12.0 * rng.normal() + 20.0;
        img[y * side + x] = static_cast<std::uint8_t>(std::clamp(std::round(v), 0.0, 255.0));
      }
    }
  }
  return ds;
}

Normalization compute_normalization(const LabeledDataset& ds) {
  require(ds.size() > 0, ErrorKind::state, "cannot normalize an empty dataset");
  Normalization n;
  const std::size_t hw = ds.height * ds.width;
  for (std::size_t c = 0; c < ds.channels; ++c) {
    double sum = 0, sq = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const auto* p = ds.images.data() + i * ds.image_size() + c * hw;
      for (std::size_t k = 0; k < hw; ++k) {
        const double v = p[k] / 255.0;
        sum += v;
        sq += v * v;
      }
    }
    const double cnt = static_cast<double>(ds.size() * hw);
    const double mean = sum / cnt;
    const double var = std::max(sq / cnt - mean * mean, 0.0);
    n.mean.push_back(mean);
    n.stddev.push_back(var > 1e-12 ? std::sqrt(var) : 1.0);
  }
  return n;
}

AugmentDraw draw_augment(std::uint64_t seed, std::size_t pad) {
  Rng rng(seed);
  AugmentDraw d;
  d.dx = rng.below(2 * pad + 1);
  d.dy = rng.below(2 * pad + 1);
  d.flip = rng.below(2) == 1;
  return d;
}

void augment_image(std::span<double> image, std::size_t c, std::size_t h,
                   std::size_t w, const AugmentDraw& d, std::size_t pad) {
  require(image.size() == c * h * w, ErrorKind::dimension, "image size mismatch");
  require(d.dx <= 2 * pad && d.dy <= 2 * pad, ErrorKind::config,
          "crop offset outside the padded image");
  std::vector<double> src(image.begin(), image.end());
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        // Output (y,x) reads padded (y+dy, x+dx) = source (y+dy-pad, x+dx-pad).
        const auto sy = static_cast<std::ptrdiff_t>(y + d.dy) - static_cast<std::ptrdiff_t>(pad);
        const auto sx = static_cast<std::ptrdiff_t>(x + d.dx) - static_cast<std::ptrdiff_t>(pad);
        double v = 0.0;
        if (sy >= 0 && sx >= 0 && sy < static_cast<std::ptrdiff_t>(h) &&
            sx < static_cast<std::ptrdiff_t>(w))
          v = src[(ch * h + static_cast<std::size_t>(sy)) * w + static_cast<std::size_t>(sx)];
        const std::size_t ox = d.flip ? w - 1 - x : x;
        image[(ch * h + y) * w + ox] = v;
      }
    }
  }
}

void augment(Tensor& batch, std::span<const std::size_t> examples,
             std::uint64_t seed, std::size_t pad) {
  require(batch.rank() == 4 && batch.shape()[0] == examples.size(),
          ErrorKind::dimension, "augment expects an N x C x H x W batch");
  const auto& s = batch.shape();
  const std::size_t per = s[1] * s[2] * s[3];
  for (std::size_t n = 0; n < examples.size(); ++n) {
    const auto draw = draw_augment(derive_seed(seed, {examples[n]}), pad);
    augment_image(batch.span().subspan(n * per, per), s[1], s[2], s[3], draw, pad);
  }
}

Tensor make_batch(const LabeledDataset& ds, std::span<const std::size_t> examples,
                  const Normalization& norm) {
  require(norm.mean.size() == ds.channels && norm.stddev.size() == ds.channels,
          ErrorKind::dimension, "normalization does not match the channel count");
  Tensor t({examples.size(), ds.channels, ds.height, ds.width});
  const std::size_t hw = ds.height * ds.width, per = ds.image_size();
  for (std::size_t n = 0; n < examples.size(); ++n) {
    require(examples[n] < ds.size(), ErrorKind::dimension, "example index out of range");
    const auto* src = ds.images.data() + examples[n] * per;
    for (std::size_t c = 0; c < ds.channels; ++c)
      for (std::size_t k = 0; k < hw; ++k)
        t[n * per + c * hw + k] =
            (src[c * hw + k] / 255.0 - norm.mean[c]) / norm.stddev[c];
  }
  return t;
}

std::vector<int> batch_labels(const LabeledDataset& ds,
                              std::span<const std::size_t> examples) {
  std::vector<int> out;
  out.reserve(examples.size());
  for (auto i : examples) out.push_back(ds.labels.at(i));
  return out;
}

}  // namespace mest
