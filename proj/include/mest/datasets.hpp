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
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mest/tensor.hpp"

namespace mest {

struct LabeledDataset {
  std::size_t channels = 1;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t num_classes = 10;
  std::vector<std::uint8_t> images;  // N x C x H x W
  std::vector<std::uint8_t> labels;
  std::string split;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t image_size() const noexcept { return channels * height * width; }
  /// FNV-1a over dimensions, pixels and labels.
  std::uint64_t checksum() const;
  /// Throws a format error when images and labels disagree.
  void validate() const;
};

struct IdxArray {
  std::vector<std::size_t> dims;
  std::vector<std::uint8_t> data;
};

/// Unsigned-byte IDX file (magic 0x00000801 or 0x00000803, big-endian dims).
IdxArray read_idx(const std::filesystem::path& path);
IdxArray parse_idx(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_idx(const IdxArray& array);

/// Pairs an image file with a label file.
LabeledDataset load_idx(const std::filesystem::path& images,
                        const std::filesystem::path& labels,
                        const std::string& split);
/// train-* or t10k-* files from an MNIST directory.
LabeledDataset load_mnist(const std::filesystem::path& dir, bool train);

/// CIFAR-10 binary batches: 3073-byte records, label first.
LabeledDataset load_cifar10(const std::vector<std::filesystem::path>& files,
                            const std::string& split);
LabeledDataset parse_cifar10(std::span<const std::uint8_t> bytes,
                             const std::string& split);

/// Class-balanced Gaussian blobs on a 1 x side x side canvas. Each class has
/// its own blob center, so the classes are separable.
LabeledDataset synth(std::size_t num, std::size_t classes, std::uint64_t seed,
                     std::size_t side = 12);

struct Normalization {
  std::vector<double> mean;  // per channel, in [0,1] pixel units
  std::vector<double> stddev;

  friend bool operator==(const Normalization&, const Normalization&) = default;
};

Normalization compute_normalization(const LabeledDataset& ds);

struct AugmentDraw {
  std::size_t dx = 4;  // crop offset into the padded image, in [0, 2 pad]
  std::size_t dy = 4;
  bool flip = false;
};

/// Random pad-and-crop offsets plus a coin-flip mirror, from `seed`.
AugmentDraw draw_augment(std::uint64_t seed, std::size_t pad = 4);

/// Applies a crop/flip to one C x H x W image in place (zero padding).
void augment_image(std::span<double> image, std::size_t c, std::size_t h,
                   std::size_t w, const AugmentDraw& draw, std::size_t pad = 4);

/// Applies per-example draws seeded by derive_seed(seed, {example}).
void augment(Tensor& batch, std::span<const std::size_t> examples,
             std::uint64_t seed, std::size_t pad = 4);

/// Normalized N x C x H x W batch of the given examples.
Tensor make_batch(const LabeledDataset& ds, std::span<const std::size_t> examples,
                  const Normalization& norm);
std::vector<int> batch_labels(const LabeledDataset& ds,
                              std::span<const std::size_t> examples);

}  // namespace mest
