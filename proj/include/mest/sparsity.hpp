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

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "mest/error.hpp"
#include "mest/rng.hpp"

namespace mest {

enum class SchemeKind : std::uint8_t {
  unstructured = 0,
  channel = 1,
  block = 2,
  pattern = 3,
};

/// Weight-sparsity scheme. Block size (m, n) spans m filter rows by n
/// columns of the GEMM-view weight matrix.
struct Scheme {
  SchemeKind kind = SchemeKind::unstructured;
  std::uint32_t block_m = 4;
  std::uint32_t block_n = 1;

  static Scheme unstructured() { return {SchemeKind::unstructured, 4, 1}; }
  static Scheme channel() { return {SchemeKind::channel, 4, 1}; }
  static Scheme block(std::uint32_t m = 4, std::uint32_t n = 1) {
    return {SchemeKind::block, m, n};
  }
  static Scheme pattern() { return {SchemeKind::pattern, 4, 1}; }

  std::uint32_t block_size() const { return block_m * block_n; }

  friend bool operator==(const Scheme& a, const Scheme& b) {
    if (a.kind != b.kind) return false;
    return a.kind != SchemeKind::block ||
           (a.block_m == b.block_m && a.block_n == b.block_n);
  }
};

std::string to_string(const Scheme& scheme);
/// Accepts "unstructured", "channel", "pattern", "block" and "block(m,n)".
Scheme parse_scheme(std::string_view text);

/// GEMM view of a layer's weights: `filters` rows, `channels * kernel^2`
/// columns. Fully connected layers use kernel = 1.
struct WeightLayout {
  std::size_t filters = 0;
  std::size_t channels = 0;
  std::size_t kernel = 1;

  std::size_t kernel_area() const { return kernel * kernel; }
  std::size_t cols() const { return channels * kernel * kernel; }
  std::size_t size() const { return filters * cols(); }

  friend bool operator==(const WeightLayout&, const WeightLayout&) = default;
};

// 4-entry, 8-style kernel patterns over a 3x3 kernel. Style k keeps the
// centre plus three consecutive cells of the clockwise border ring starting
// at ring[k]. Taps are flat kernel offsets sorted ascending.
inline constexpr std::size_t kPatternEntries = 4;
inline constexpr std::size_t kPatternStyles = 8;
inline constexpr std::array<std::uint8_t, 8> kPatternRing = {0, 1, 2, 5,
                                                             8, 7, 6, 3};
const std::array<std::array<std::uint8_t, 4>, kPatternStyles>& pattern_styles();
/// Style id whose taps equal the set bits of a 9-cell kernel, or -1.
int match_pattern_style(const std::uint8_t* kernel_bits);

std::size_t round_half_up(double x);

/// Smallest sparsity the pattern scheme can express (4 of 9 taps kept).
inline constexpr double kPatternMinSparsity = 5.0 / 9.0;

/// Checks that `s` is reachable for the scheme on this layout.
void check_feasible(const WeightLayout& layout, const Scheme& scheme, double s);

/// Number of selectable units for the scheme: weights, input channels,
/// blocks, or (pattern) kernels per filter.
std::size_t unit_count(const WeightLayout& layout, const Scheme& scheme);
/// Weights covered by one unit.
std::size_t unit_size(const WeightLayout& layout, const Scheme& scheme);
/// Kept units at sparsity s (pattern: kept kernels per filter).
std::size_t kept_units(const WeightLayout& layout, const Scheme& scheme,
                       double s);
/// Nonzero weight count a mask of sparsity s must have.
std::size_t target_nnz(const WeightLayout& layout, const Scheme& scheme,
                       double s);

/// Binary topology over a layer's weights.
class Mask {
 public:
  Mask() = default;
  Mask(WeightLayout layout, Scheme scheme, bool all_on = false);

  const WeightLayout& layout() const noexcept { return layout_; }
  const Scheme& scheme() const noexcept { return scheme_; }
  std::size_t size() const noexcept { return bits_.size(); }
  bool test(std::size_t i) const { return bits_[i] != 0; }
  void set(std::size_t i, bool on) { bits_[i] = on ? 1 : 0; }
  const std::vector<std::uint8_t>& bits() const noexcept { return bits_; }
  std::vector<std::uint8_t>& bits() noexcept { return bits_; }

  std::size_t nnz() const;
  double sparsity() const;

  // Unit accessors for structured schemes.
  bool channel_active(std::size_t c) const;
  bool block_active(std::size_t block_row, std::size_t block_col) const;
  bool kernel_active(std::size_t f, std::size_t c) const;
  /// Pattern style of an active kernel, -1 for an empty kernel.
  int kernel_style(std::size_t f, std::size_t c) const;

  void set_channel(std::size_t c, bool on);
  void set_block(std::size_t block_row, std::size_t block_col, bool on);
  void set_kernel(std::size_t f, std::size_t c, int style);  // -1 clears

  /// Throws feasibility error if the bits violate the scheme's granularity.
  void check_invariants() const;

  friend bool operator==(const Mask&, const Mask&) = default;

 private:
  WeightLayout layout_;
  Scheme scheme_;
  std::vector<std::uint8_t> bits_;
};

/// Uniform random mask at sparsity s, rounded half-up at scheme granularity.
Mask random_mask(const WeightLayout& layout, const Scheme& scheme, double s,
                 std::uint64_t seed);

}  // namespace mest
