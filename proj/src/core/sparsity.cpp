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

#include "mest/sparsity.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace mest {

std::string to_string(const Scheme& scheme) {
  switch (scheme.kind) {
    case SchemeKind::unstructured: return "unstructured";
    case SchemeKind::channel: return "channel";
    case SchemeKind::pattern: return "pattern";
    case SchemeKind::block:
      return "block(" + std::to_string(scheme.block_m) + "," +
             std::to_string(scheme.block_n) + ")";
  }
  return "?";
}

Scheme parse_scheme(std::string_view text) {
  if (text == "unstructured") return Scheme::unstructured();
  if (text == "channel" || text == "structured") return Scheme::channel();
  if (text == "pattern") return Scheme::pattern();
  if (text == "block") return Scheme::block();
  if (text.starts_with("block(") && text.ends_with(")")) {
    unsigned m = 0, n = 0;
    const std::string inner(text.substr(6, text.size() - 7));
    if (std::sscanf(inner.c_str(), "%u,%u", &m, &n) == 2 && m > 0 && n > 0)
      return Scheme::block(m, n);
  }
  fail(ErrorKind::config, "unknown sparsity scheme '" + std::string(text) + "'");
}

const std::array<std::array<std::uint8_t, 4>, kPatternStyles>&
pattern_styles() {
  static const auto styles = [] {
    std::array<std::array<std::uint8_t, 4>, kPatternStyles> out{};
    for (std::size_t k = 0; k < kPatternStyles; ++k) {
      std::array<std::uint8_t, 4> taps = {4, kPatternRing[k],
                                          kPatternRing[(k + 1) % 8],
                                          kPatternRing[(k + 2) % 8]};
      std::sort(taps.begin(), taps.end());
      out[k] = taps;
    }
    return out;
  }();
  return styles;
}

int match_pattern_style(const std::uint8_t* kernel_bits) {
  for (std::size_t k = 0; k < kPatternStyles; ++k) {
    const auto& taps = pattern_styles()[k];
    std::size_t hits = 0, on = 0;
    for (std::size_t t = 0; t < 9; ++t) {
      if (!kernel_bits[t]) continue;
      ++on;
      if (std::find(taps.begin(), taps.end(), t) != taps.end()) ++hits;
    }
    if (on == kPatternEntries && hits == kPatternEntries)
      return static_cast<int>(k);
  }
  return -1;
}

std::size_t round_half_up(double x) {
  // The epsilon absorbs representation error in products like (1-0.9)*1000.
  const double r = std::floor(x + 0.5 + 1e-9);
  return r <= 0.0 ? 0 : static_cast<std::size_t>(r);
}

void check_feasible(const WeightLayout& layout, const Scheme& scheme,
                    double s) {
  require(std::isfinite(s) && s >= 0.0 && s < 1.0, ErrorKind::feasibility,
          "sparsity " + std::to_string(s) + " outside [0,1)");
  require(layout.size() > 0, ErrorKind::feasibility, "empty weight layout");
  switch (scheme.kind) {
    case SchemeKind::unstructured:
    case SchemeKind::channel:
      break;
    case SchemeKind::block:
      require(scheme.block_m >= 1 && scheme.block_n >= 1,
              ErrorKind::feasibility, "block dims must be >= 1");
      require(layout.filters % scheme.block_m == 0 &&
                  layout.cols() % scheme.block_n == 0,
              ErrorKind::feasibility,
              to_string(scheme) + " does not tile a " +
                  std::to_string(layout.filters) + "x" +
                  std::to_string(layout.cols()) + " weight matrix");
      break;
    case SchemeKind::pattern:
      require(layout.kernel == 3, ErrorKind::feasibility,
              "pattern sparsity applies only to 3x3 convolutions");
      require(s >= kPatternMinSparsity - 1e-12, ErrorKind::feasibility,
              "pattern sparsity must be at least 5/9 (55.6%), got " +
                  std::to_string(s));
      break;
  }
}

std::size_t unit_count(const WeightLayout& layout, const Scheme& scheme) {
  switch (scheme.kind) {
    case SchemeKind::unstructured: return layout.size();
    case SchemeKind::channel: return layout.channels;
    case SchemeKind::block:
      return (layout.filters / scheme.block_m) *
             (layout.cols() / scheme.block_n);
    case SchemeKind::pattern: return layout.channels;
  }
  return 0;
}

std::size_t unit_size(const WeightLayout& layout, const Scheme& scheme) {
  switch (scheme.kind) {
    case SchemeKind::unstructured: return 1;
    case SchemeKind::channel: return layout.filters * layout.kernel_area();
    case SchemeKind::block: return scheme.block_size();
    case SchemeKind::pattern: return kPatternEntries;
  }
  return 0;
}

std::size_t kept_units(const WeightLayout& layout, const Scheme& scheme,
                       double s) {
  check_feasible(layout, scheme, s);
  if (scheme.kind == SchemeKind::pattern) {
    // Kernel pattern fixes 4/9 density; connectivity supplies the rest.
    const double kernel_fraction = 9.0 * (1.0 - s) / 4.0;
    return std::min(layout.channels,
                    round_half_up(kernel_fraction *
                                  static_cast<double>(layout.channels)));
  }
  const std::size_t units = unit_count(layout, scheme);
  return std::min(units,
                  round_half_up((1.0 - s) * static_cast<double>(units)));
}

std::size_t target_nnz(const WeightLayout& layout, const Scheme& scheme,
                       double s) {
  const std::size_t kept = kept_units(layout, scheme, s);
  if (scheme.kind == SchemeKind::pattern)
    return layout.filters * kept * kPatternEntries;
  return kept * unit_size(layout, scheme);
}

Mask::Mask(WeightLayout layout, Scheme scheme, bool all_on)
    : layout_(layout), scheme_(scheme), bits_(layout.size(), all_on ? 1 : 0) {}

std::size_t Mask::nnz() const {
  return static_cast<std::size_t>(
      std::count_if(bits_.begin(), bits_.end(), [](auto b) { return b != 0; }));
}

double Mask::sparsity() const {
  if (bits_.empty()) return 0.0;
  return 1.0 - static_cast<double>(nnz()) / static_cast<double>(bits_.size());
}

bool Mask::channel_active(std::size_t c) const {
  const std::size_t ka = layout_.kernel_area();
  return bits_[c * ka] != 0;
}

bool Mask::block_active(std::size_t block_row, std::size_t block_col) const {
  const std::size_t r = block_row * scheme_.block_m;
  const std::size_t col = block_col * scheme_.block_n;
  return bits_[r * layout_.cols() + col] != 0;
}

bool Mask::kernel_active(std::size_t f, std::size_t c) const {
  const std::size_t ka = layout_.kernel_area();
  const std::size_t base = f * layout_.cols() + c * ka;
  for (std::size_t t = 0; t < ka; ++t)
    if (bits_[base + t]) return true;
  return false;
}

int Mask::kernel_style(std::size_t f, std::size_t c) const {
  const std::size_t base = f * layout_.cols() + c * layout_.kernel_area();
  if (!kernel_active(f, c)) return -1;
  return match_pattern_style(&bits_[base]);
}

void Mask::set_channel(std::size_t c, bool on) {
  const std::size_t ka = layout_.kernel_area();
  for (std::size_t f = 0; f < layout_.filters; ++f)
    for (std::size_t t = 0; t < ka; ++t)
      bits_[f * layout_.cols() + c * ka + t] = on ? 1 : 0;
}

void Mask::set_block(std::size_t block_row, std::size_t block_col, bool on) {
  for (std::size_t i = 0; i < scheme_.block_m; ++i)
    for (std::size_t j = 0; j < scheme_.block_n; ++j)
      bits_[(block_row * scheme_.block_m + i) * layout_.cols() +
            block_col * scheme_.block_n + j] = on ? 1 : 0;
}

void Mask::set_kernel(std::size_t f, std::size_t c, int style) {
  const std::size_t base = f * layout_.cols() + c * layout_.kernel_area();
  for (std::size_t t = 0; t < layout_.kernel_area(); ++t) bits_[base + t] = 0;
  if (style < 0) return;
  for (auto tap : pattern_styles()[static_cast<std::size_t>(style)])
    bits_[base + tap] = 1;
}

void Mask::check_invariants() const {
  require(bits_.size() == layout_.size(), ErrorKind::dimension,
          "mask size does not match its layout");
  const std::size_t cols = layout_.cols();
  const std::size_t ka = layout_.kernel_area();
  switch (scheme_.kind) {
    case SchemeKind::unstructured:
      return;
    case SchemeKind::channel:
      for (std::size_t c = 0; c < layout_.channels; ++c) {
        const bool on = channel_active(c);
        for (std::size_t f = 0; f < layout_.filters; ++f)
          for (std::size_t t = 0; t < ka; ++t)
            require((bits_[f * cols + c * ka + t] != 0) == on,
                    ErrorKind::feasibility,
                    "channel mask has a partially active channel");
      }
      return;
    case SchemeKind::block: {
      const std::size_t br = layout_.filters / scheme_.block_m;
      const std::size_t bc = cols / scheme_.block_n;
      for (std::size_t i = 0; i < br; ++i)
        for (std::size_t j = 0; j < bc; ++j) {
          const bool on = block_active(i, j);
          for (std::size_t a = 0; a < scheme_.block_m; ++a)
            for (std::size_t b = 0; b < scheme_.block_n; ++b)
              require((bits_[(i * scheme_.block_m + a) * cols +
                             j * scheme_.block_n + b] != 0) == on,
                      ErrorKind::feasibility,
                      "block mask has a partially active block");
        }
      return;
    }
    case SchemeKind::pattern: {
      std::size_t per_filter = 0;
      for (std::size_t f = 0; f < layout_.filters; ++f) {
        std::size_t active = 0;
        for (std::size_t c = 0; c < layout_.channels; ++c) {
          if (!kernel_active(f, c)) continue;
          require(kernel_style(f, c) >= 0, ErrorKind::feasibility,
                  "pattern mask kernel is not a registered 4-entry style");
          ++active;
        }
        if (f == 0) per_filter = active;
        require(active == per_filter, ErrorKind::feasibility,
                "pattern mask filters keep different kernel counts");
      }
      return;
    }
  }
}

Mask random_mask(const WeightLayout& layout, const Scheme& scheme, double s,
                 std::uint64_t seed) {
  const std::size_t keep = kept_units(layout, scheme, s);
  Rng rng(seed);
  Mask mask(layout, scheme);
  if (scheme.kind == SchemeKind::pattern) {
    std::vector<std::size_t> channels(layout.channels);
    for (std::size_t f = 0; f < layout.filters; ++f) {
      std::iota(channels.begin(), channels.end(), std::size_t{0});
      rng.shuffle(channels);
      for (std::size_t i = 0; i < keep; ++i)
        mask.set_kernel(f, channels[i],
                        static_cast<int>(rng.below(kPatternStyles)));
    }
    return mask;
  }
  const std::size_t units = unit_count(layout, scheme);
  std::vector<std::size_t> order(units);
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(order);
  const std::size_t block_cols =
      scheme.kind == SchemeKind::block ? layout.cols() / scheme.block_n : 1;
  for (std::size_t i = 0; i < keep; ++i) {
    const std::size_t u = order[i];
    switch (scheme.kind) {
      case SchemeKind::unstructured: mask.set(u, true); break;
      case SchemeKind::channel: mask.set_channel(u, true); break;
      case SchemeKind::block:
        mask.set_block(u / block_cols, u % block_cols, true);
        break;
      case SchemeKind::pattern: break;
    }
  }
  return mask;
}

}  // namespace mest
