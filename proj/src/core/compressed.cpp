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

#include "mest/compressed.hpp"

#include <cmath>
#include <string>

namespace mest {
namespace {

void check_widths(unsigned value_bits, unsigned index_bits) {
  require(value_bits == 32 || value_bits == 64, ErrorKind::encoding,
          "value width must be 32 or 64 bits, got " + std::to_string(value_bits));
  require(index_bits == 8 || index_bits == 16 || index_bits == 32,
          ErrorKind::encoding,
          "index width must be 8, 16 or 32 bits, got " + std::to_string(index_bits));
}

void check_index(std::uint64_t v, unsigned bits, const char* what) {
  if (bits >= 64) return;
  require(v < (std::uint64_t{1} << bits), ErrorKind::encoding,
          std::string(what) + " " + std::to_string(v) + " overflows " +
              std::to_string(bits) + "-bit indices");
}

void push_value(std::vector<double>& out, double v, unsigned bits) {
  if (bits == 32)
    require(static_cast<double>(static_cast<float>(v)) == v || std::isnan(v),
            ErrorKind::encoding, "value not representable in 32 bits");
  out.push_back(v);
}

}  // namespace

std::vector<std::size_t> value_positions(const CompressedLayer& cl) {
  const WeightLayout& L = cl.layout;
  const std::size_t cols = L.cols();
  const std::size_t ka = L.kernel_area();
  std::vector<std::size_t> pos;
  pos.reserve(cl.values.size());
  switch (cl.scheme.kind) {
    case SchemeKind::unstructured:
      for (std::size_t r = 0; r + 1 < cl.row_index.size(); ++r)
        for (std::uint32_t k = cl.row_index[r]; k < cl.row_index[r + 1]; ++k)
          pos.push_back(r * cols + cl.indices[k]);
      break;
    case SchemeKind::pattern:
      for (std::size_t r = 0; r + 1 < cl.row_index.size(); ++r)
        for (std::uint32_t k = cl.row_index[r]; k < cl.row_index[r + 1]; ++k) {
          const std::size_t c = cl.indices[k] / kPatternStyles;
          const std::size_t style = cl.indices[k] % kPatternStyles;
          for (auto tap : pattern_styles()[style])
            pos.push_back(r * cols + c * ka + tap);
        }
      break;
    case SchemeKind::block: {
      const std::size_t m = cl.scheme.block_m, n = cl.scheme.block_n;
      for (std::size_t br = 0; br + 1 < cl.row_index.size(); ++br)
        for (std::uint32_t k = cl.row_index[br]; k < cl.row_index[br + 1]; ++k)
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j)
              pos.push_back((br * m + i) * cols + cl.indices[k] * n + j);
      break;
    }
    case SchemeKind::channel:
      for (std::size_t f = 0; f < L.filters; ++f)
        for (auto c : cl.kept_channels)
          for (std::size_t t = 0; t < ka; ++t)
            pos.push_back(f * cols + c * ka + t);
      break;
  }
  return pos;
}

CompressedLayer encode(const Tensor& weights, const Mask& mask,
                       unsigned value_bits, unsigned index_bits) {
  check_widths(value_bits, index_bits);
  const WeightLayout& L = mask.layout();
  require(weights.size() == L.size(), ErrorKind::dimension,
          "weights do not match mask layout");
  mask.check_invariants();
  for (std::size_t i = 0; i < weights.size(); ++i)
    require(mask.test(i) || weights[i] == 0.0, ErrorKind::encoding,
            "nonzero weight outside the mask at position " + std::to_string(i));

  CompressedLayer cl;
  cl.scheme = mask.scheme();
  cl.layout = L;
  cl.value_bits = value_bits;
  cl.index_bits = index_bits;
  const std::size_t cols = L.cols();
  const std::size_t ka = L.kernel_area();

  switch (cl.scheme.kind) {
    case SchemeKind::unstructured:
      cl.row_index.push_back(0);
      for (std::size_t r = 0; r < L.filters; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
          if (!mask.test(r * cols + c)) continue;
          check_index(c, index_bits, "column index");
          cl.indices.push_back(static_cast<std::uint32_t>(c));
          push_value(cl.values, weights[r * cols + c], value_bits);
        }
        cl.row_index.push_back(static_cast<std::uint32_t>(cl.indices.size()));
      }
      break;
    case SchemeKind::pattern:
      cl.row_index.push_back(0);
      for (std::size_t r = 0; r < L.filters; ++r) {
        for (std::size_t c = 0; c < L.channels; ++c) {
          const int style = mask.kernel_style(r, c);
          if (style < 0) continue;
          const std::uint64_t packed = c * kPatternStyles + static_cast<std::size_t>(style);
          check_index(packed, index_bits, "kernel index");
          cl.indices.push_back(static_cast<std::uint32_t>(packed));
          for (auto tap : pattern_styles()[static_cast<std::size_t>(style)])
            push_value(cl.values, weights[r * cols + c * ka + tap], value_bits);
        }
        cl.row_index.push_back(static_cast<std::uint32_t>(cl.indices.size()));
      }
      break;
    case SchemeKind::block: {
      const std::size_t m = cl.scheme.block_m, n = cl.scheme.block_n;
      cl.row_index.push_back(0);
      for (std::size_t br = 0; br < L.filters / m; ++br) {
        for (std::size_t bc = 0; bc < cols / n; ++bc) {
          if (!mask.block_active(br, bc)) continue;
          check_index(bc, index_bits, "block index");
          cl.indices.push_back(static_cast<std::uint32_t>(bc));
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j)
              push_value(cl.values, weights[(br * m + i) * cols + bc * n + j],
                         value_bits);
        }
        cl.row_index.push_back(static_cast<std::uint32_t>(cl.indices.size()));
      }
      break;
    }
    case SchemeKind::channel:
      for (std::size_t c = 0; c < L.channels; ++c)
        if (mask.channel_active(c))
          cl.kept_channels.push_back(static_cast<std::uint32_t>(c));
      for (std::size_t f = 0; f < L.filters; ++f)
        for (auto c : cl.kept_channels)
          for (std::size_t t = 0; t < ka; ++t)
            push_value(cl.values, weights[f * cols + c * ka + t], value_bits);
      break;
  }
  for (auto v : cl.row_index) check_index(v, index_bits, "row index");
  return cl;
}

Tensor to_dense(const CompressedLayer& cl) {
  const WeightLayout& L = cl.layout;
  Tensor w({L.filters, L.channels, L.kernel, L.kernel});
  const auto pos = value_positions(cl);
  require(pos.size() == cl.values.size(), ErrorKind::format,
          "compressed layer value count does not match its index arrays");
  for (std::size_t i = 0; i < pos.size(); ++i) w[pos[i]] = cl.values[i];
  return w;
}

std::pair<Tensor, Mask> decode(const CompressedLayer& cl) {
  Tensor w = to_dense(cl);
  Mask mask(cl.layout, cl.scheme);
  for (auto p : value_positions(cl)) mask.set(p, true);
  return {std::move(w), std::move(mask)};
}

CompressedLayer with_values(const CompressedLayer& topology,
                            const Tensor& dense) {
  require(dense.size() == topology.layout.size(), ErrorKind::dimension,
          "dense tensor does not match compressed layout");
  CompressedLayer out = topology;
  const auto pos = value_positions(topology);
  for (std::size_t i = 0; i < pos.size(); ++i) out.values[i] = dense[pos[i]];
  return out;
}

void serialize(const CompressedLayer& cl, ByteWriter& out) {
  out.put(static_cast<std::uint8_t>(cl.scheme.kind));
  out.put(static_cast<std::uint8_t>(cl.value_bits));
  out.put(static_cast<std::uint8_t>(cl.index_bits));
  out.put(static_cast<std::uint32_t>(cl.layout.filters));
  out.put(static_cast<std::uint32_t>(cl.layout.channels));
  out.put(static_cast<std::uint32_t>(cl.layout.kernel));
  out.put(static_cast<std::uint32_t>(cl.layout.kernel));
  out.put(static_cast<std::uint32_t>(cl.values.size()));
  // Scheme parameters that the fixed header cannot carry.
  if (cl.scheme.kind == SchemeKind::block) {
    out.put(static_cast<std::uint8_t>(cl.scheme.block_m));
    out.put(static_cast<std::uint8_t>(cl.scheme.block_n));
  } else if (cl.scheme.kind == SchemeKind::channel) {
    out.put(static_cast<std::uint32_t>(cl.kept_channels.size()));
    for (auto c : cl.kept_channels) out.put(c);
  }
  for (auto v : cl.row_index) out.put_uint(v, cl.index_bits);
  for (auto v : cl.indices) out.put_uint(v, cl.index_bits);
  for (auto v : cl.values) {
    if (cl.value_bits == 32)
      out.put(static_cast<float>(v));
    else
      out.put(v);
  }
}

CompressedLayer deserialize_compressed(ByteReader& in) {
  CompressedLayer cl;
  const auto tag = in.get<std::uint8_t>();
  require(tag <= 3, ErrorKind::format, "unknown scheme tag");
  cl.scheme.kind = static_cast<SchemeKind>(tag);
  cl.value_bits = in.get<std::uint8_t>();
  cl.index_bits = in.get<std::uint8_t>();
  require(cl.value_bits == 32 || cl.value_bits == 64, ErrorKind::format,
          "bad value width");
  require(cl.index_bits == 8 || cl.index_bits == 16 || cl.index_bits == 32,
          ErrorKind::format, "bad index width");
  cl.layout.filters = in.get<std::uint32_t>();
  cl.layout.channels = in.get<std::uint32_t>();
  cl.layout.kernel = in.get<std::uint32_t>();
  require(in.get<std::uint32_t>() == cl.layout.kernel, ErrorKind::format,
          "non-square kernels are not supported");
  const std::size_t nnz = in.get<std::uint32_t>();
  require(nnz <= cl.layout.size(), ErrorKind::format, "nnz exceeds layer size");

  std::size_t rows = cl.layout.filters;
  std::size_t unit = 1;
  switch (cl.scheme.kind) {
    case SchemeKind::unstructured: break;
    case SchemeKind::pattern: unit = kPatternEntries; break;
    case SchemeKind::block:
      cl.scheme.block_m = in.get<std::uint8_t>();
      cl.scheme.block_n = in.get<std::uint8_t>();
      require(cl.scheme.block_m > 0 && cl.scheme.block_n > 0 &&
                  cl.layout.filters % cl.scheme.block_m == 0,
              ErrorKind::format, "bad block dims");
      rows = cl.layout.filters / cl.scheme.block_m;
      unit = cl.scheme.block_size();
      break;
    case SchemeKind::channel: {
      const auto kept = in.get<std::uint32_t>();
      require(kept <= cl.layout.channels, ErrorKind::format, "bad channel count");
      for (std::uint32_t i = 0; i < kept; ++i) {
        cl.kept_channels.push_back(in.get<std::uint32_t>());
        require(cl.kept_channels.back() < cl.layout.channels,
                ErrorKind::format, "channel id out of range");
      }
      rows = 0;
      break;
    }
  }
  if (rows) {
    cl.row_index.resize(rows + 1);
    for (auto& v : cl.row_index)
      v = static_cast<std::uint32_t>(in.get_uint(cl.index_bits));
    require(nnz % unit == 0 && cl.row_index.back() == nnz / unit,
            ErrorKind::format, "row index does not match nnz");
    cl.indices.resize(nnz / unit);
    for (auto& v : cl.indices)
      v = static_cast<std::uint32_t>(in.get_uint(cl.index_bits));
  }
  cl.values.resize(nnz);
  for (auto& v : cl.values)
    v = cl.value_bits == 32 ? static_cast<double>(in.get<float>())
                            : in.get<double>();
  std::size_t index_limit = cl.layout.cols();
  if (cl.scheme.kind == SchemeKind::pattern)
    index_limit = cl.layout.channels * kPatternStyles;
  else if (cl.scheme.kind == SchemeKind::block)
    index_limit = cl.layout.cols() / cl.scheme.block_n;
  for (auto v : cl.indices)
    require(v < index_limit, ErrorKind::format, "index out of range");
  for (std::size_t r = 0; r + 1 < cl.row_index.size(); ++r)
    require(cl.row_index[r] <= cl.row_index[r + 1], ErrorKind::format,
            "row index not monotone");
  const auto pos = value_positions(cl);
  require(pos.size() == nnz, ErrorKind::format, "index arrays inconsistent with nnz");
  for (auto p : pos)
    require(p < cl.layout.size(), ErrorKind::format, "coordinate out of range");
  return cl;
}

}  // namespace mest
