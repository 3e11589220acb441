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

#include <cstdint>
#include <utility>
#include <vector>

#include "mest/io.hpp"
#include "mest/sparsity.hpp"
#include "mest/tensor.hpp"

namespace mest {

/// Scheme-specific compressed weight storage.
///
///  unstructured  CSR: row_index (F+1), one column index per nonzero.
///  pattern       row_index (F+1) counting kernels, one kernel index per
///                active kernel packing (channel * 8 + style), 4 values per
///                kernel in ascending tap order.
///  block(m,n)    row_index (F/m+1) counting blocks, one block-column index
///                per block, m*n values per block (row-major inside a block).
///  channel       no per-weight indices; the kept input channels are part of
///                the layer shape (kept_channels) and values are stored as a
///                dense F x kept x K x K array.
struct CompressedLayer {
  Scheme scheme;
  WeightLayout layout;
  unsigned value_bits = 32;
  unsigned index_bits = 8;
  std::vector<std::uint32_t> row_index;
  std::vector<std::uint32_t> indices;
  std::vector<double> values;
  std::vector<std::uint32_t> kept_channels;

  std::size_t nnz() const noexcept { return values.size(); }
  std::size_t index_count() const noexcept {
    return row_index.size() + indices.size();
  }
  /// Bits for values plus index arrays.
  std::uint64_t payload_bits() const noexcept {
    return static_cast<std::uint64_t>(values.size()) * value_bits +
           static_cast<std::uint64_t>(index_count()) * index_bits;
  }

  friend bool operator==(const CompressedLayer&, const CompressedLayer&) = default;
};

/// Flat weight positions of the stored values, in storage order.
std::vector<std::size_t> value_positions(const CompressedLayer& cl);

/// Encodes the masked weights. W must be zero outside the mask and every
/// value must be exactly representable in `value_bits` (32 or 64); index
/// widths are 8, 16 or 32 bits.
CompressedLayer encode(const Tensor& weights, const Mask& mask,
                       unsigned value_bits = 32, unsigned index_bits = 8);

/// Inverse of encode. The tensor has shape (F, Ch, K, K).
std::pair<Tensor, Mask> decode(const CompressedLayer& cl);

/// A layer sharing `topology`'s index arrays with values gathered from a
/// dense tensor (used for gradients and momentum buffers).
CompressedLayer with_values(const CompressedLayer& topology,
                            const Tensor& dense);

/// Scatters stored values into a dense (F, Ch, K, K) tensor.
Tensor to_dense(const CompressedLayer& cl);

void serialize(const CompressedLayer& cl, ByteWriter& out);
CompressedLayer deserialize_compressed(ByteReader& in);

}  // namespace mest
