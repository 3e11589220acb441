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

// Report builders shared by the C API and the command line.

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mest/config.hpp"
#include "mest/footprint.hpp"
#include "mest/kernels.hpp"

namespace mest {

/// Input geometry and class count implied by a dataset config, without loading it.
struct InputGeometry {
  Shape input;  // C, H, W
  std::size_t classes = 10;
};
InputGeometry input_geometry(const DatasetConfig& cfg);

struct FootprintRow {
  FootprintMode mode = FootprintMode::dense;
  double weight_bits = 0;
  double gradient_bits = 0;
  double index_bits = 0;
  double total_bits = 0;
  double momentum_bits = 0;
};

/// Footprint of the configured model. Layers the plan keeps dense are always
/// counted in dense mode; the sparse layers use `mode` at their planned s.
FootprintRow footprint_row(const RunConfig& cfg, FootprintMode mode,
                           const FootprintParams& params);

/// which: "exact" or "approx" (the configured scheme) or "compare-all" (seven rows).
std::vector<FootprintRow> footprint_rows(const RunConfig& cfg, std::string_view which,
                                         FootprintParams params = {});
std::string footprint_table(const std::vector<FootprintRow>& rows);

struct BenchRequest {
  BenchLayer layer;
  BenchOptions options;
};
/// JSON: {"layer": "fig2" | {channels, filters, kernel, size, pad, batch},
///        "schemes": [...], "sparsities": [...], "repeats", "warmup",
///        "tune_budget", "seed"}. Omitted lists take the fig2 preset.
BenchRequest parse_bench_request(const std::string& json_text);

/// Per-threshold removal counts for one run directory, or a grid over the run
/// subdirectories of a sweep directory.
std::string forgetting_report(const std::filesystem::path& run_dir, std::optional<int> th);

std::string flops_text(const RunConfig& cfg, std::size_t train_size,
                       std::optional<std::size_t> compressed_size);

}  // namespace mest
