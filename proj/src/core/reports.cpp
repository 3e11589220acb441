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

#include "mest/reports.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "mest/error.hpp"
#include "mest/io.hpp"
#include "mest/trainer.hpp"

namespace mest {
namespace {

using json = nlohmann::json;

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::optional<std::filesystem::path> run_checkpoint(const std::filesystem::path& dir) {
  if (std::filesystem::is_regular_file(dir / "final.ckpt")) return dir / "final.ckpt";
  const auto sub = dir / "checkpoints";
  if (!std::filesystem::is_directory(sub)) return std::nullopt;
  std::vector<std::filesystem::path> found;
  for (const auto& e : std::filesystem::directory_iterator(sub))
    if (e.path().extension() == ".ckpt") found.push_back(e.path());
  if (found.empty()) return std::nullopt;
  return *std::max_element(found.begin(), found.end());  // zero-padded names
}

}  // namespace

InputGeometry input_geometry(const DatasetConfig& cfg) {
  if (cfg.kind == "synth") return {{1, cfg.synth_side, cfg.synth_side}, cfg.synth_classes};
  if (cfg.kind == "mnist") return {{1, 28, 28}, 10};
  if (cfg.kind == "cifar10") return {{3, 32, 32}, 10};
  throw Error(ErrorKind::config, "unknown dataset kind '" + cfg.kind + "'");
}

FootprintRow footprint_row(const RunConfig& cfg, FootprintMode mode,
                           const FootprintParams& params) {
  const auto geo = input_geometry(cfg.dataset);
  const Network net = build_model(cfg.model, geo.input, geo.classes, cfg.width);
  const SparsityPlan plan = plan_sparsity(net, cfg);
  std::vector<LayerDims> sparse, dense;
  std::vector<double> s;
  for (std::size_t n : net.weighted()) {
    const auto& l = net.layers()[n];
    const LayerDims d{l.weight_count(), l.weight_layout().filters};
    if (plan.schemes[n]) {
      sparse.push_back(d);
      s.push_back(plan.layer_s[n]);
    } else {
      dense.push_back(d);
    }
  }
  FootprintRow row;
  row.mode = mode;
  auto add = [&](const FootprintReport& r) {
    row.weight_bits += r.weight_bits;
    row.gradient_bits += r.gradient_bits;
    row.index_bits += r.index_bits;
    row.total_bits += r.total_bits;
    row.momentum_bits += r.momentum_bits;
  };
  if (!sparse.empty()) add(footprint_bits(sparse, mode, s, params));
  if (!dense.empty()) add(footprint_bits(dense, FootprintMode::dense, 0.0, params));
  return row;
}

std::vector<FootprintRow> footprint_rows(const RunConfig& cfg, std::string_view which,
                                         FootprintParams params) {
  if (which == "exact" || which == "approx") {
    params.exact = which == "exact";
    params.block_m = cfg.scheme.block_m;
    params.block_n = cfg.scheme.block_n;
    return {footprint_row(cfg, footprint_mode_for(cfg.scheme), params)};
  }
  require(which == "compare-all", ErrorKind::config,
          "footprint mode must be exact, approx or compare-all");
  std::vector<FootprintRow> rows;
  for (auto m : {FootprintMode::dense, FootprintMode::structured, FootprintMode::unstructured,
                 FootprintMode::pattern, FootprintMode::block,
                 FootprintMode::dense_pruning_at_init,
                 FootprintMode::dense_gradient_sparse_weight})
    rows.push_back(footprint_row(cfg, m, params));
  return rows;
}

std::string footprint_table(const std::vector<FootprintRow>& rows) {
  std::ostringstream os;
  os << "mode,weight_bits,gradient_bits,index_bits,total_bits,total_mb,momentum_bits\n";
  for (const auto& r : rows)
    os << to_string(r.mode) << ',' << fmt("%.17g", r.weight_bits) << ','
       << fmt("%.17g", r.gradient_bits) << ',' << fmt("%.17g", r.index_bits) << ','
       << fmt("%.17g", r.total_bits) << ',' << fmt("%.6f", r.total_bits / 8.0 / 1e6) << ','
       << fmt("%.17g", r.momentum_bits) << '\n';
  return os.str();
}

BenchRequest parse_bench_request(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::config, std::string("bench request: ") + e.what());
  }
  require(j.is_object(), ErrorKind::config, "bench request must be a JSON object");
  static const char* const keys[] = {"layer",  "schemes",     "sparsities", "repeats",
                                     "warmup", "tune_budget", "seed"};
  for (const auto& [k, v] : j.items())
    require(std::find(std::begin(keys), std::end(keys), k) != std::end(keys),
            ErrorKind::config, "unknown bench key '" + k + "'");
  BenchRequest r;
  r.layer = fig2_layer();
  r.options.schemes = fig2_schemes();
  r.options.sparsities = fig2_sparsities();
  try {
    if (j.contains("layer")) {
      const auto& L = j.at("layer");
      if (L.is_string()) {
        require(L.get<std::string>() == "fig2", ErrorKind::config,
                "layer preset must be fig2");
      } else {
        for (const auto& [k, v] : L.items()) {
          auto& f = k == "channels" ? r.layer.channels
                    : k == "filters" ? r.layer.filters
                    : k == "kernel"  ? r.layer.kernel
                    : k == "size"    ? r.layer.size
                    : k == "pad"     ? r.layer.pad
                    : k == "batch"   ? r.layer.batch
                                     : throw Error(ErrorKind::config,
                                                   "unknown layer key '" + k + "'");
          f = v.get<std::size_t>();
        }
      }
    }
    if (j.contains("schemes")) {
      r.options.schemes.clear();
      for (const auto& s : j.at("schemes"))
        r.options.schemes.push_back(parse_scheme(s.get<std::string>()));
    }
    if (j.contains("sparsities"))
      r.options.sparsities = j.at("sparsities").get<std::vector<double>>();
    if (j.contains("repeats")) r.options.repeats = j.at("repeats").get<std::size_t>();
    if (j.contains("warmup")) r.options.warmup = j.at("warmup").get<std::size_t>();
    if (j.contains("tune_budget"))
      r.options.tune_budget = j.at("tune_budget").get<std::size_t>();
    if (j.contains("seed")) r.options.seed = j.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::config, std::string("bench request: ") + e.what());
  }
  require(r.options.repeats >= 1, ErrorKind::config, "repeats must be at least 1");
  return r;
}

std::string forgetting_report(const std::filesystem::path& run_dir, std::optional<int> th) {
  require(std::filesystem::is_directory(run_dir), ErrorKind::config,
          "run directory '" + run_dir.string() + "' does not exist");
  std::ostringstream os;
  if (const auto ckpt = run_checkpoint(run_dir)) {
    const auto logs = read_checkpoint_logs(read_file(*ckpt));
    require(logs.flog.epochs() > 0, ErrorKind::config,
            "run recorded no forgetting statistics");
    int max_f = 0;
    for (const auto& e : logs.flog.stats()) max_f = std::max<int>(max_f, e.forgets);
    const std::size_t n = logs.flog.size();
    os << "th,removed,kept,removed_fraction\n";
    const int lo = th ? *th : -1, hi = th ? *th : max_f;
    for (int t = lo; t <= hi; ++t) {
      std::size_t removed = 0;
      for (const auto& e : logs.flog.stats())
        removed += e.ever_correct && static_cast<int>(e.forgets) <= t;
      os << t << ',' << removed << ',' << n - removed << ','
         << fmt("%.6f", static_cast<double>(removed) / static_cast<double>(n)) << '\n';
    }
    return os.str();
  }
  // Sweep: one row per run subdirectory.
  std::vector<std::filesystem::path> runs;
  for (const auto& e : std::filesystem::directory_iterator(run_dir))
    if (e.is_directory() && run_checkpoint(e.path())) runs.push_back(e.path());
  require(!runs.empty(), ErrorKind::config,
          "'" + run_dir.string() + "' holds no run checkpoints");
  std::sort(runs.begin(), runs.end());
  os << "run,th,e1,base_size,final_size,removed_fraction,final_test_acc\n";
  for (const auto& dir : runs) {
    const auto logs = read_checkpoint_logs(read_file(*run_checkpoint(dir)));
    if (th && logs.view.th != *th) continue;
    const double base = static_cast<double>(logs.view.base_size);
    const double acc = logs.metrics.empty() ? 0.0 : logs.metrics.back().test_acc;
    os << dir.filename().string() << ',' << logs.view.th << ',' << logs.view.e1 << ','
       << logs.view.base_size << ',' << logs.view.size() << ','
       << fmt("%.6f", 1.0 - static_cast<double>(logs.view.size()) / base) << ','
       << fmt("%.6f", acc) << '\n';
  }
  return os.str();
}

std::string flops_text(const RunConfig& cfg, std::size_t train_size,
                       std::optional<std::size_t> compressed_size) {
  const auto geo = input_geometry(cfg.dataset);
  const Network net = build_model(cfg.model, geo.input, geo.classes, cfg.width);
  const auto plan = plan_sparsity(net, cfg);
  return flops_csv(flops_report(cfg, net, plan, train_size, compressed_size));
}

}  // namespace mest
