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

#include <doctest.h>

#include <filesystem>
#include <sstream>

#include "mest/io.hpp"
#include "mest/reports.hpp"
#include "mest/trainer.hpp"
#include "test_util.hpp"

using namespace mest;
using mest::testing::error_kind_of;

namespace {

std::size_t count_lines(const std::string& s) {
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

RunConfig synth_cfg() {
  RunConfig c;
  c.dataset.synth_train = 64;
  c.dataset.synth_test = 32;
  c.dataset.synth_side = 8;
  c.overall_s = 0.8;
  c.epochs = 3;
  c.batch_size = 16;
  c.mutation.mode = MutationMode::none;
  c.mutation.end = c.epochs;
  return c;
}

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("mest_reports_" + name);
  std::filesystem::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("input geometry follows the dataset kind") {
  DatasetConfig d;
  d.synth_side = 8;
  d.synth_classes = 3;
  CHECK(input_geometry(d).input == Shape{1, 8, 8});
  CHECK(input_geometry(d).classes == 3);
  d.kind = "mnist";
  CHECK(input_geometry(d).input == Shape{1, 28, 28});
  d.kind = "cifar10";
  CHECK(input_geometry(d).input == Shape{3, 32, 32});
}

TEST_CASE("compare-all footprint has seven rows and a 2N b_w dense row") {
  auto cfg = synth_cfg();
  const auto rows = footprint_rows(cfg, "compare-all");
  REQUIRE(rows.size() == 7);
  const Network net = build_model("tiny-cnn", {1, 8, 8}, 4);
  CHECK(rows[0].mode == FootprintMode::dense);
  CHECK(rows[0].total_bits == 2.0 * static_cast<double>(net.total_weights()) * 32);
  CHECK(count_lines(footprint_table(rows)) == 8);
  CHECK(error_kind_of([&] { footprint_rows(cfg, "bogus"); }) == ErrorKind::config);
}

TEST_CASE("configured footprint equals the per-layer formulas") {
  auto cfg = synth_cfg();
  const Network net = build_model("tiny-cnn", {1, 8, 8}, 4);
  const auto plan = plan_sparsity(net, cfg);
  double want = 0;
  for (std::size_t n : net.weighted()) {
    const auto& l = net.layers()[n];
    const LayerDims d[] = {{l.weight_count(), l.weight_layout().filters}};
    want += plan.schemes[n]
                ? footprint_bits(d, FootprintMode::unstructured, plan.layer_s[n]).total_bits
                : footprint_bits(d, FootprintMode::dense, 0.0).total_bits;
  }
  const auto exact = footprint_rows(cfg, "exact");
  REQUIRE(exact.size() == 1);
  CHECK(exact[0].total_bits == doctest::Approx(want).epsilon(1e-12));
  CHECK(footprint_rows(cfg, "approx")[0].total_bits < exact[0].total_bits);
}

TEST_CASE("bench requests default to the fig2 preset and reject unknown keys") {
  const auto r = parse_bench_request("{}");
  CHECK(r.layer.channels == 64);
  CHECK(r.layer.filters == 64);
  CHECK(r.options.sparsities == fig2_sparsities());
  const auto c = parse_bench_request(
      R"j({"layer": {"channels": 8, "size": 6}, "schemes": ["block(2,1)"], "repeats": 3})j");
  CHECK(c.layer.channels == 8);
  CHECK(c.layer.size == 6);
  CHECK(c.options.schemes.size() == 1);
  CHECK(c.options.repeats == 3);
  CHECK(error_kind_of([] { parse_bench_request(R"({"layr": "fig2"})"); }) == ErrorKind::config);
  CHECK(error_kind_of([] { parse_bench_request(R"({"layer": "vgg"})"); }) == ErrorKind::config);
  CHECK(error_kind_of([] { parse_bench_request("not json"); }) == ErrorKind::config);
}

TEST_CASE("forgetting report counts match dataset compression") {
  auto cfg = synth_cfg();
  const auto dir = scratch("single");
  cfg.output_dir = dir.string();
  Trainer t(cfg, load_data(cfg.dataset, {}, cfg.seed));
  t.run();
  const auto& log = t.state().flog;
  const std::string all = forgetting_report(dir, std::nullopt);
  CHECK(all.rfind("th,removed,kept,removed_fraction\n-1,0,64,", 0) == 0);
  const std::string th0 = forgetting_report(dir, 0);
  CHECK(count_lines(th0) == 2);
  const std::size_t unforgettable = unforgettable_set(log).size();
  CHECK(th0.find("\n0," + std::to_string(unforgettable) + ",") != std::string::npos);
  if (unforgettable < log.size()) {
    const auto view = compress_dataset(log, 0, 1, 1);
    CHECK(view.size() == log.size() - unforgettable);
  }
}

TEST_CASE("forgetting report over a sweep and on an empty directory") {
  const auto root = scratch("sweep");
  for (int th : {0, 1}) {
    auto cfg = synth_cfg();
    cfg.de.enabled = true;
    cfg.de.e1 = 2;
    cfg.de.th = th;
    cfg.output_dir = (root / ("th" + std::to_string(th))).string();
    Trainer t(cfg, load_data(cfg.dataset, {}, cfg.seed));
    t.run();
  }
  const std::string grid = forgetting_report(root, std::nullopt);
  CHECK(count_lines(grid) == 3);
  CHECK(grid.find("\nth0,0,2,64,") != std::string::npos);
  CHECK(grid.find("\nth1,1,2,64,") != std::string::npos);
  CHECK(count_lines(forgetting_report(root, 1)) == 2);

  const auto empty = scratch("empty");
  std::filesystem::create_directories(empty);
  CHECK(error_kind_of([&] { forgetting_report(empty, std::nullopt); }) == ErrorKind::config);
  CHECK(error_kind_of([&] { forgetting_report(empty / "missing", std::nullopt); }) ==
        ErrorKind::config);
}

TEST_CASE("flops text lists every weighted layer and four totals") {
  const auto text = flops_text(synth_cfg(), 64, std::nullopt);
  CHECK(count_lines(text) == 1 + 4 + 4);
}
