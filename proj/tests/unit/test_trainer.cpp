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

#include <cmath>

#include "mest/config.hpp"
#include "mest/trainer.hpp"
#include "test_util.hpp"

using namespace mest;
using mest::testing::error_kind_of;

namespace {

RunConfig small_config() {
  RunConfig c;
  c.dataset.synth_train = 96;
  c.dataset.synth_test = 48;
  c.dataset.synth_side = 8;
  c.batch_size = 32;
  c.epochs = 4;
  c.overall_s = 0.5;
  c.mutation.mode = MutationMode::em;
  c.mutation.milestones = {{0, 0.1}};
  c.mutation.delta = 1;
  c.mutation.stop = 3;
  c.mutation.end = c.epochs;
  c.optimizer.lr0 = 0.05;
  return c;
}

Trainer make_trainer(const RunConfig& c) {
  return Trainer(c, load_data(c.dataset, {}, c.seed));
}

}  // namespace

TEST_CASE("lr schedule hits lr0 first and lr_end on the last step") {
  OptimizerConfig o;
  o.lr0 = 0.1;
  o.lr_end = 0.0;
  CHECK(lr_at(o, 2, 0, 0, 2) == doctest::Approx(0.1));
  CHECK(lr_at(o, 2, 1, 1, 2) == doctest::Approx(0.0));
  // two batches per epoch: the cosine spans 1.5 epochs
  CHECK(lr_at(o, 2, 0, 1, 2) == doctest::Approx(0.075));
  CHECK(lr_at(o, 2, 1, 0, 2) == doctest::Approx(0.025));
}

TEST_CASE("lr warm-up ramps linearly") {
  OptimizerConfig o;
  o.lr0 = 0.1;
  o.lr_end = 0.0;
  o.warmup_epochs = 1;
  CHECK(lr_at(o, 3, 0, 0, 4) == doctest::Approx(0.025));
  CHECK(lr_at(o, 3, 0, 3, 4) == doctest::Approx(0.1));
  CHECK(lr_at(o, 3, 1, 0, 4) == doctest::Approx(0.1));
  CHECK(lr_at(o, 3, 2, 3, 4) == doctest::Approx(0.0));
  CHECK(error_kind_of([&] { lr_at(o, 3, 3, 0, 4); }) == ErrorKind::config);
}

TEST_CASE("sgd step touches only active entries") {
  OptimizerConfig o;
  o.momentum = 0.9;
  o.weight_decay = 0.1;
  Tensor w({2}), m({2}), g({2});
  w[0] = 1; w[1] = 2;
  m[1] = 0.5;
  g[0] = 0.1; g[1] = 0.2;
  Mask mask(WeightLayout{2, 1, 1}, Scheme::unstructured());
  mask.set(1, true);
  sgd_step(w, m, g, &mask, 0.5, o);
  CHECK(w[0] == 1.0);
  CHECK(m[0] == 0.0);
  CHECK(m[1] == doctest::Approx(0.85));
  CHECK(w[1] == doctest::Approx(1.575));

  sgd_step(w, m, g, nullptr, 0.5, o);
  CHECK(m[0] == doctest::Approx(0.2));
  CHECK(w[0] == doctest::Approx(0.9));
}

TEST_CASE("config parsing is strict and round-trips") {
  const auto c = parse_run_config(R"({"epochs": 12, "overall_s": 0.8,
      "mutation": {"mode": "em&s", "milestones": [{"epoch": 0, "p": 0.05}],
                   "delta": 2, "stop": 8}})");
  CHECK(c.epochs == 12);
  CHECK(c.mutation.end == 12);
  CHECK(c.mutation.mode == MutationMode::ems);
  const auto back = parse_run_config(run_config_json(c));
  CHECK(config_hash(back) == config_hash(c));

  CHECK(error_kind_of([] { parse_run_config(R"({"epochz": 3})"); }) == ErrorKind::config);
  CHECK(error_kind_of([] { parse_run_config(R"({"mutation": {"p": 1}})"); }) ==
        ErrorKind::config);
  CHECK(error_kind_of([] { parse_run_config(R"({"overall_s": 1.5})"); }) == ErrorKind::config);

  RunConfig a = c, b = c;
  b.output_dir = "/tmp/elsewhere";
  b.checkpoint_every = 3;
  CHECK(config_hash(a) == config_hash(b));
  b.seed = 9;
  CHECK(config_hash(a) != config_hash(b));
}

TEST_CASE("sparsity plan keeps first and last layers dense by default") {
  RunConfig c;
  c.overall_s = 0.5;
  const Network net = build_model("tiny-cnn", {1, 8, 8}, 4);
  const auto plan = plan_sparsity(net, c);
  CHECK_FALSE(plan.schemes[0]);
  CHECK(plan.schemes[2]);
  CHECK(plan.layer_s[2] == doctest::Approx(0.5));
  CHECK(plan.layer_s[4] == doctest::Approx(0.5));
  CHECK_FALSE(plan.schemes[5]);

  c.scheme = Scheme::pattern();
  c.overall_s = 0.8;
  const auto p2 = plan_sparsity(net, c);
  CHECK(p2.schemes[2]->kind == SchemeKind::pattern);
  CHECK(p2.schemes[4]->kind == SchemeKind::unstructured);
}

TEST_CASE("flops hand count for tiny-cnn") {
  RunConfig c;
  c.overall_s = 0.5;
  c.epochs = 2;
  const Network net = build_model("tiny-cnn", {1, 8, 8}, 4);
  const auto plan = plan_sparsity(net, c);
  const auto r = flops_report(c, net, plan, 100);
  REQUIRE(r.layers.size() == 4);
  CHECK(r.layers[0].macs == 4608);
  CHECK(r.layers[1].macs == 18432);
  CHECK(r.layers[2].macs == 4096);
  CHECK(r.layers[3].macs == 256);
  CHECK(r.inference_dense == 54784.0);
  CHECK(r.inference_sparse == 32256.0);
  CHECK(r.training_dense == 2 * 3 * 54784.0 * 100);
  CHECK(r.training_sparse == 2 * 3 * 32256.0 * 100);
}

TEST_CASE("training is deterministic and keeps sparsity under EM") {
  const auto c = small_config();
  auto t1 = make_trainer(c);
  const std::size_t nnz0 = t1.state().net.total_nnz();
  std::vector<MutationEvent> events;
  t1.hooks().on_mutation = [&](const MutationEvent& e) { events.push_back(e); };
  t1.run();
  auto t2 = make_trainer(c);
  t2.run();
  CHECK(t1.state().metrics == t2.state().metrics);
  CHECK(t1.checkpoint() == t2.checkpoint());
  for (const auto& m : t1.state().metrics) CHECK(m.nnz_total == nnz0);
  // two layers mutate at epochs 1 and 2, each with a remove and a grow
  CHECK(events.size() == 8);
  CHECK(t1.state().metrics.back().p_current == 0.0);
  CHECK(t1.state().metrics.front().p_current == doctest::Approx(0.1));
  CHECK(t1.state().metrics.back().train_acc > 0.5);
}

TEST_CASE("resume reproduces an uninterrupted run") {
  for (unsigned bits : {64u, 32u}) {
    auto c = small_config();
    c.storage_bits = bits;
    auto full = make_trainer(c);
    full.run();

    auto first = make_trainer(c);
    first.run_epoch();
    first.run_epoch();
    const auto bytes = first.checkpoint();
    auto second = make_trainer(c);
    second.resume_from(bytes);
    CHECK(second.state().epoch == 2);
    second.run();
    CHECK(second.state().metrics == full.state().metrics);
    CHECK(second.checkpoint() == full.checkpoint());

    const auto s = inspect_checkpoint(bytes);
    CHECK(s.epoch == 2);
    CHECK(s.storage_bits == bits);
    CHECK(s.layers.size() == 4);
    CHECK(s.layers[0].scheme == "dense");
    CHECK(s.layers[1].nnz * 2 == s.layers[1].weights);
  }
}

TEST_CASE("resume rejects corrupted or foreign checkpoints") {
  const auto c = small_config();
  auto t = make_trainer(c);
  t.run_epoch();
  auto bytes = t.checkpoint();
  auto other = c;
  other.seed = 7;
  auto t2 = make_trainer(other);
  CHECK(error_kind_of([&] { t2.resume_from(bytes); }) == ErrorKind::config);
  bytes[bytes.size() / 2] ^= 1;
  auto t3 = make_trainer(c);
  CHECK(error_kind_of([&] { t3.resume_from(bytes); }) == ErrorKind::format);
  bytes.resize(10);
  CHECK(error_kind_of([&] { inspect_checkpoint(bytes); }) == ErrorKind::format);
}

TEST_CASE("EM&S trains above the target density inside windows") {
  auto c = small_config();
  c.mutation.mode = MutationMode::ems;
  c.mutation.delta = 2;
  c.mutation.stop = 2;
  auto t = make_trainer(c);
  const std::size_t nnz0 = t.state().net.total_nnz();
  t.run();
  const auto& m = t.state().metrics;
  CHECK(m[0].nnz_total > nnz0);
  CHECK(m[1].nnz_total > nnz0);
  CHECK(m[2].nnz_total == nnz0);
  CHECK(m[3].nnz_total == nnz0);
}

TEST_CASE("two-phase data efficiency shrinks the training set") {
  auto c = small_config();
  c.mutation.mode = MutationMode::none;
  c.de.enabled = true;
  c.de.e1 = 2;
  c.de.th = 0;
  c.epochs = 5;
  auto t = make_trainer(c);
  t.run();
  const auto& m = t.state().metrics;
  CHECK(m[0].dataset_size == 96);
  CHECK(m[1].dataset_size == 96);
  CHECK(m[2].dataset_size < 96);
  CHECK(m[4].dataset_size == m[2].dataset_size);
  CHECK(t.state().flog.stats().size() == 96);
}
