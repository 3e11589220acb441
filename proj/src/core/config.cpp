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

#include "mest/config.hpp"

#include <cmath>
#include <set>

#include "json.hpp"
#include "mest/error.hpp"
#include "mest/io.hpp"

namespace mest {
namespace {

using nlohmann::json;

void check_keys(const json& j, const std::string& where,
                std::initializer_list<const char*> allowed) {
  require(j.is_object(), ErrorKind::config, where + " must be a JSON object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [k, v] : j.items())
    require(ok.count(k) > 0, ErrorKind::config,
            "unknown key '" + k + "' in " + where);
}

template <class T>
void get(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    fail(ErrorKind::config, std::string("bad value for '") + key + "': " + e.what());
  }
}

void read_dataset(const json& j, DatasetConfig& d) {
  check_keys(j, "dataset",
             {"kind", "path", "train_limit", "test_limit", "synth_train", "synth_test",
              "synth_classes", "synth_side", "augment"});
  get(j, "kind", d.kind);
  get(j, "path", d.path);
  get(j, "train_limit", d.train_limit);
  get(j, "test_limit", d.test_limit);
  get(j, "synth_train", d.synth_train);
  get(j, "synth_test", d.synth_test);
  get(j, "synth_classes", d.synth_classes);
  get(j, "synth_side", d.synth_side);
  get(j, "augment", d.augment);
}

void read_mutation(const json& j, MutationSchedule& m) {
  check_keys(j, "mutation", {"mode", "milestones", "delta", "stop", "lambda"});
  if (j.contains("mode")) m.mode = parse_mutation_mode(j.at("mode").get<std::string>());
  if (j.contains("milestones")) {
    m.milestones.clear();
    for (const auto& ms : j.at("milestones")) {
      check_keys(ms, "milestone", {"epoch", "p"});
      PMilestone p;
      get(ms, "epoch", p.epoch);
      get(ms, "p", p.p);
      m.milestones.push_back(p);
    }
  }
  get(j, "delta", m.delta);
  get(j, "stop", m.stop);
  get(j, "lambda", m.lambda);
}

json to_json(const RunConfig& c, bool with_output) {
  json j;
  j["name"] = c.name;
  j["dataset"] = {{"kind", c.dataset.kind},
                  {"path", c.dataset.path},
                  {"train_limit", c.dataset.train_limit},
                  {"test_limit", c.dataset.test_limit},
                  {"synth_train", c.dataset.synth_train},
                  {"synth_test", c.dataset.synth_test},
                  {"synth_classes", c.dataset.synth_classes},
                  {"synth_side", c.dataset.synth_side},
                  {"augment", c.dataset.augment}};
  j["model"] = c.model;
  j["width"] = c.width;
  j["scheme"] = to_string(c.scheme);
  json ls = json::object();
  for (const auto& [node, s] : c.layer_schemes) ls[std::to_string(node)] = to_string(s);
  j["layer_schemes"] = ls;
  j["overall_s"] = c.overall_s;
  j["strategy"] = to_string(c.strategy);
  j["ratio"] = c.ratio;
  if (c.dense_layers_set) j["dense_layers"] = c.dense_layers;
  json ms = json::array();
  for (const auto& m : c.mutation.milestones) ms.push_back({{"epoch", m.epoch}, {"p", m.p}});
  j["mutation"] = {{"mode", to_string(c.mutation.mode)},
                   {"milestones", ms},
                   {"delta", c.mutation.delta},
                   {"stop", c.mutation.stop},
                   {"lambda", c.mutation.lambda}};
  j["de"] = {{"enabled", c.de.enabled}, {"e1", c.de.e1}, {"th", c.de.th}};
  j["optimizer"] = {{"lr0", c.optimizer.lr0},
                    {"lr_end", c.optimizer.lr_end},
                    {"momentum", c.optimizer.momentum},
                    {"weight_decay", c.optimizer.weight_decay},
                    {"warmup_epochs", c.optimizer.warmup_epochs}};
  j["batch_size"] = c.batch_size;
  j["epochs"] = c.epochs;
  j["seed"] = c.seed;
  j["storage_bits"] = c.storage_bits;
  j["record_forgetting"] = c.record_forgetting;
  j["keep_history"] = c.keep_history;
  if (with_output) {
    j["output_dir"] = c.output_dir;
    j["checkpoint_every"] = c.checkpoint_every;
  }
  return j;
}

LayerSpec node(LayerKind kind, std::vector<int> inputs = {}) {
  LayerSpec l;
  l.kind = kind;
  l.inputs = std::move(inputs);
  return l;
}

}  // namespace

void RunConfig::validate() const {
  require(epochs >= 1, ErrorKind::config, "epochs must be at least 1");
  require(batch_size >= 1, ErrorKind::config, "batch_size must be at least 1");
  require(width >= 1, ErrorKind::config, "width must be at least 1");
  require(overall_s >= 0.0 && overall_s < 1.0, ErrorKind::config,
          "overall_s must lie in [0,1)");
  require(storage_bits == 32 || storage_bits == 64, ErrorKind::config,
          "storage_bits must be 32 or 64");
  require(optimizer.lr0 > 0 && optimizer.lr_end >= 0 && optimizer.lr_end <= optimizer.lr0,
          ErrorKind::config, "learning rates must satisfy 0 <= lr_end <= lr0, lr0 > 0");
  require(optimizer.momentum >= 0 && optimizer.momentum < 1, ErrorKind::config,
          "momentum must lie in [0,1)");
  require(optimizer.weight_decay >= 0, ErrorKind::config, "weight_decay must be >= 0");
  require(optimizer.warmup_epochs >= 0 && optimizer.warmup_epochs < static_cast<double>(epochs),
          ErrorKind::config, "warmup_epochs must lie in [0, epochs)");
  require(dataset.kind == "synth" || dataset.kind == "mnist" || dataset.kind == "cifar10",
          ErrorKind::config, "dataset.kind must be synth, mnist or cifar10");
  if (mutation.mode != MutationMode::none) {
    auto m = mutation;
    m.end = epochs;
    m.validate();
  }
  if (de.enabled) two_phase_plan(de_e1(), de.th, epochs);
}

std::size_t RunConfig::de_e1() const {
  if (de.e1 > 0) return de.e1;
  return static_cast<std::size_t>(std::llround(0.4 * static_cast<double>(epochs)));
}

RunConfig parse_run_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorKind::config, std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(j, "config",
             {"name", "dataset", "model", "width", "scheme", "layer_schemes", "overall_s",
              "strategy", "ratio", "dense_layers", "mutation", "de", "optimizer",
              "batch_size", "epochs", "seed", "storage_bits", "record_forgetting",
              "keep_history", "output_dir", "checkpoint_every"});
  RunConfig c;
  get(j, "name", c.name);
  if (j.contains("dataset")) read_dataset(j.at("dataset"), c.dataset);
  get(j, "model", c.model);
  get(j, "width", c.width);
  if (j.contains("scheme")) c.scheme = parse_scheme(j.at("scheme").get<std::string>());
  if (j.contains("layer_schemes")) {
    for (const auto& [k, v] : j.at("layer_schemes").items()) {
      std::size_t node = 0;
      try {
        node = std::stoul(k);
      } catch (...) {
        fail(ErrorKind::config, "layer_schemes keys must be node ids");
      }
      c.layer_schemes[node] = parse_scheme(v.get<std::string>());
    }
  }
  get(j, "overall_s", c.overall_s);
  if (j.contains("strategy"))
    c.strategy = parse_strategy(j.at("strategy").get<std::string>());
  get(j, "ratio", c.ratio);
  if (j.contains("dense_layers")) {
    get(j, "dense_layers", c.dense_layers);
    c.dense_layers_set = true;
  }
  if (j.contains("mutation")) read_mutation(j.at("mutation"), c.mutation);
  if (j.contains("de")) {
    const auto& d = j.at("de");
    check_keys(d, "de", {"enabled", "e1", "th"});
    get(d, "enabled", c.de.enabled);
    get(d, "e1", c.de.e1);
    get(d, "th", c.de.th);
  }
  if (j.contains("optimizer")) {
    const auto& o = j.at("optimizer");
    check_keys(o, "optimizer", {"lr0", "lr_end", "momentum", "weight_decay", "warmup_epochs"});
    get(o, "lr0", c.optimizer.lr0);
    get(o, "lr_end", c.optimizer.lr_end);
    get(o, "momentum", c.optimizer.momentum);
    get(o, "weight_decay", c.optimizer.weight_decay);
    get(o, "warmup_epochs", c.optimizer.warmup_epochs);
  }
  get(j, "batch_size", c.batch_size);
  get(j, "epochs", c.epochs);
  get(j, "seed", c.seed);
  get(j, "storage_bits", c.storage_bits);
  get(j, "record_forgetting", c.record_forgetting);
  get(j, "keep_history", c.keep_history);
  get(j, "output_dir", c.output_dir);
  get(j, "checkpoint_every", c.checkpoint_every);
  c.mutation.end = c.epochs;
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  return parse_run_config(read_text_file(path));
}

std::string run_config_json(const RunConfig& cfg) { return to_json(cfg, true).dump(2) + "\n"; }

std::uint64_t config_hash(const RunConfig& cfg) {
  const std::string s = to_json(cfg, false).dump();
  return fnv1a(s);
}

DataBundle load_data(const DatasetConfig& cfg, const std::filesystem::path& data_dir,
                     std::uint64_t seed) {
  DataBundle b;
  auto resolve = [&](const std::string& p) {
    std::filesystem::path q(p);
    return q.is_absolute() ? q : data_dir / q;
  };
  if (cfg.kind == "synth") {
    b.train = synth(cfg.synth_train, cfg.synth_classes, derive_seed(seed, {1}), cfg.synth_side);
    b.test = synth(cfg.synth_test, cfg.synth_classes, derive_seed(seed, {2}), cfg.synth_side);
    b.test.split = "test";
  } else if (cfg.kind == "mnist") {
    const auto dir = resolve(cfg.path.empty() ? "mnist5k" : cfg.path);
    b.train = load_mnist(dir, true);
    b.test = load_mnist(dir, false);
  } else {
    const auto dir = resolve(cfg.path.empty() ? "cifar-10-batches-bin" : cfg.path);
    std::vector<std::filesystem::path> train;
    for (int i = 1; i <= 5; ++i) train.push_back(dir / ("data_batch_" + std::to_string(i) + ".bin"));
    b.train = load_cifar10(train, "train");
    b.test = load_cifar10({dir / "test_batch.bin"}, "test");
  }
  auto truncate = [](LabeledDataset& d, std::size_t limit) {
    if (limit == 0 || limit >= d.size()) return;
    d.labels.resize(limit);
    d.images.resize(limit * d.image_size());
  };
  truncate(b.train, cfg.train_limit);
  truncate(b.test, cfg.test_limit);
  b.norm = compute_normalization(b.train);
  return b;
}

Network build_model(const std::string& name, const Shape& input, std::size_t classes,
                    std::size_t width) {
  require(input.size() == 3, ErrorKind::config, "model input must be C x H x W");
  const std::size_t C = input[0], H = input[1], W = input[2];
  std::vector<LayerSpec> L;
  if (name == "tiny-cnn") {
    require(H % 4 == 0 && W % 4 == 0, ErrorKind::config,
            "tiny-cnn needs input sides divisible by 4");
    const std::size_t c1 = 8 * width, c2 = 16 * width, hid = 64 * width;
    L.push_back(LayerSpec::conv(C, c1, 3, 1, 1, Activation::relu));
    L.push_back(node(LayerKind::maxpool));
    L.push_back(LayerSpec::conv(c1, c2, 3, 1, 1, Activation::relu));
    L.push_back(node(LayerKind::maxpool));
    L.push_back(LayerSpec::dense(c2 * (H / 4) * (W / 4), hid, Activation::relu));
    L.push_back(LayerSpec::dense(hid, classes));
  } else if (name == "resnet-8-slim") {
    const std::size_t w1 = 16 * width, w2 = 32 * width, w3 = 64 * width;
    L.push_back(LayerSpec::conv(C, w1, 3, 1, 1, Activation::relu));  // 0
    L.push_back(LayerSpec::conv(w1, w1, 3, 1, 1, Activation::relu));  // 1
    L.push_back(LayerSpec::conv(w1, w1, 3, 1, 1));                    // 2
    L.push_back(node(LayerKind::add, {2, 0}));                        // 3
    L.push_back(node(LayerKind::relu));                               // 4
    int prev = 4;
    for (auto [cin, cout] : {std::pair{w1, w2}, std::pair{w2, w3}}) {
      const int base = static_cast<int>(L.size());
      auto a = LayerSpec::conv(cin, cout, 3, 2, 1, Activation::relu);
      a.inputs = {prev};
      L.push_back(a);                                   // base
      L.push_back(LayerSpec::conv(cout, cout, 3, 1, 1));  // base+1
      auto proj = LayerSpec::conv(cin, cout, 1, 2, 0);
      proj.inputs = {prev};
      L.push_back(proj);                                       // base+2
      L.push_back(node(LayerKind::add, {base + 1, base + 2}));  // base+3
      L.push_back(node(LayerKind::relu));                      // base+4
      prev = base + 4;
    }
    auto gap = node(LayerKind::avgpool);
    gap.pool = 0;
    L.push_back(gap);
    L.push_back(LayerSpec::dense(w3, classes));
  } else {
    fail(ErrorKind::config, "unknown model '" + name + "'");
  }
  L.push_back(node(LayerKind::softmax_xent));
  return Network(std::move(L), input);
}

SparsityPlan plan_sparsity(const Network& net, const RunConfig& cfg) {
  const auto& layers = net.layers();
  const auto& weighted = net.weighted();
  std::set<std::size_t> dense;
  if (cfg.dense_layers_set) {
    for (auto n : cfg.dense_layers) {
      require(n < layers.size() && layers[n].has_weights(), ErrorKind::config,
              "dense_layers entry " + std::to_string(n) + " is not a weighted node");
      dense.insert(n);
    }
  } else if (!weighted.empty()) {
    dense.insert(weighted.front());
    dense.insert(weighted.back());
  }
  for (const auto& [n, s] : cfg.layer_schemes)
    require(n < layers.size() && layers[n].has_weights(), ErrorKind::config,
            "layer_schemes entry " + std::to_string(n) + " is not a weighted node");

  SparsityPlan plan;
  plan.layer_s.assign(layers.size(), 0.0);
  plan.schemes.assign(layers.size(), std::nullopt);
  std::vector<LayerBudget> budgets;
  std::vector<std::size_t> ids;
  for (auto n : weighted) {
    if (dense.count(n) || cfg.overall_s == 0.0) continue;
    const auto& l = layers[n];
    Scheme s = cfg.layer_schemes.count(n) ? cfg.layer_schemes.at(n) : cfg.scheme;
    if (s.kind == SchemeKind::pattern &&
        !(l.kind == LayerKind::conv2d && l.kernel == 3))
      s = Scheme::unstructured();
    plan.schemes[n] = s;
    LayerBudget b;
    b.weights = l.weight_count();
    b.kernel = l.kind == LayerKind::conv2d ? l.kernel : 1;
    b.min_sparsity = s.kind == SchemeKind::pattern ? kPatternMinSparsity : 0.0;
    budgets.push_back(b);
    ids.push_back(n);
  }
  if (ids.empty()) return plan;
  const auto s = assign_layer_sparsity(budgets, cfg.strategy, cfg.overall_s, cfg.ratio);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    plan.layer_s[ids[i]] = s[i];
    check_feasible(layers[ids[i]].weight_layout(), *plan.schemes[ids[i]], s[i]);
  }
  return plan;
}

}  // namespace mest
