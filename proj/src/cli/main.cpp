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

// mest: command-line front end over the C API.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mest/mest.h"

namespace {

namespace fs = std::filesystem;

constexpr int kOk = 0;
constexpr int kRuntime = 1;
constexpr int kUsage = 2;

struct Failure {
  int code;
  std::string message;
};

int exit_code_for(mest_status s) {
  return s == MEST_ERR_CONFIG || s == MEST_ERR_ARGUMENT ? kUsage : kRuntime;
}

void check(mest_status s, const char* what) {
  if (s != MEST_OK)
    throw Failure{exit_code_for(s), std::string(what) + ": " + mest_status_string(s) + ": " +
                                        mest_last_error()};
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Failure{kUsage, "cannot read '" + path + "'"};
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_atomic(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out.flush()) throw Failure{kRuntime, "cannot write '" + tmp.string() + "'"};
  }
  fs::rename(tmp, path);
}

// Takes ownership of a C API string.
std::string take(char* s) {
  std::string out = s ? s : "";
  mest_string_free(s);
  return out;
}

void emit(const std::string& text, const std::string& out) {
  if (out.empty())
    std::cout << text;
  else
    write_atomic(out, text);
}

struct TrainArgs {
  std::string config, resume, data_dir, output_dir;
  std::uint64_t seed = 0;
  bool quiet = false;
};

int cmd_train(const TrainArgs& a, const CLI::App& sub) {
  const std::string cfg = read_text(a.config);
  mest_train_options opt{};
  opt.data_dir = a.data_dir.empty() ? nullptr : a.data_dir.c_str();
  opt.output_dir = a.output_dir.empty() ? nullptr : a.output_dir.c_str();
  opt.seed = a.seed;
  opt.seed_set = sub.count("--seed") > 0;
  mest_trainer* t = nullptr;
  check(mest_trainer_create(cfg.c_str(), &opt, &t), "train");
  std::unique_ptr<mest_trainer, void (*)(mest_trainer*)> guard(t, mest_trainer_destroy);
  if (!a.resume.empty()) check(mest_trainer_resume(t, a.resume.c_str()), "resume");
  while (!mest_trainer_done(t)) {
    mest_metrics m{};
    check(mest_trainer_run_epoch(t, &m), "epoch");
    if (!a.quiet)
      std::printf("epoch %3zu  lr %.5f  loss %.4f  train %.4f  test %.4f  nnz %zu  data %zu\n",
                  m.epoch, m.lr, m.train_loss, m.train_acc, m.test_acc, m.nnz_total,
                  m.dataset_size);
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MEST sparse-training laboratory"};
  app.require_subcommand(1, 1);

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train a model from a JSON config");
  train->add_option("--config", ta.config, "Run config (JSON)")->required();
  train->add_option("--seed", ta.seed, "Override the config seed");
  train->add_option("--resume", ta.resume, "Continue from a checkpoint");
  train->add_option("--data-dir", ta.data_dir, "Dataset root (default $MEST_DATA_DIR)");
  train->add_option("--output-dir", ta.output_dir, "Override the config output_dir");
  train->add_flag("--quiet", ta.quiet, "No per-epoch lines");

  std::string fp_config, fp_mode = "exact", fp_out;
  double fp_wbits = 32, fp_ibits = 8;
  auto* fp = app.add_subcommand("footprint", "Memory footprint of a configured model");
  fp->add_option("--config", fp_config, "Run config (JSON)")->required();
  fp->add_option("--mode", fp_mode, "exact | approx | compare-all")
      ->check(CLI::IsMember({"exact", "approx", "compare-all"}));
  fp->add_option("--weight-bits", fp_wbits, "Bits per stored weight");
  fp->add_option("--index-bits", fp_ibits, "Bits per stored index");
  fp->add_option("--out", fp_out, "Write CSV here instead of stdout");

  std::string b_layer = "fig2", b_out, b_gnuplot;
  std::vector<std::string> b_schemes;
  std::vector<double> b_grid;
  std::size_t b_channels = 64, b_filters = 64, b_kernel = 3, b_size = 16, b_pad = 1,
              b_batch = 1, b_repeats = 20, b_warmup = 10, b_tune = 0;
  std::uint64_t b_seed = 1;
  auto* bench = app.add_subcommand("bench", "Sparse kernel microbenchmark");
  bench->add_option("--layer", b_layer, "fig2 | custom")
      ->check(CLI::IsMember({"fig2", "custom"}));
  bench->add_option("--schemes", b_schemes, "Schemes, e.g. unstructured, block(4,1), pattern");
  bench->add_option("--sparsity-grid", b_grid, "Sparsities to measure");
  bench->add_option("--channels", b_channels, "Custom layer input channels");
  bench->add_option("--filters", b_filters, "Custom layer output channels");
  bench->add_option("--kernel", b_kernel, "Custom layer kernel side");
  bench->add_option("--size", b_size, "Custom layer feature-map side");
  bench->add_option("--pad", b_pad, "Custom layer padding");
  bench->add_option("--batch", b_batch, "Custom layer batch");
  bench->add_option("--repeats", b_repeats, "Timed repetitions per point");
  bench->add_option("--warmup", b_warmup, "Untimed repetitions per point");
  bench->add_option("--tune-budget", b_tune, "Autotuning trials per point (0: default)");
  bench->add_option("--seed", b_seed, "Mask and data seed");
  bench->add_option("--out", b_out, "Write CSV here instead of stdout");
  bench->add_option("--gnuplot", b_gnuplot, "Also write a gnuplot data file");

  std::string fr_run, fr_out;
  int fr_th = -1;
  auto* fr = app.add_subcommand("forgetting-report", "Forgetting statistics of a run or sweep");
  fr->add_option("--run", fr_run, "Run directory or sweep directory")->required();
  fr->add_option("--th", fr_th, "Only this removal threshold");
  fr->add_option("--out", fr_out, "Write CSV here instead of stdout");

  std::string fl_config, fl_data, fl_out;
  std::int64_t fl_compressed = -1;
  auto* flops = app.add_subcommand("flops", "Inference and training FLOP counts");
  flops->add_option("--config", fl_config, "Run config (JSON)")->required();
  flops->add_option("--compressed-size", fl_compressed, "Phase-2 dataset size for DE runs");
  flops->add_option("--data-dir", fl_data, "Dataset root (default $MEST_DATA_DIR)");
  flops->add_option("--out", fl_out, "Write CSV here instead of stdout");

  std::string ic_path;
  auto* ic = app.add_subcommand("inspect-checkpoint", "Summarize a checkpoint as JSON");
  ic->add_option("checkpoint", ic_path, "Checkpoint file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n";
    const CLI::App* active = &app;
    for (const auto* s : app.get_subcommands()) active = s;
    std::cerr << active->help();
    return kUsage;
  }

  try {
    if (*train) return cmd_train(ta, *train);
    if (*fp) {
      char* out = nullptr;
      check(mest_footprint_report(read_text(fp_config).c_str(), fp_mode.c_str(), fp_wbits,
                                  fp_ibits, &out),
            "footprint");
      emit(take(out), fp_out);
    } else if (*bench) {
      nlohmann::json req;
      if (b_layer == "fig2")
        req["layer"] = "fig2";
      else
        req["layer"] = {{"channels", b_channels}, {"filters", b_filters}, {"kernel", b_kernel},
                        {"size", b_size},         {"pad", b_pad},         {"batch", b_batch}};
      if (!b_schemes.empty()) req["schemes"] = b_schemes;
      if (!b_grid.empty()) req["sparsities"] = b_grid;
      req["repeats"] = b_repeats;
      req["warmup"] = b_warmup;
      req["tune_budget"] = b_tune;
      req["seed"] = b_seed;
      char *csv = nullptr, *gp = nullptr;
      check(mest_bench(req.dump().c_str(), &csv, b_gnuplot.empty() ? nullptr : &gp), "bench");
      emit(take(csv), b_out);
      if (!b_gnuplot.empty()) write_atomic(b_gnuplot, take(gp));
    } else if (*fr) {
      char* out = nullptr;
      check(mest_forgetting_report(fr_run.c_str(), fr_th, fr->count("--th") > 0, &out),
            "forgetting-report");
      emit(take(out), fr_out);
    } else if (*flops) {
      char* out = nullptr;
      check(mest_flops_report(read_text(fl_config).c_str(),
                              fl_data.empty() ? nullptr : fl_data.c_str(), fl_compressed, &out),
            "flops");
      emit(take(out), fl_out);
    } else if (*ic) {
      char* out = nullptr;
      check(mest_checkpoint_inspect(ic_path.c_str(), &out), "inspect-checkpoint");
      std::cout << take(out);
    }
  } catch (const Failure& f) {
    std::cerr << "error: " << f.message << "\n";
    return f.code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kOk;
}
