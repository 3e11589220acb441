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

#include "mest/mest.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <new>
#include <string>

#include "mest/error.hpp"
#include "mest/io.hpp"
#include "mest/reports.hpp"
#include "mest/trainer.hpp"

struct mest_trainer {
  mest::Trainer trainer;
};

namespace {

thread_local std::string g_last_error;

mest_status to_status(mest::ErrorKind k) {
  using mest::ErrorKind;
  switch (k) {
    case ErrorKind::config: return MEST_ERR_CONFIG;
    case ErrorKind::io: return MEST_ERR_IO;
    case ErrorKind::format: return MEST_ERR_FORMAT;
    case ErrorKind::dimension: return MEST_ERR_DIMENSION;
    case ErrorKind::state: return MEST_ERR_STATE;
    case ErrorKind::numeric: return MEST_ERR_NUMERIC;
    case ErrorKind::feasibility: return MEST_ERR_FEASIBILITY;
    case ErrorKind::encoding: return MEST_ERR_ENCODING;
  }
  return MEST_ERR_INTERNAL;
}

template <class F>
mest_status guarded(F&& f) {
  g_last_error.clear();
  try {
    f();
    return MEST_OK;
  } catch (const mest::Error& e) {
    g_last_error = e.what();
    return to_status(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
  } catch (const std::exception& e) {
    g_last_error = e.what();
  } catch (...) {
    g_last_error = "unknown failure";
  }
  return MEST_ERR_INTERNAL;
}

char* dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

std::filesystem::path data_dir_of(const char* dir) {
  if (dir && *dir) return dir;
  if (const char* env = std::getenv("MEST_DATA_DIR"); env && *env) return env;
  return "data";
}

mest_metrics to_c(const mest::MetricsRow& m) {
  return {m.epoch,     m.lr,           m.train_loss,      m.train_acc,
          m.test_acc,  m.nnz_total,    m.sparsity_actual, m.dataset_size,
          m.p_current, m.footprint_bits};
}

}  // namespace

extern "C" {

const char* mest_version(void) { return "1.0.0"; }

const char* mest_last_error(void) { return g_last_error.c_str(); }

const char* mest_status_string(mest_status s) {
  switch (s) {
    case MEST_OK: return "ok";
    case MEST_ERR_CONFIG: return "config error";
    case MEST_ERR_IO: return "io error";
    case MEST_ERR_FORMAT: return "format error";
    case MEST_ERR_DIMENSION: return "dimension error";
    case MEST_ERR_STATE: return "state error";
    case MEST_ERR_NUMERIC: return "numeric error";
    case MEST_ERR_FEASIBILITY: return "feasibility error";
    case MEST_ERR_ENCODING: return "encoding error";
    case MEST_ERR_ARGUMENT: return "invalid argument";
    case MEST_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

void mest_string_free(char* s) { std::free(s); }

mest_status mest_trainer_create(const char* config_json, const mest_train_options* options,
                                mest_trainer** out) {
  if (!config_json || !out) {
    g_last_error = "config_json and out must be non-null";
    return MEST_ERR_ARGUMENT;
  }
  *out = nullptr;
  return guarded([&] {
    mest::RunConfig cfg = mest::parse_run_config(config_json);
    const char* data_dir = nullptr;
    if (options) {
      if (options->seed_set) cfg.seed = options->seed;
      if (options->output_dir) cfg.output_dir = options->output_dir;
      data_dir = options->data_dir;
    }
    auto data = mest::load_data(cfg.dataset, data_dir_of(data_dir), cfg.seed);
    *out = new mest_trainer{mest::Trainer(std::move(cfg), std::move(data))};
  });
}

void mest_trainer_destroy(mest_trainer* t) { delete t; }

mest_status mest_trainer_resume(mest_trainer* t, const char* path) {
  if (!t || !path) {
    g_last_error = "trainer and path must be non-null";
    return MEST_ERR_ARGUMENT;
  }
  return guarded([&] { t->trainer.resume_from(mest::read_file(path)); });
}

mest_status mest_trainer_run_epoch(mest_trainer* t, mest_metrics* out) {
  if (!t) {
    g_last_error = "trainer is null";
    return MEST_ERR_ARGUMENT;
  }
  return guarded([&] {
    const auto row = t->trainer.run_epoch();
    if (out) *out = to_c(row);
  });
}

mest_status mest_trainer_run(mest_trainer* t) {
  if (!t) {
    g_last_error = "trainer is null";
    return MEST_ERR_ARGUMENT;
  }
  return guarded([&] { t->trainer.run(); });
}

int mest_trainer_done(const mest_trainer* t) { return t && t->trainer.done() ? 1 : 0; }

mest_status mest_trainer_checkpoint(const mest_trainer* t, const char* path) {
  if (!t || !path) {
    g_last_error = "trainer and path must be non-null";
    return MEST_ERR_ARGUMENT;
  }
  return guarded([&] { mest::write_file_atomic(path, t->trainer.checkpoint()); });
}

mest_status mest_trainer_metrics_csv(const mest_trainer* t, char** out) {
  if (!t || !out) {
    g_last_error = "trainer and out must be non-null";
    return MEST_ERR_ARGUMENT;
  }
  return guarded([&] { *out = dup(mest::metrics_csv(t->trainer.state().metrics)); });
}

mest_status mest_footprint_report(const char* config_json, const char* mode,
                                  double weight_bits, double index_bits, char** out) {
  if (!config_json || !out) {
    g_last_error = "config_json and out must be non-null";
    return MEST_ERR_ARGUMENT;
  }
  return guarded([&] {
    const auto cfg = mest::parse_run_config(config_json);
    mest::FootprintParams fp;
    if (weight_bits > 0) fp.weight_bits = weight_bits;
    if (index_bits > 0) fp.index_bits = index_bits;
    *out = dup(mest::footprint_table(mest::footprint_rows(cfg, mode ? mode : "exact", fp)));
  });
}

mest_status mest_flops_report(const char* config_json, const char* data_dir,
                              int64_t compressed_size, char** out) {
  if (!config_json || !out) {
    g_last_error = "config_json and out must be non-null";
    return MEST_ERR_ARGUMENT;
  }
  return guarded([&] {
    const auto cfg = mest::parse_run_config(config_json);
    std::size_t train_size = cfg.dataset.synth_train;
    if (cfg.dataset.kind != "synth")
      train_size = mest::load_data(cfg.dataset, data_dir_of(data_dir), cfg.seed).train.size();
    std::optional<std::size_t> compressed;
    if (compressed_size >= 0) compressed = static_cast<std::size_t>(compressed_size);
    *out = dup(mest::flops_text(cfg, train_size, compressed));
  });
}

mest_status mest_bench(const char* request_json, char** csv_out, char** gnuplot_out) {
  if (!request_json || !csv_out) {
    g_last_error = "request_json and csv_out must be non-null";
    return MEST_ERR_ARGUMENT;
  }
  return guarded([&] {
    const auto req = mest::parse_bench_request(request_json);
    const auto report = mest::bench(req.layer, req.options);
    std::string gp = gnuplot_out ? mest::accel_gnuplot(report) : std::string();
    *csv_out = dup(mest::accel_csv(report));
    if (gnuplot_out) *gnuplot_out = dup(gp);
  });
}

mest_status mest_forgetting_report(const char* run_dir, int th, int th_set, char** out) {
  if (!run_dir || !out) {
    g_last_error = "run_dir and out must be non-null";
    return MEST_ERR_ARGUMENT;
  }
  return guarded([&] {
    std::optional<int> t;
    if (th_set) t = th;
    *out = dup(mest::forgetting_report(run_dir, t));
  });
}

mest_status mest_checkpoint_inspect(const char* path, char** out) {
  if (!path || !out) {
    g_last_error = "path and out must be non-null";
    return MEST_ERR_ARGUMENT;
  }
  return guarded([&] {
    *out = dup(mest::checkpoint_summary_json(mest::inspect_checkpoint(mest::read_file(path))));
  });
}

}  // extern "C"
