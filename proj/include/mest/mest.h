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

#ifndef MEST_MEST_H_
#define MEST_MEST_H_

/* C interface to the MEST sparse-training laboratory.
 *
 * Every function returns a mest_status. On failure the message is available
 * from mest_last_error() on the same thread until the next call. Strings
 * returned through char** out-parameters are owned by the caller and must be
 * released with mest_string_free(). */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define MEST_API __declspec(dllexport)
#else
#define MEST_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mest_status {
  MEST_OK = 0,
  MEST_ERR_CONFIG = 1,
  MEST_ERR_IO = 2,
  MEST_ERR_FORMAT = 3,
  MEST_ERR_DIMENSION = 4,
  MEST_ERR_STATE = 5,
  MEST_ERR_NUMERIC = 6,
  MEST_ERR_FEASIBILITY = 7,
  MEST_ERR_ENCODING = 8,
  MEST_ERR_ARGUMENT = 9, /* null handle or pointer */
  MEST_ERR_INTERNAL = 10
} mest_status;

typedef struct mest_trainer mest_trainer;

typedef struct mest_train_options {
  const char* data_dir;   /* NULL: $MEST_DATA_DIR, then "data" */
  const char* output_dir; /* NULL: keep the config's output_dir */
  uint64_t seed;
  int seed_set;           /* nonzero overrides the config seed */
} mest_train_options;

typedef struct mest_metrics {
  size_t epoch;
  double lr;
  double train_loss;
  double train_acc;
  double test_acc;
  size_t nnz_total;
  double sparsity_actual;
  size_t dataset_size;
  double p_current;
  double footprint_bits;
} mest_metrics;

MEST_API const char* mest_version(void);
MEST_API const char* mest_last_error(void);
MEST_API const char* mest_status_string(mest_status status);
MEST_API void mest_string_free(char* s);

/* Training. */
MEST_API mest_status mest_trainer_create(const char* config_json,
                                         const mest_train_options* options,
                                         mest_trainer** out);
MEST_API void mest_trainer_destroy(mest_trainer* t);
MEST_API mest_status mest_trainer_resume(mest_trainer* t, const char* checkpoint_path);
MEST_API mest_status mest_trainer_run_epoch(mest_trainer* t, mest_metrics* out);
MEST_API mest_status mest_trainer_run(mest_trainer* t);
MEST_API int mest_trainer_done(const mest_trainer* t);
MEST_API mest_status mest_trainer_checkpoint(const mest_trainer* t, const char* path);
MEST_API mest_status mest_trainer_metrics_csv(const mest_trainer* t, char** out);

/* Reports; each writes a freshly allocated string to *out. */
MEST_API mest_status mest_footprint_report(const char* config_json, const char* mode,
                                           double weight_bits, double index_bits,
                                           char** out);
MEST_API mest_status mest_flops_report(const char* config_json, const char* data_dir,
                                       int64_t compressed_size, char** out);
MEST_API mest_status mest_bench(const char* request_json, char** csv_out,
                                char** gnuplot_out);
MEST_API mest_status mest_forgetting_report(const char* run_dir, int th, int th_set,
                                            char** out);
MEST_API mest_status mest_checkpoint_inspect(const char* path, char** out);

#ifdef __cplusplus
}  // extern "C"
#endif

#endif  // MEST_MEST_H_
