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

/* Exercises the shared library through its C header only. */

#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "mest/mest.h"

static int failures = 0;

#define EXPECT(cond)                                              \
  do {                                                            \
    if (!(cond)) {                                                \
      fprintf(stderr, "%s:%d: EXPECT(%s) failed: %s\n", __FILE__, \
              __LINE__, #cond, mest_last_error());                \
      ++failures;                                                 \
    }                                                             \
  } while (0)

static const char* kConfig =
    "{\"dataset\": {\"kind\": \"synth\", \"synth_train\": 64, \"synth_test\": 32,"
    " \"synth_side\": 8}, \"overall_s\": 0.8, \"epochs\": 3, \"batch_size\": 16,"
    " \"mutation\": {\"mode\": \"em\", \"milestones\": [{\"epoch\": 0, \"p\": 0.05}],"
    " \"delta\": 1, \"stop\": 2}}";

static size_t count_lines(const char* s) {
  size_t n = 0;
  for (; *s; ++s) n += *s == '\n';
  return n;
}

int main(int argc, char** argv) {
  const char* scratch = argc > 1 ? argv[1] : ".";
  char ckpt[1024];
  snprintf(ckpt, sizeof ckpt, "%s/capi_test.ckpt", scratch);

  EXPECT(strcmp(mest_version(), "") != 0);
  EXPECT(strcmp(mest_status_string(MEST_ERR_CONFIG), "config error") == 0);

  /* Argument and config errors. */
  mest_trainer* t = NULL;
  EXPECT(mest_trainer_create(NULL, NULL, &t) == MEST_ERR_ARGUMENT);
  EXPECT(mest_trainer_create("{\"epochz\": 1}", NULL, &t) == MEST_ERR_CONFIG);
  EXPECT(t == NULL);
  EXPECT(strlen(mest_last_error()) > 0);
  EXPECT(mest_trainer_run(NULL) == MEST_ERR_ARGUMENT);

  /* Train epoch by epoch, checkpoint, and resume into a second handle. */
  mest_train_options opt;
  memset(&opt, 0, sizeof opt);
  opt.seed = 5;
  opt.seed_set = 1;
  EXPECT(mest_trainer_create(kConfig, &opt, &t) == MEST_OK);
  mest_metrics m;
  EXPECT(mest_trainer_run_epoch(t, &m) == MEST_OK);
  EXPECT(m.epoch == 0);
  EXPECT(m.dataset_size == 64);
  EXPECT(mest_trainer_checkpoint(t, ckpt) == MEST_OK);
  EXPECT(mest_trainer_run(t) == MEST_OK);
  EXPECT(mest_trainer_done(t) == 1);
  EXPECT(mest_trainer_run_epoch(t, &m) == MEST_ERR_STATE);

  mest_trainer* r = NULL;
  EXPECT(mest_trainer_create(kConfig, &opt, &r) == MEST_OK);
  EXPECT(mest_trainer_resume(r, ckpt) == MEST_OK);
  EXPECT(mest_trainer_run(r) == MEST_OK);
  char *a = NULL, *b = NULL;
  EXPECT(mest_trainer_metrics_csv(t, &a) == MEST_OK);
  EXPECT(mest_trainer_metrics_csv(r, &b) == MEST_OK);
  EXPECT(a && b && strcmp(a, b) == 0);
  EXPECT(a && count_lines(a) == 4);
  mest_string_free(a);
  mest_string_free(b);
  mest_trainer_destroy(r);

  /* A checkpoint from a different seed is refused. */
  opt.seed = 6;
  EXPECT(mest_trainer_create(kConfig, &opt, &r) == MEST_OK);
  EXPECT(mest_trainer_resume(r, ckpt) == MEST_ERR_CONFIG);
  mest_trainer_destroy(r);
  mest_trainer_destroy(t);

  /* Reports. */
  char* out = NULL;
  EXPECT(mest_checkpoint_inspect(ckpt, &out) == MEST_OK);
  EXPECT(out && strstr(out, "\"epoch\": 1") != NULL);
  mest_string_free(out);
  out = NULL;
  EXPECT(mest_checkpoint_inspect("/nonexistent/x.ckpt", &out) == MEST_ERR_IO);

  EXPECT(mest_footprint_report(kConfig, "compare-all", 0, 0, &out) == MEST_OK);
  EXPECT(out && count_lines(out) == 8);
  mest_string_free(out);
  EXPECT(mest_footprint_report(kConfig, "nope", 0, 0, &out) == MEST_ERR_CONFIG);

  EXPECT(mest_flops_report(kConfig, NULL, -1, &out) == MEST_OK);
  mest_string_free(out);

  char *csv = NULL, *gp = NULL;
  EXPECT(mest_bench("{\"layer\": {\"channels\": 4, \"filters\": 4, \"size\": 4},"
                    " \"schemes\": [\"unstructured\"], \"sparsities\": [0.5],"
                    " \"repeats\": 2, \"warmup\": 1}",
                    &csv, &gp) == MEST_OK);
  EXPECT(csv && count_lines(csv) == 3);
  EXPECT(gp != NULL);
  mest_string_free(csv);
  mest_string_free(gp);

  EXPECT(mest_forgetting_report("/nonexistent/run", 0, 0, &out) == MEST_ERR_CONFIG);

  if (failures) fprintf(stderr, "%d expectation(s) failed\n", failures);
  return failures ? 1 : 0;
}
