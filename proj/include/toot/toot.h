/*
 * Copyright 2026 The ToOT Authors. All Rights Reserved.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/*
 * C interface to the time-ordered online training library.
 *
 * Objects are opaque handles created by *_create / *_load / *_generate and
 * released by the matching *_free. Every fallible call returns a
 * toot_status; on failure a description of the last error on the calling
 * thread is available from toot_last_error() until the next call.
 */

#ifndef TOOT_TOOT_H
#define TOOT_TOOT_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define TOOT_API __declspec(dllexport)
#else
#define TOOT_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum toot_status {
  TOOT_OK = 0,
  TOOT_ERR_CONFIG = 1,
  TOOT_ERR_USAGE = 2,
  TOOT_ERR_NUMERIC = 3,
  TOOT_ERR_PARSE = 4,
  TOOT_ERR_VALIDATION = 5,
  TOOT_ERR_DEGENERATE_MASK = 6,
  TOOT_ERR_UNDEFINED = 7,
  TOOT_ERR_IO = 8,
  TOOT_ERR_PROTOCOL = 9,
  TOOT_ERR_INTERNAL = 10
} toot_status;

TOOT_API const char* toot_version(void);
TOOT_API const char* toot_status_name(toot_status status);
/* Message of the last failure on this thread, "" if none. */
TOOT_API const char* toot_last_error(void);

/* ---- Scenarios --------------------------------------------------------- */

typedef struct toot_gen_params {
  int frame_size;
  int train_frames;
  int test_frames;
  int sprite_min;
  int sprite_max;
  double max_speed;
  double cruise_speed;
  int present_min;
  int present_max;
  int absent_min;
  int absent_max;
  int background_count;
  int distractor; /* boolean */
  int jitter;
} toot_gen_params;

TOOT_API void toot_gen_params_default(toot_gen_params* params);

typedef struct toot_scenario toot_scenario;

TOOT_API toot_status toot_scenario_generate(const toot_gen_params* params, uint64_t seed,
                                            toot_scenario** out);
TOOT_API toot_status toot_scenario_load(const char* dir, toot_scenario** out);
TOOT_API toot_status toot_scenario_save(const toot_scenario* scenario, const char* dir);
TOOT_API int toot_scenario_train_frames(const toot_scenario* scenario);
TOOT_API int toot_scenario_test_frames(const toot_scenario* scenario);
TOOT_API void toot_scenario_free(toot_scenario* scenario);

/* ---- Experiments ------------------------------------------------------- */

typedef struct toot_experiment toot_experiment;
typedef struct toot_result toot_result;

typedef struct toot_run_event {
  const char* strategy; /* e.g. "of_localized_b2", valid during the callback */
  int run;
  double a_max;
  double seconds;
  int done;
  int total;
} toot_run_event;

/* Called from worker threads, one call at a time. */
typedef void (*toot_progress_fn)(const toot_run_event* event, void* user);

/* A new experiment holds the six standard strategy configurations, 10 runs
 * and seed 1. Adding a strategy first clears that default list. */
TOOT_API toot_status toot_experiment_create(toot_experiment** out);
/* `spec` is "name" or "name:b"; `default_batch` applies when b is absent. */
TOOT_API toot_status toot_experiment_add_strategy(toot_experiment* exp, const char* spec,
                                                  int default_batch);
TOOT_API toot_status toot_experiment_set_runs(toot_experiment* exp, int runs);
TOOT_API toot_status toot_experiment_set_seed(toot_experiment* exp, uint64_t seed);
TOOT_API toot_status toot_experiment_set_eval_every(toot_experiment* exp, int eval_every);
/* 0 uses every hardware thread. */
TOOT_API toot_status toot_experiment_set_threads(toot_experiment* exp, int threads);
TOOT_API toot_status toot_experiment_run(const toot_experiment* exp,
                                         const toot_scenario* scenario,
                                         toot_progress_fn progress, void* user,
                                         toot_result** out);
TOOT_API void toot_experiment_free(toot_experiment* exp);

typedef struct toot_strategy_summary {
  const char* key; /* valid while the result lives */
  double a_max;
  double interactions_to_f;
  double mean_itb; /* NaN when undefined */
  int f;           /* -1 when the mean curve never reaches A_f */
  int runs;
  int runs_reached;
  int incomplete;
} toot_strategy_summary;

TOOT_API double toot_result_a_f(const toot_result* result);
TOOT_API int toot_result_strategy_count(const toot_result* result);
TOOT_API toot_status toot_result_summary(const toot_result* result, int index,
                                         toot_strategy_summary* out);
/* Runs of strategy `index` that aborted; fills up to `capacity` run indices
 * and returns the total count. */
TOOT_API int toot_result_incomplete_runs(const toot_result* result, int index, int* runs,
                                         int capacity);
/* Trace CSVs, interaction logs, summaries and comparison.csv. */
TOOT_API toot_status toot_result_write(const toot_result* result, const char* dir);
TOOT_API void toot_result_free(toot_result* result);

/* ---- Ground-station service ------------------------------------------- */

typedef struct toot_station_config {
  const char* strategy; /* "semi_online", "localized" or "of_localized" */
  int batch_size;
  uint64_t seed;
  int lockstep;        /* boolean: advance on "step" instead of a clock */
  double fps;
  int window;
  int display_size;
  const char* audit_dir;  /* may be NULL */
  const char* address;
  uint16_t port;          /* 0 picks a free port */
  int handle_signals;     /* boolean: stop on SIGINT / SIGTERM */
} toot_station_config;

typedef struct toot_station toot_station;

TOOT_API void toot_station_config_default(toot_station_config* config);
/* Serves the train split of `scenario`, tracking accuracy on its test split.
 * The socket is bound on return. */
TOOT_API toot_status toot_station_create(const toot_scenario* scenario,
                                         const toot_station_config* config,
                                         toot_station** out);
/* Serves the PNG files of `frames_dir` in name order, without ground truth. */
TOOT_API toot_status toot_station_create_live(const char* frames_dir,
                                              const toot_station_config* config,
                                              toot_station** out);
TOOT_API uint16_t toot_station_port(const toot_station* station);
TOOT_API const char* toot_station_address(const toot_station* station);
/* Blocks until toot_station_stop() or a handled signal. */
TOOT_API toot_status toot_station_run(toot_station* station);
/* Safe to call from any thread. */
TOOT_API void toot_station_stop(toot_station* station);
/* Writes the audit log of the session so far. */
TOOT_API toot_status toot_station_write_audit(const toot_station* station, const char* dir);
TOOT_API void toot_station_free(toot_station* station);

#ifdef __cplusplus
}
#endif

#endif /* TOOT_TOOT_H */
