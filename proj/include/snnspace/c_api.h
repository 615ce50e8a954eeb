/*
 * Copyright 2026 snnspace contributors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/*
 * C interface to the snnspace engine: configuration, training, adaptation
 * experiments, sweeps, significance testing and artifact re-reading.
 *
 * Conventions:
 *   - Every fallible call returns a space_status; SPACE_OK is 0. On
 *     failure, space_last_error() returns a message for the calling
 *     thread (valid until that thread's next API call).
 *   - Objects are opaque handles created into an out-parameter and
 *     released with the matching *_free function. Handles are not
 *     shared between threads without external synchronisation; distinct
 *     handles are independent.
 *   - Strings returned through char** out-parameters are heap-allocated
 *     and must be released with space_string_free().
 */

#ifndef SNNSPACE_C_API_H
#define SNNSPACE_C_API_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum space_status {
    SPACE_OK = 0,
    SPACE_ERR_INVALID_ARGUMENT = 1, /* null/garbage handle or pointer, bad shape */
    SPACE_ERR_CONFIG = 2,           /* semantically invalid configuration */
    SPACE_ERR_PARSE = 3,            /* config text or value failed to parse */
    SPACE_ERR_IO = 4,               /* missing, unreadable or corrupt file */
    SPACE_ERR_NUMERIC = 5,          /* non-finite numbers or degenerate input */
    SPACE_ERR_INTERNAL = 6,         /* anything unexpected */
} space_status;

/* Library version string, e.g. "snnspace 1.0.0". Static storage. */
const char* space_version(void);

/* Message of the calling thread's most recent failure ("" after success). */
const char* space_last_error(void);

/* Release a string returned by this API. NULL is ignored. */
void space_string_free(char* text);

/* ------------------------------------------------------------------ */
/* Configuration                                                       */
/* ------------------------------------------------------------------ */

typedef struct space_config space_config;

/* A config with every field at its documented default. */
space_status space_config_create(space_config** out);

/* Parse `key = value` config text / load it from a file. */
space_status space_config_parse(const char* text, space_config** out);
space_status space_config_load(const char* path, space_config** out);

/* Get or set one dotted key ("adapt.eta", "run.method", ...). */
space_status space_config_set(space_config* config, const char* key, const char* value);
space_status space_config_get(const space_config* config, const char* key, char** out_value);

/* Render the full config as parseable text / write it to a file. */
space_status space_config_serialize(const space_config* config, char** out_text);
space_status space_config_save(const space_config* config, const char* path);

/* Apply environment overrides (SPACE_SEED). *out_changed may be NULL. */
space_status space_config_apply_env(space_config* config, int* out_changed);

/* Semantic validation of all fields. */
space_status space_config_validate(const space_config* config);

void space_config_free(space_config* config);

/* ------------------------------------------------------------------ */
/* Training                                                            */
/* ------------------------------------------------------------------ */

/*
 * Build, calibrate, train and (per train.refit) refit a source model on
 * the config's dataset, writing it to run.checkpoint when set. The
 * summary is a JSON object with test_accuracy, epochs_run, best_epoch,
 * diverged, refitted, refit_train_accuracy, refit_final_loss and
 * train_seconds. out_summary_json may be NULL if only the side effect
 * is wanted.
 */
space_status space_train(const space_config* config, char** out_summary_json);

/* ------------------------------------------------------------------ */
/* Experiments                                                         */
/* ------------------------------------------------------------------ */

typedef struct space_report space_report;

/*
 * One full experiment per the config (see the engine documentation for
 * stream and artifact semantics). Artifacts are written to
 * run.output_dir unless it is empty.
 */
space_status space_run(const space_config* config, space_report** out);

/* The report.json document for this run (body + volatile metadata). */
space_status space_report_json(const space_report* report, char** out_json);

/* Individual aggregates, for callers that don't want to parse JSON. */
space_status space_report_accuracy(const space_report* report, double* out);
space_status space_report_noadapt_accuracy(const space_report* report, double* out);
space_status space_report_clean_accuracy(const space_report* report, double* out);
space_status space_report_frac_similarity_up(const space_report* report, double* out);
space_status space_report_num_samples(const space_report* report, int* out);

void space_report_free(space_report* report);

/* ------------------------------------------------------------------ */
/* Sweeps                                                              */
/* ------------------------------------------------------------------ */

typedef struct space_sweep space_sweep;

/*
 * One run per grid value of a single dial, sharing the base config.
 * Axis names: "eta", "views", "severity", "scope", "aggregation".
 * A NULL/empty grid_csv uses the default grid; otherwise it is a
 * comma-separated value list ("0.01,0.1"). sweep.csv is written to
 * run.output_dir unless empty.
 */
space_status space_sweep_run(const space_config* base, const char* axis,
                             const char* grid_csv, space_sweep** out);

/* The sweep table as CSV text (same bytes as sweep.csv). */
space_status space_sweep_csv(const space_sweep* sweep, char** out_csv);

space_status space_sweep_num_points(const space_sweep* sweep, int* out);

void space_sweep_free(space_sweep* sweep);

/* ------------------------------------------------------------------ */
/* Significance testing                                                */
/* ------------------------------------------------------------------ */

/*
 * Wilcoxon signed-rank test on paired samples x, y of length n.
 * Zero differences are dropped; ties share average ranks; the p-value
 * is exact (full sign-assignment enumeration) for up to 20 retained
 * pairs and a tie-corrected normal approximation above. sidedness is
 * "greater" (x tends above y), "less" or "two_sided".
 * Outputs may individually be NULL: W, p, the retained pair count, and
 * whether the p-value is exact (1) or approximate (0).
 */
space_status space_wilcoxon(const double* x, const double* y, int n,
                            const char* sidedness, double* out_w, double* out_p,
                            int* out_n_used, int* out_exact);

/* ------------------------------------------------------------------ */
/* Trace re-reading                                                    */
/* ------------------------------------------------------------------ */

typedef struct space_traces space_traces;

/* Load a traces.jsonl file written by space_run. */
space_status space_traces_load(const char* path, space_traces** out);

space_status space_traces_count(const space_traces* traces, int* out);

/*
 * Aggregates recomputed from the records: JSON object with samples,
 * accuracy, noadapt_accuracy, mean_pre_similarity, mean_post_similarity,
 * frac_similarity_up and fallbacks.
 */
space_status space_traces_summary_json(const space_traces* traces, char** out_json);

/* Pre/post similarity histogram over [0,1] as CSV text. */
space_status space_traces_histogram_csv(const space_traces* traces, int bins,
                                        char** out_csv);

void space_traces_free(space_traces* traces);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* SNNSPACE_C_API_H */
