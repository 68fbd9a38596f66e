// Copyright 2026 The avalign Authors
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

#ifndef AVALIGN_AVALIGN_H_
#define AVALIGN_AVALIGN_H_

/*
 * C interface to the avalign library.
 *
 * Every fallible call returns an avalign_status. On failure the message of
 * the last error on the calling thread is available from avalign_last_error()
 * until the next failing call on that thread. Objects are opaque handles
 * released with their *_free function; strings returned through char** out
 * parameters are released with avalign_string_free. Out parameters are left
 * untouched on failure.
 *
 * Structured results (metric reports, training summaries, ablation tables)
 * are returned as UTF-8 JSON text.
 */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define AVALIGN_API __declspec(dllexport)
#elif defined(__GNUC__)
#define AVALIGN_API __attribute__((visibility("default")))
#else
#define AVALIGN_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum avalign_status {
  AVALIGN_OK = 0,
  AVALIGN_ERR_INVALID_ARGUMENT = 1,
  AVALIGN_ERR_DIMENSION_MISMATCH = 2,
  AVALIGN_ERR_NON_FINITE = 3,
  AVALIGN_ERR_ZERO_NORM = 4,
  AVALIGN_ERR_NON_CONVERGENCE = 5,
  AVALIGN_ERR_NUMERICAL_UNDERFLOW = 6,
  AVALIGN_ERR_INSTANCE_TOO_LARGE = 7,
  AVALIGN_ERR_NO_MATCH = 8,
  AVALIGN_ERR_MALFORMED = 9,
  AVALIGN_ERR_OUT_OF_RANGE = 10,
  AVALIGN_ERR_IO = 11,
  AVALIGN_ERR_PARSE = 12,
  AVALIGN_ERR_NAN_LOSS = 13,
  AVALIGN_ERR_UNKNOWN_KEY = 14,
  AVALIGN_ERR_INTERNAL = 99
} avalign_status;

AVALIGN_API const char* avalign_version(void);
/* Stable snake_case name of a status, e.g. "non_convergence". */
AVALIGN_API const char* avalign_status_name(avalign_status status);
AVALIGN_API const char* avalign_last_error(void);
AVALIGN_API void avalign_string_free(char* s);

/* ------------------------------------------------------------------ */
/* Dense row-major matrices of doubles. Entries must be finite. */

typedef struct avalign_matrix avalign_matrix;

AVALIGN_API avalign_status avalign_matrix_new(size_t rows, size_t cols, const double* values, avalign_matrix** out);
/* Comma separated numbers, one row per line. */
AVALIGN_API avalign_status avalign_matrix_parse_csv(const char* text, avalign_matrix** out);
AVALIGN_API avalign_status avalign_matrix_read_csv(const char* path, avalign_matrix** out);
AVALIGN_API avalign_status avalign_matrix_to_csv(const avalign_matrix* m, char** out);
AVALIGN_API size_t avalign_matrix_rows(const avalign_matrix* m);
AVALIGN_API size_t avalign_matrix_cols(const avalign_matrix* m);
/* rows * cols values, valid while m lives. */
AVALIGN_API const double* avalign_matrix_data(const avalign_matrix* m);
AVALIGN_API void avalign_matrix_free(avalign_matrix* m);

/* ------------------------------------------------------------------ */
/* Optimal transport. */

typedef enum avalign_log_domain {
  AVALIGN_LOG_DOMAIN_AUTO = 0,
  AVALIGN_LOG_DOMAIN_ALWAYS = 1,
  AVALIGN_LOG_DOMAIN_NEVER = 2
} avalign_log_domain;

typedef struct avalign_sinkhorn_config {
  double beta;
  int outer_steps;
  int inner_steps;
  double marginal_tolerance;
  int max_total_iterations;
  avalign_log_domain log_domain;
} avalign_sinkhorn_config;

/* beta 0.5, 20 outer steps, 5 inner steps, tolerance 1e-6, 10000 iterations. */
AVALIGN_API void avalign_sinkhorn_config_init(avalign_sinkhorn_config* cfg);

typedef struct avalign_ot_stats {
  double distance;
  double marginal_violation;
  int outer_steps_run;     /* Sinkhorn only */
  int inner_iterations;    /* Sinkhorn only */
  int log_domain;          /* Sinkhorn only: 1 if run on logarithms */
  int newton_finish;       /* Sinkhorn only */
  size_t bases_examined;   /* exact solver only */
  size_t nonzeros;
} avalign_ot_stats;

/* 1 - cosine similarity of every (image row, audio row) pair. */
AVALIGN_API avalign_status avalign_cost_from_embeddings(const avalign_matrix* z_image, const avalign_matrix* z_audio,
                                                        avalign_matrix** cost);
/* u (rows) and v (cols) may be NULL for uniform weights. */
AVALIGN_API avalign_status avalign_sinkhorn(const avalign_matrix* cost, const double* u, const double* v,
                                            const avalign_sinkhorn_config* cfg, avalign_matrix** plan,
                                            avalign_ot_stats* stats);
/* Exact optimum by basis enumeration; rows + cols <= 10. */
AVALIGN_API avalign_status avalign_exact_ot(const avalign_matrix* cost, const double* u, const double* v,
                                            avalign_matrix** plan, avalign_ot_stats* stats);

/* ------------------------------------------------------------------ */
/* Grounding codecs. Boxes are normalized corners, segments in seconds. */

typedef struct avalign_box {
  double x_left, y_top, x_right, y_bottom;
} avalign_box;

typedef struct avalign_segment {
  double t_start, t_end;
} avalign_segment;

/* Returns AVALIGN_ERR_NO_MATCH, AVALIGN_ERR_MALFORMED or AVALIGN_ERR_OUT_OF_RANGE
 * when the text holds no usable answer. label may be NULL. */
AVALIGN_API avalign_status avalign_parse_box(const char* text, char** label, avalign_box* box);
AVALIGN_API avalign_status avalign_serialize_box(const char* label, const avalign_box* box, int precision, char** out);
AVALIGN_API avalign_status avalign_parse_time(const char* text, avalign_segment* segment);
AVALIGN_API avalign_status avalign_serialize_time(const avalign_segment* segment, int precision, char** out);
AVALIGN_API avalign_status avalign_parse_verdict(const char* text, int* verdict);
AVALIGN_API avalign_status avalign_normalize_box(int64_t x_left, int64_t y_top, int64_t x_right, int64_t y_bottom,
                                                 int64_t width, int64_t height, avalign_box* out);
/* bindings_json is an object of placeholder -> text. */
AVALIGN_API avalign_status avalign_render_instruction(const char* template_text, const char* bindings_json, char** out);
/* {"arig": [...], "igatl": [...], "avfact": [...]} */
AVALIGN_API avalign_status avalign_builtin_templates(char** json_out);
/* PGM (P2/P5) or CSV 0/1 mask. pixel_box receives row_min, row_max, col_min,
 * col_max (inclusive) and may be NULL. */
AVALIGN_API avalign_status avalign_seg2bbox_file(const char* path, avalign_box* box, size_t pixel_box[4]);

/* ------------------------------------------------------------------ */
/* Attention consistency. */

typedef struct avalign_avace_config {
  double lambda1, lambda2, eps1, eps2;
} avalign_avace_config;

/* lambda1 = lambda2 = 0.5, eps1 = eps2 = 1e-9. */
AVALIGN_API void avalign_avace_config_init(avalign_avace_config* cfg);
/* Cell-centre mask of box on a rows x cols grid. */
AVALIGN_API avalign_status avalign_rasterize_mask(const avalign_box* box, size_t rows, size_t cols,
                                                  avalign_matrix** mask, int* degenerate);
/* Loss of an attention grid with entries in [0,1] against the mask of box.
 * grad (same shape as attention) may be NULL. */
AVALIGN_API avalign_status avalign_attention_loss(const avalign_matrix* attention, const avalign_box* box,
                                                  const avalign_avace_config* cfg, double* loss,
                                                  avalign_matrix** grad);

/* ------------------------------------------------------------------ */
/* Metrics. */

/* JSONL records {"id","task","pred","gt"}; samples are scored on up to
 * `jobs` threads. task may be NULL to accept the task of the records (all
 * records must then share it). Returns a report object. */
AVALIGN_API avalign_status avalign_eval_jsonl(const char* jsonl, const char* task, size_t jobs, char** report_json);

/* ------------------------------------------------------------------ */
/* Data preparation. */

/* Lookup CSV plus labeled JSONL files of {"id", "label"} records; writes
 * one JSON pair per line. */
AVALIGN_API avalign_status avalign_pair_files(const char* lookup_csv_path, const char* images_jsonl_path,
                                              const char* audios_jsonl_path, char** pairs_jsonl);

typedef struct avalign_dataset avalign_dataset;

/* spec_json may be NULL or a partial scene spec object. */
AVALIGN_API avalign_status avalign_dataset_generate(uint64_t seed, size_t n, double positive_fraction,
                                                    const char* spec_json, avalign_dataset** out);
AVALIGN_API avalign_status avalign_dataset_read(const char* path, avalign_dataset** out);
AVALIGN_API avalign_status avalign_dataset_write(const avalign_dataset* ds, const char* path);
AVALIGN_API size_t avalign_dataset_size(const avalign_dataset* ds);
AVALIGN_API size_t avalign_dataset_positives(const avalign_dataset* ds);
AVALIGN_API avalign_status avalign_dataset_spec(const avalign_dataset* ds, char** spec_json);
AVALIGN_API void avalign_dataset_free(avalign_dataset* ds);

/* ------------------------------------------------------------------ */
/* Training. */

typedef struct avalign_train_config avalign_train_config;

typedef enum avalign_config_preset {
  AVALIGN_PRESET_TRAIN = 0,    /* base learning rate 1e-3 */
  AVALIGN_PRESET_ABLATION = 1  /* the ablation runner's learning rate */
} avalign_config_preset;

AVALIGN_API avalign_status avalign_train_config_new(avalign_config_preset preset, avalign_train_config** out);
AVALIGN_API void avalign_train_config_free(avalign_train_config* cfg);
AVALIGN_API avalign_status avalign_train_config_set(avalign_train_config* cfg, const char* key, const char* value);
/* key = value lines, '#' comments. */
AVALIGN_API avalign_status avalign_train_config_apply_text(avalign_train_config* cfg, const char* text);
/* Object of every key with its current value, in documentation order. */
AVALIGN_API avalign_status avalign_train_config_resolved(const avalign_train_config* cfg, char** json_out);
/* Array of {"key", "description"}; needs no config. */
AVALIGN_API avalign_status avalign_train_config_keys(char** json_out);

AVALIGN_API avalign_status avalign_lr_at(size_t step, size_t total_steps, double base_lr, double warmup_ratio,
                                         double* lr);

typedef struct avalign_model avalign_model;
typedef struct avalign_training avalign_training;

/* Called after each epoch with a JSON object of the epoch's losses. */
typedef void (*avalign_progress_fn)(const char* json, void* user);

AVALIGN_API avalign_status avalign_train(const avalign_train_config* cfg, const avalign_dataset* ds,
                                         avalign_progress_fn on_epoch, void* user, avalign_training** out);
AVALIGN_API void avalign_training_free(avalign_training* t);
/* Epoch logs, best epoch and step count. */
AVALIGN_API avalign_status avalign_training_summary(const avalign_training* t, char** json_out);
/* step,total columns for every optimizer step. */
AVALIGN_API avalign_status avalign_training_loss_csv(const avalign_training* t, char** csv_out);
AVALIGN_API size_t avalign_training_checkpoints(const avalign_training* t);
/* index < avalign_training_checkpoints(t); the result is an independent copy. */
AVALIGN_API avalign_status avalign_training_checkpoint(const avalign_training* t, size_t index, avalign_model** out);
AVALIGN_API avalign_status avalign_training_best(const avalign_training* t, avalign_model** out);

AVALIGN_API avalign_status avalign_model_to_json(const avalign_model* m, char** json_out);
AVALIGN_API avalign_status avalign_model_from_json(const char* json, avalign_model** out);
/* Held-out metrics of the model on the dataset scenes. */
AVALIGN_API avalign_status avalign_model_evaluate(const avalign_model* m, const avalign_dataset* ds,
                                                  char** metrics_json);
AVALIGN_API void avalign_model_free(avalign_model* m);

typedef struct avalign_ablation_options {
  size_t train_scenes;        /* 2000 */
  size_t test_scenes;         /* 500 */
  double positive_fraction;   /* 0.5 */
  const uint64_t* seeds;      /* NULL: seeds 100..109 */
  size_t num_seeds;
  size_t jobs;                /* 1 */
  const char* spec_json;      /* NULL: default scenes */
} avalign_ablation_options;

AVALIGN_API void avalign_ablation_options_init(avalign_ablation_options* opts);
/* Runs every loss combination for every seed. on_run receives one JSON object
 * per finished run (including its wall time); the returned table does not
 * carry timings, so reruns reproduce it byte for byte. */
AVALIGN_API avalign_status avalign_ablate(const avalign_train_config* cfg, const avalign_ablation_options* opts,
                                          avalign_progress_fn on_run, void* user, char** table_json,
                                          char** markdown);

/* ------------------------------------------------------------------ */
/* Gradient checks. */

/* Array of {"name", "description", "tolerance"}. */
AVALIGN_API avalign_status avalign_gradcheck_targets(char** json_out);
/* passed is set to 1 iff the maximum relative error is below the target's
 * tolerance. report_json may be NULL. */
AVALIGN_API avalign_status avalign_gradcheck(const char* target, uint64_t seed, double h, int* passed,
                                             char** report_json);

#ifdef __cplusplus
}
#endif

#endif  // AVALIGN_AVALIGN_H_
