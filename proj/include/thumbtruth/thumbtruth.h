#ifndef THUMBTRUTH_THUMBTRUTH_H
#define THUMBTRUTH_THUMBTRUTH_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define TT_API __declspec(dllexport)
#else
#define TT_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum tt_status {
  TT_OK = 0,
  TT_ERR_INTERNAL = 1,
  TT_ERR_SCHEMA = 2,
  TT_ERR_CONFIG = 3,
  TT_ERR_TRUTH = 4,
  TT_ERR_NOT_FOUND = 5,
  TT_ERR_INVALID_ARGUMENT = 6,
  TT_ERR_PROVIDER = 7,
  TT_ERR_EMPTY_INPUT = 8,
  TT_ERR_DIMENSION = 9
} tt_status;

typedef struct tt_manifest tt_manifest;
typedef struct tt_context tt_context;

typedef struct tt_rates {
  double accuracy, precision, recall, specificity, f1;
  /* 1 when the rate is defined, 0 for 0/0 */
  int accuracy_defined, precision_defined, recall_defined, specificity_defined, f1_defined;
} tt_rates;

typedef enum tt_mcnemar_method { TT_MCNEMAR_CHI_SQUARED_CC = 0, TT_MCNEMAR_EXACT_BINOMIAL = 1 } tt_mcnemar_method;

typedef struct tt_mcnemar_result {
  double statistic;
  double p_value;
  int method; /* tt_mcnemar_method */
  int no_discordant_pairs;
} tt_mcnemar_result;

/* Message of the last failed call on this thread; never NULL. */
TT_API const char* tt_last_error(void);
/* Short name of the last error code on this thread, e.g. "SchemaViolation". */
TT_API const char* tt_last_error_code(void);
TT_API const char* tt_version(void);
/* Process exit code for a status: 0 ok, 2 schema, 3 config or bad argument,
   4 truth, 1 other. */
TT_API int tt_exit_code(tt_status status);
/* Frees strings returned through char** out-parameters. */
TT_API void tt_string_free(char* s);

/* Manifests */
TT_API tt_status tt_manifest_load(const char* path, tt_manifest** out);
TT_API void tt_manifest_free(tt_manifest* manifest);
TT_API size_t tt_manifest_size(const tt_manifest* manifest);
/* Record as one JSON line. */
TT_API tt_status tt_manifest_record_json(const tt_manifest* manifest, size_t index, char** out);

/* Context holds a loaded project config. config_path may be NULL for an
   empty configuration (ingest and the pure functions work without one). */
TT_API tt_status tt_context_open(const char* config_path, tt_context** out);
TT_API void tt_context_free(tt_context* ctx);

/* Runs a subcommand (ingest, describe, exemplars, classify, ablate, evaluate,
   cost, report). options_json is an object keyed by flag name with '-'
   replaced by '_'. On success *report_out receives a JSON document with
   "text", "warnings" and "files". */
TT_API tt_status tt_run(tt_context* ctx, const char* subcommand, const char* options_json, char** report_out);

/* Pure functions */
TT_API tt_status tt_thumbnail_url(const char* video_id, char** out);
TT_API tt_status tt_truncate_words(const char* text, size_t cap, char** out);
/* ctx may be NULL for the built-in language families. */
TT_API tt_status tt_normalize_language(const tt_context* ctx, const char* code, char** out);
TT_API tt_status tt_clip_duration(double duration_seconds, double* out);
/* out must hold 20 values. */
TT_API tt_status tt_frame_timestamps(double duration_seconds, double* out);
TT_API tt_status tt_cosine_similarity(const double* a, const double* b, size_t dimension, double* out);
TT_API tt_status tt_mcnemar(uint64_t b, uint64_t c, tt_mcnemar_result* out);
TT_API tt_status tt_rates_from_counts(uint64_t tp, uint64_t fp, uint64_t tn, uint64_t fn, tt_rates* out);
/* Labels: 1 misleading, 0 not misleading. */
TT_API tt_status tt_cohens_kappa(const int* annotator_a, const int* annotator_b, size_t n, double* out);
/* Parses a response; *verdict is 1 misleading, 0 not misleading, -1 unclassifiable. */
TT_API tt_status tt_parse_verdict(const char* response_text, int* verdict, char** explanation);

#ifdef __cplusplus
}
#endif

#endif
