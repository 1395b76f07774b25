#ifndef TSCLASS_H
#define TSCLASS_H

/* Generated by cbindgen from crates/ffi/src. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call. The error values match the CLI exit codes
 * where one exists.
 */
typedef enum TscStatus {
  TSC_STATUS_OK = 0,
  TSC_STATUS_CONFIG = 2,
  TSC_STATUS_DATA = 3,
  TSC_STATUS_NUMERIC = 4,
  TSC_STATUS_NULL_POINTER = 10,
  TSC_STATUS_INVALID_UTF8 = 11,
  TSC_STATUS_PANIC = 12,
} TscStatus;

/**
 * A run configuration.
 */
typedef struct TscConfig TscConfig;

/**
 * A loaded or generated data frame.
 */
typedef struct TscFrame TscFrame;

/**
 * A fitted classic model.
 */
typedef struct TscModel TscModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version, a static NUL-terminated string.
 */
const char *tsc_version(void);

/**
 * Code of the last failed call on this thread (e.g. `UNPARSABLE_CELL`),
 * or NULL after a successful call. Valid until the next call.
 */
const char *tsc_last_error_code(void);

/**
 * Message of the last failed call on this thread, or NULL.
 */
const char *tsc_last_error_message(void);

void tsc_string_free(char *s);

/**
 * Loads a CSV. `schema` may be NULL or `key=value` lines using the
 * `data.*` configuration keys (e.g. `data.timestamp=ts`).
 */
enum TscStatus tsc_frame_load_csv(const char *path, const char *schema, struct TscFrame **out);

/**
 * `kind` is `planted_signal`, `regime_shift` or `random_walk`.
 */
enum TscStatus tsc_frame_synthetic(const char *kind,
                                   size_t n,
                                   size_t d,
                                   uint64_t seed,
                                   struct TscFrame **out);

/**
 * Number of rows; 0 for NULL.
 */
size_t tsc_frame_len(const struct TscFrame *frame);

/**
 * Copies the frame's per-period returns into `out` (at least `tsc_frame_len` slots).
 */
enum TscStatus tsc_frame_returns(const struct TscFrame *frame, double *out);

void tsc_frame_free(struct TscFrame *frame);

/**
 * Three-class labels of `n` next-period returns; `out_labels` gets `n`
 * values in {-1, 0, 1}. The thresholds pointers may be NULL.
 */
enum TscStatus tsc_label_by_quantiles(const double *next_returns,
                                      size_t n,
                                      double q_low,
                                      double q_high,
                                      int8_t *out_labels,
                                      double *out_lower,
                                      double *out_upper);

/**
 * Signal backtest. `out_strategy_curve` (n slots) and the finals may be NULL.
 */
enum TscStatus tsc_backtest(const double *market_returns,
                            const int8_t *signals,
                            size_t n,
                            uint64_t random_seed,
                            double *out_strategy_curve,
                            double *out_final_strategy,
                            double *out_final_market);

/**
 * A configuration with every default.
 */
enum TscStatus tsc_config_new(struct TscConfig **out);

/**
 * Parses configuration text (`key=value` lines, `[section]` headers).
 */
enum TscStatus tsc_config_parse(const char *text, struct TscConfig **out);

enum TscStatus tsc_config_set(struct TscConfig *cfg, const char *key, const char *value);

/**
 * Hex SHA-256 of the result-relevant settings; free with `tsc_string_free`.
 * NULL for a NULL handle.
 */
char *tsc_config_hash(const struct TscConfig *cfg);

void tsc_config_free(struct TscConfig *cfg);

/**
 * Runs every configured family on `frame`, writing artifacts to the
 * configured output directory. `out_manifest` receives the manifest JSON.
 */
enum TscStatus tsc_run_scenario(const struct TscConfig *cfg,
                                const struct TscFrame *frame,
                                char **out_manifest);

/**
 * Fits a classic family on a row-major `rows x cols` matrix and labels
 * in {-1, 0, 1}. `params_json` is NULL (family defaults) or an object such
 * as `{"C": 1.0, "kernel": "rbf"}`.
 */
enum TscStatus tsc_model_fit(const char *family,
                             const char *params_json,
                             const double *x,
                             size_t rows,
                             size_t cols,
                             const int8_t *y,
                             uint64_t seed,
                             struct TscModel **out);

/**
 * Writes `rows` predicted labels into `out_labels`.
 */
enum TscStatus tsc_model_predict(const struct TscModel *model,
                                 const double *x,
                                 size_t rows,
                                 size_t cols,
                                 int8_t *out_labels);

/**
 * Versioned JSON of a fitted model; free with `tsc_string_free`.
 */
enum TscStatus tsc_model_to_json(const struct TscModel *model, char **out);

enum TscStatus tsc_model_from_json(const char *text, struct TscModel **out);

void tsc_model_free(struct TscModel *model);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TSCLASS_H */
