#ifndef GSDAG_H
#define GSDAG_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum GsdagStatus {
  GSDAG_STATUS_OK = 0,
  GSDAG_STATUS_NULL_ARGUMENT = 1,
  GSDAG_STATUS_INVALID_UTF8 = 2,
  GSDAG_STATUS_SYNTAX = 3,
  GSDAG_STATUS_INVALID_MODEL = 4,
  GSDAG_STATUS_SOLVE_FAILED = 5,
  GSDAG_STATUS_STRATEGY_MISMATCH = 6,
  GSDAG_STATUS_TOO_LARGE = 7,
  GSDAG_STATUS_INTERNAL = 8,
} GsdagStatus;

/**
 * A parsed model. It may still violate structural rules; see
 * [`gsdag_model_violation_count`].
 */
typedef struct GsdagModel GsdagModel;

/**
 * A solved strategy together with the model it belongs to.
 */
typedef struct GsdagStrategy GsdagStrategy;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * The message of the last failed call on this thread, or NULL. The
 * pointer stays valid until the next gsdag call on the same thread.
 */
const char *gsdag_last_error(void);

/**
 * Parse a model document.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum GsdagStatus gsdag_model_parse(const char *json, struct GsdagModel **out);

/**
 * # Safety
 * `model` must come from [`gsdag_model_parse`] and not be used afterwards.
 */
void gsdag_model_free(struct GsdagModel *model);

/**
 * Number of structural violations; zero means the model can be solved.
 *
 * # Safety
 * `model` must be a live handle and `out` a valid pointer.
 */
enum GsdagStatus gsdag_model_violation_count(const struct GsdagModel *model, size_t *out);

/**
 * Exhaustive maximum expected utility.
 *
 * # Safety
 * `model` must be a live handle and `out` a valid pointer.
 */
enum GsdagStatus gsdag_model_brute_meu(const struct GsdagModel *model, double *out);

/**
 * Solve a model.
 *
 * # Safety
 * `model` must be a live handle and `out` a valid pointer.
 */
enum GsdagStatus gsdag_solve(const struct GsdagModel *model,
                             bool trim_relevance,
                             struct GsdagStrategy **out);

/**
 * Load a strategy from a bundle document.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum GsdagStatus gsdag_strategy_from_bundle(const char *json, struct GsdagStrategy **out);

/**
 * # Safety
 * `strategy` must come from this library and not be used afterwards.
 */
void gsdag_strategy_free(struct GsdagStrategy *strategy);

/**
 * The MEU reported by the solver (or stored in the bundle).
 *
 * # Safety
 * `strategy` must be a live handle and `out` a valid pointer.
 */
enum GsdagStatus gsdag_strategy_meu(const struct GsdagStrategy *strategy, double *out);

/**
 * Exact expected utility of the strategy.
 *
 * # Safety
 * `strategy` must be a live handle and `out` a valid pointer.
 */
enum GsdagStatus gsdag_strategy_eu(const struct GsdagStrategy *strategy, double *out);

/**
 * Monte Carlo estimate of the strategy's expected utility.
 *
 * # Safety
 * `strategy` must be a live handle; `mean` and `std_err` valid pointers.
 */
enum GsdagStatus gsdag_strategy_simulate(const struct GsdagStrategy *strategy,
                                         uint64_t n,
                                         uint64_t seed,
                                         double *mean,
                                         double *std_err);

/**
 * Serialise the strategy as a bundle document. Free the result with
 * [`gsdag_string_free`].
 *
 * # Safety
 * `strategy` must be a live handle and `out` a valid pointer.
 */
enum GsdagStatus gsdag_strategy_bundle_json(const struct GsdagStrategy *strategy, char **out);

/**
 * # Safety
 * `s` must be a string returned by this library, or NULL.
 */
void gsdag_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GSDAG_H */
