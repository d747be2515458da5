/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#ifndef IPTREE_H
#define IPTREE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum IptreeStatus {
  IPTREE_STATUS_OK = 0,
  IPTREE_STATUS_NULL_POINTER = 1,
  IPTREE_STATUS_INVALID_UTF8 = 2,
  /**
   * Malformed JSON or expression syntax.
   */
  IPTREE_STATUS_PARSE = 3,
  IPTREE_STATUS_INVALID_INPUT = 4,
  IPTREE_STATUS_RESOURCE_LIMIT = 5,
  IPTREE_STATUS_IO = 6,
  IPTREE_STATUS_PANIC = 7,
} IptreeStatus;

/**
 * A compiled finitary gamble, tied to the state space it was compiled for.
 */
typedef struct IptreeGamble IptreeGamble;

/**
 * An imprecise probability tree.
 */
typedef struct IptreeModel IptreeModel;

/**
 * Result of a limit query. `value` may be `±INFINITY`; `converged_at` is
 * zero when the iterates did not stabilize.
 */
typedef struct IptreeApprox {
  double value;
  bool converged;
  size_t converged_at;
  /**
   * Number of iterates computed.
   */
  size_t iterations;
  /**
   * Horizon of the last iterate.
   */
  size_t last_horizon;
} IptreeApprox;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. The pointer
 * stays valid until the next call into this library on the same thread.
 */
const char *iptree_last_error(void);

/**
 * Parses a model from its JSON text. On success `*out` owns a new handle
 * that must be released with [`iptree_model_free`].
 *
 * # Safety
 * `json` must be a nul-terminated string and `out` a valid pointer.
 */
enum IptreeStatus iptree_model_from_json(const char *json, struct IptreeModel **out);

/**
 * # Safety
 * `model` must be null or a handle from [`iptree_model_from_json`] that has
 * not been freed.
 */
void iptree_model_free(struct IptreeModel *model);

/**
 * Number of states, or zero for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t iptree_model_state_count(const struct IptreeModel *model);

/**
 * Compiles a gamble expression against the model's state labels.
 *
 * # Safety
 * `model` must be a live handle, `expr` a nul-terminated string and `out`
 * a valid pointer.
 */
enum IptreeStatus iptree_gamble_compile(const struct IptreeModel *model,
                                        const char *expr,
                                        struct IptreeGamble **out);

/**
 * # Safety
 * `gamble` must be null or a live handle.
 */
void iptree_gamble_free(struct IptreeGamble *gamble);

/**
 * Number of states the gamble depends on, or zero for a null handle.
 *
 * # Safety
 * `gamble` must be null or a live handle.
 */
size_t iptree_gamble_depth(const struct IptreeGamble *gamble);

/**
 * Conditional upper expectation of a gamble given the situation
 * `situation[0..len]` (state indices).
 *
 * # Safety
 * Handles must be live; `situation` must point to `len` values (or be null
 * when `len` is zero); `out` must be valid.
 */
enum IptreeStatus iptree_upper(const struct IptreeModel *model,
                               const struct IptreeGamble *gamble,
                               const size_t *situation,
                               size_t len,
                               double *out);

/**
 * Conditional lower expectation; see [`iptree_upper`].
 *
 * # Safety
 * As for [`iptree_upper`].
 */
enum IptreeStatus iptree_lower(const struct IptreeModel *model,
                               const struct IptreeGamble *gamble,
                               const size_t *situation,
                               size_t len,
                               double *out);

/**
 * Upper and lower expected time to reach one of `targets`.
 *
 * # Safety
 * `model` must be live; `targets` and `situation` must point to
 * `n_targets` and `len` values; `upper` and `lower` must be valid.
 */
enum IptreeStatus iptree_hitting_time(const struct IptreeModel *model,
                                      const size_t *targets,
                                      size_t n_targets,
                                      const size_t *situation,
                                      size_t len,
                                      double tol,
                                      size_t max_horizon,
                                      struct IptreeApprox *upper,
                                      struct IptreeApprox *lower);

/**
 * Upper and lower probability of ever reaching one of `targets`.
 *
 * # Safety
 * As for [`iptree_hitting_time`].
 */
enum IptreeStatus iptree_hitting_probability(const struct IptreeModel *model,
                                             const size_t *targets,
                                             size_t n_targets,
                                             const size_t *situation,
                                             size_t len,
                                             double tol,
                                             size_t max_horizon,
                                             struct IptreeApprox *upper,
                                             struct IptreeApprox *lower);

/**
 * Runs a query file given as JSON text and returns the JSON report in
 * `*out`, to be released with [`iptree_string_free`]. `model` may be null
 * when the query file embeds its model. Query-level errors are reported
 * inside the report and still return `IPTREE_STATUS_OK`.
 *
 * # Safety
 * `model` must be null or live; `query_json` must be a nul-terminated
 * string; `out` must be valid.
 */
enum IptreeStatus iptree_eval_query_json(const struct IptreeModel *model,
                                         const char *query_json,
                                         char **out);

/**
 * Releases a string returned by this library.
 *
 * # Safety
 * `s` must be null or a string from [`iptree_eval_query_json`] that has
 * not been freed.
 */
void iptree_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* IPTREE_H */
