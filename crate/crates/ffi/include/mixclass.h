#ifndef MIXCLASS_H
#define MIXCLASS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes; the nonzero values shared with the CLI match its exit codes.
 */
typedef enum MixclassStatus {
  MIXCLASS_STATUS_OK = 0,
  MIXCLASS_STATUS_ERROR = 1,
  MIXCLASS_STATUS_INVALID_ARGUMENT = 2,
  MIXCLASS_STATUS_ASSUMPTION_VIOLATED = 3,
  MIXCLASS_STATUS_ESTIMATION_FAILURE = 4,
  MIXCLASS_STATUS_NULL_POINTER = 5,
  MIXCLASS_STATUS_PANIC = 6,
} MixclassStatus;

typedef enum MixclassAlgorithm {
  MIXCLASS_ALGORITHM_TWO_STAGE = 0,
  MIXCLASS_ALGORITHM_ONE_STAGE = 1,
} MixclassAlgorithm;

/**
 * A mixture instance (the hidden components).
 */
typedef struct MixclassInstance MixclassInstance;

/**
 * A count oracle over an instance, with its query ledger.
 */
typedef struct MixclassOracle MixclassOracle;

/**
 * Output of a recovery run.
 */
typedef struct MixclassResult MixclassResult;

typedef struct MixclassCounts {
  size_t pos;
  size_t neg;
  size_t zero;
  size_t nonzero;
} MixclassCounts;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. Valid until the
 * next failing call on the same thread.
 */
const char *mixclass_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *mixclass_version(void);

/**
 * Read an instance file (`n ell delta`, then `k idx:val ...` per component).
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum MixclassStatus mixclass_instance_read(const char *path, struct MixclassInstance **out);

/**
 * Build an instance from `ell` sparse components laid out back to back:
 * component `t` owns `nnz[t]` consecutive entries of `idx`/`val`.
 * Components are normalized.
 *
 * # Safety
 * `nnz` must hold `ell` entries and `idx`/`val` their sum; `out` must be valid.
 */
enum MixclassStatus mixclass_instance_new(size_t n,
                                          size_t ell,
                                          const size_t *nnz,
                                          const size_t *idx,
                                          const double *val,
                                          double delta,
                                          struct MixclassInstance **out);

/**
 * # Safety
 * `inst` must come from this library or be NULL.
 */
void mixclass_instance_free(struct MixclassInstance *inst);

/**
 * # Safety
 * `inst` must be a valid handle.
 */
size_t mixclass_instance_dim(const struct MixclassInstance *inst);

/**
 * # Safety
 * `inst` must be a valid handle.
 */
size_t mixclass_instance_components(const struct MixclassInstance *inst);

/**
 * Oracle over a copy of `inst`: simulated with `seed`, or exact counts when
 * `exact` is true.
 *
 * # Safety
 * `inst` must be a valid handle and `out` a valid pointer.
 */
enum MixclassStatus mixclass_oracle_new(const struct MixclassInstance *inst,
                                        uint64_t seed,
                                        bool exact,
                                        struct MixclassOracle **out);

/**
 * # Safety
 * `oracle` must come from this library or be NULL.
 */
void mixclass_oracle_free(struct MixclassOracle *oracle);

/**
 * Estimate the sign counts of the dense query `v` (length `n`) from `batch`
 * query pairs.
 *
 * # Safety
 * `v` must hold `n` doubles; `oracle` and `out` must be valid.
 */
enum MixclassStatus mixclass_oracle_counts(struct MixclassOracle *oracle,
                                           const double *v,
                                           size_t n,
                                           size_t batch,
                                           struct MixclassCounts *out);

/**
 * Oracle calls issued so far.
 *
 * # Safety
 * `oracle` must be a valid handle.
 */
uint64_t mixclass_oracle_calls(const struct MixclassOracle *oracle);

/**
 * Recover the support matrix into `bits`, row-major `n x ell`, columns
 * ordered by representative coordinate.
 *
 * # Safety
 * `bits` must hold `n * ell` bytes; `oracle` must be valid.
 */
enum MixclassStatus mixclass_support_recover(struct MixclassOracle *oracle,
                                             size_t k,
                                             double mu_min,
                                             uint64_t seed,
                                             uint8_t *bits,
                                             size_t len);

/**
 * Recover all components to accuracy `epsilon`. `mu_min` is the smallest
 * nonzero magnitude of any component entry.
 *
 * # Safety
 * `oracle` and `out` must be valid.
 */
enum MixclassStatus mixclass_recover(struct MixclassOracle *oracle,
                                     enum MixclassAlgorithm algorithm,
                                     size_t k,
                                     double mu_min,
                                     double epsilon,
                                     uint64_t seed,
                                     struct MixclassResult **out);

/**
 * # Safety
 * `result` must come from this library or be NULL.
 */
void mixclass_result_free(struct MixclassResult *result);

/**
 * # Safety
 * `result` must be a valid handle.
 */
size_t mixclass_result_components(const struct MixclassResult *result);

/**
 * Oracle calls spent by the run.
 *
 * # Safety
 * `result` must be a valid handle.
 */
uint64_t mixclass_result_queries(const struct MixclassResult *result);

/**
 * Copy estimate `t` densely into `out` (length `n`) and its representative
 * coordinate into `rep` (may be NULL).
 *
 * # Safety
 * `out` must hold `n` doubles; `result` must be valid.
 */
enum MixclassStatus mixclass_result_estimate(const struct MixclassResult *result,
                                             size_t t,
                                             double *out,
                                             size_t n,
                                             size_t *rep);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MIXCLASS_H */
