/* C interface to the loschmidt simulation library. */

#ifndef LOSCHMIDT_H
#define LOSCHMIDT_H

/* Generated by cbindgen from loschmidt-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every fallible function.
typedef enum {
  // Success.
  LSCH_OK = 0,
  // Invalid configuration (parse error, bad value, missing seed).
  LSCH_ERR_CONFIG = 1,
  // A numerical invariant was violated during the run.
  LSCH_ERR_NUMERIC = 2,
  // File I/O failed.
  LSCH_ERR_IO = 3,
  // A required pointer argument was null.
  LSCH_ERR_NULL_ARG = 4,
  // The caller-provided buffer is too small.
  LSCH_ERR_BUFFER_TOO_SMALL = 5,
  // A string argument was not valid UTF-8.
  LSCH_ERR_UTF8 = 6,
  // Unexpected internal failure.
  LSCH_ERR_INTERNAL = 7,
} lsch_status;

// Opaque experiment handle; create with `lsch_experiment_parse` or
// `lsch_experiment_load`, release with `lsch_experiment_free`.
typedef struct lsch_experiment lsch_experiment;

// One sample of the computed time series; field order matches the CSV
// columns emitted by the CLI.
typedef struct {
  double t;
  double coherence_re;
  double coherence_im;
  double coherence_abs;
  double fidelity_re;
  double fidelity_im;
  double fidelity_abs;
  double identity_residual;
} lsch_record;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Returns the library version as a static NUL-terminated string.
const char *lsch_version(void);

// Returns the message for the most recent non-OK status on this thread,
// or an empty string if none. The pointer stays valid until the next
// failing call on the same thread.
const char *lsch_last_error(void);

// Parses a configuration from text into a new experiment handle.
//
// # Safety
// `text` must be a valid NUL-terminated string and `out` a valid pointer.
lsch_status lsch_experiment_parse(const char *text, lsch_experiment **out);

// Loads a configuration file into a new experiment handle.
//
// # Safety
// `path` must be a valid NUL-terminated string and `out` a valid pointer.
lsch_status lsch_experiment_load(const char *path, lsch_experiment **out);

// Overrides the experiment seed, as the CLI `--seed` flag does.
//
// # Safety
// `exp` must be a live handle from `lsch_experiment_parse` or
// `lsch_experiment_load`.
lsch_status lsch_experiment_set_seed(lsch_experiment *exp, uint64_t seed);

// Computes the time series for the experiment and stores it in the handle.
// On success the records are available through `lsch_experiment_points`
// and `lsch_experiment_records`.
//
// # Safety
// `exp` must be a live handle.
lsch_status lsch_experiment_run(lsch_experiment *exp);

// Returns the number of records produced by the last successful run,
// or 0 if the experiment has not run (or `exp` is null).
//
// # Safety
// `exp` must be null or a live handle.
size_t lsch_experiment_points(const lsch_experiment *exp);

// Copies the records of the last successful run into `buf`. `capacity` is
// the number of `lsch_record` slots in `buf`; it must be at least
// `lsch_experiment_points(exp)`.
//
// # Safety
// `exp` must be a live handle and `buf` must point to at least `capacity`
// writable `lsch_record` slots.
lsch_status lsch_experiment_records(const lsch_experiment *exp, lsch_record *buf, size_t capacity);

// Returns summary statistics of the last successful run: the largest
// identity residual and the fitted decay rate. Either output pointer may
// be null to skip that value.
//
// # Safety
// `exp` must be a live handle; non-null outputs must be writable.
lsch_status lsch_experiment_summary(const lsch_experiment *exp,
                                    double *max_residual,
                                    double *fitted_decay_rate);

// Runs the experiment and writes the time series as CSV to `path`,
// equivalent to `loschmidt run --quiet --out <path>`. The handle's stored
// records are refreshed on success.
//
// # Safety
// `exp` must be a live handle and `path` a valid NUL-terminated string.
lsch_status lsch_experiment_run_csv(lsch_experiment *exp, const char *path);

// Releases an experiment handle. Passing null is a no-op.
//
// # Safety
// `exp` must be null or a handle not freed before.
void lsch_experiment_free(lsch_experiment *exp);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LOSCHMIDT_H */
