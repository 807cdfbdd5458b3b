#ifndef LOCQ_H
#define LOCQ_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum LocqStatus {
  LOCQ_STATUS_OK = 0,
  LOCQ_STATUS_NULL_POINTER = 1,
  LOCQ_STATUS_INVALID_UTF8 = 2,
  /**
   * Bad configuration or arguments (CLI exit code 2).
   */
  LOCQ_STATUS_CONFIG = 3,
  /**
   * Failure while running (CLI exit code 3).
   */
  LOCQ_STATUS_RUNTIME = 4,
  LOCQ_STATUS_PANIC = 5,
} LocqStatus;

/**
 * A parsed experiment configuration.
 */
typedef struct LocqExperiment LocqExperiment;

/**
 * A pure state.
 */
typedef struct LocqState LocqState;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. Valid until
 * the next call into the library from this thread.
 */
const char *locq_last_error(void);

/**
 * Library version as a static string.
 */
const char *locq_version(void);

/**
 * Releases a string returned by the library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void locq_string_free(char *s);

/**
 * Builds a state from a JSON family spec such as `{"family": "ghz", "n": 4}`.
 *
 * # Safety
 * `spec` must be a NUL-terminated string; `out` must be writable.
 */
enum LocqStatus locq_state_from_spec(const char *spec, struct LocqState **out_state);

/**
 * Builds a state from `2^n` amplitudes (normalized on the way in).
 *
 * # Safety
 * `re` and `im` must each point to `2^n` doubles; `out` must be writable.
 */
enum LocqStatus locq_state_from_amplitudes(size_t n,
                                           const double *re,
                                           const double *im,
                                           struct LocqState **out_state);

/**
 * # Safety
 * `state` must come from this library and not have been freed; null is ignored.
 */
void locq_state_free(struct LocqState *state);

/**
 * Number of qubits, or 0 for a null handle.
 *
 * # Safety
 * `state` must be a live handle or null.
 */
size_t locq_state_num_qubits(const struct LocqState *state);

/**
 * Copies the `2^n` amplitudes into `re` / `im`; `len` is their capacity.
 *
 * # Safety
 * `re` and `im` must each have room for `len` doubles.
 */
enum LocqStatus locq_state_amplitudes(const struct LocqState *state,
                                      double *re,
                                      double *im,
                                      size_t len);

/**
 * Exact localizable quantumness with `A` given by `a` (qubit indices) and
 * the rest measured. `oracle` is JSON such as `{"kind": "separable",
 * "cut": [0]}` or `{"kind": "stabilizer"}`; `basis` is `"fixed-z"`,
 * `"random"` or a Pauli string over `B`.
 *
 * # Safety
 * `a` must point to `a_len` indices; strings must be NUL-terminated.
 */
enum LocqStatus locq_localizable_quantumness(const struct LocqState *state,
                                             const size_t *a,
                                             size_t a_len,
                                             const char *oracle,
                                             const char *basis,
                                             double *out_value);

/**
 * Spectral gap of the fidelity observable with `A` the leading `n_a` qubits.
 *
 * # Safety
 * `state` must be a live handle; `out_gap` writable.
 */
enum LocqStatus locq_fidelity_gap(const struct LocqState *state, size_t n_a, double *out_gap);

/**
 * Median-of-means layout `(B, K)` for variance `sigma2`, accuracy `epsilon`
 * and failure probability `delta`.
 *
 * # Safety
 * `out_b` and `out_k` must be writable.
 */
enum LocqStatus locq_mom_parameters(double sigma2,
                                    double epsilon,
                                    double delta,
                                    size_t *out_b,
                                    size_t *out_k);

/**
 * Parses and validates an experiment config (same schema as the CLI).
 *
 * # Safety
 * `json` must be NUL-terminated; `out_experiment` writable.
 */
enum LocqStatus locq_experiment_from_json(const char *json, struct LocqExperiment **out_experiment);

/**
 * # Safety
 * `experiment` must come from this library and not have been freed; null is ignored.
 */
void locq_experiment_free(struct LocqExperiment *experiment);

/**
 * Replaces the master seed.
 *
 * # Safety
 * `experiment` must be a live handle.
 */
enum LocqStatus locq_experiment_set_seed(struct LocqExperiment *experiment, uint64_t seed);

/**
 * Runs the experiment on `workers` threads (0 = default) and returns the
 * `summary.json` text through `out_summary`. When `out_dir` is non-null all
 * artifacts are also written there.
 *
 * # Safety
 * `experiment` must be a live handle; `out_dir` null or NUL-terminated;
 * `out_summary` writable. Free the summary with [`locq_string_free`].
 */
enum LocqStatus locq_experiment_run(const struct LocqExperiment *experiment,
                                    size_t workers,
                                    const char *out_dir,
                                    char **out_summary);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LOCQ_H */
