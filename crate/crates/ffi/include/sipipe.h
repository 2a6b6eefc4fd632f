#ifndef SIPIPE_H
#define SIPIPE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum SipStatus {
  SIP_STATUS_OK = 0,
  SIP_STATUS_NULL_POINTER = 1,
  SIP_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Bad pipeline configuration or graph.
   */
  SIP_STATUS_CONFIG_ERROR = 3,
  /**
   * Bad data or covariance.
   */
  SIP_STATUS_INVALID_DATA = 4,
  /**
   * The requested hypothesis cannot be formed from the pipeline output.
   */
  SIP_STATUS_UNTESTABLE = 5,
  /**
   * Degenerate direction, precision loss or sweep failure.
   */
  SIP_STATUS_NUMERICAL_ERROR = 6,
  /**
   * A Rust panic was caught.
   */
  SIP_STATUS_PANIC = 7,
} SipStatus;

/**
 * Opaque data handle (row-major `n x d`).
 */
typedef struct SipData SipData;

/**
 * Opaque pipeline handle.
 */
typedef struct SipPipeline SipPipeline;

/**
 * Outcome of one selective test.
 */
typedef struct SipTestResult {
  int32_t cluster_a;
  int32_t cluster_b;
  double z_obs;
  double sigma_t;
  double p_selective;
  double p_naive;
  double p_bonferroni;
  double p_wopp;
  /**
   * Pieces of the truncation region.
   */
  size_t n_intervals;
} SipTestResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty if none. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *sip_last_error(void);

/**
 * Library version, static storage.
 */
const char *sip_version(void);

/**
 * Parse a pipeline from its JSON configuration.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum SipStatus sip_pipeline_from_json(const char *json, struct SipPipeline **out);

/**
 * # Safety
 * `p` must come from `sip_pipeline_from_json` and not be freed twice.
 */
void sip_pipeline_free(struct SipPipeline *p);

/**
 * Copy `n * d` row-major values into a new data handle.
 *
 * # Safety
 * `values` must point to `n * d` doubles and `out` be a valid pointer.
 */
enum SipStatus sip_data_new(const double *values, size_t n, size_t d, struct SipData **out);

/**
 * # Safety
 * `x` must come from `sip_data_new` and not be freed twice.
 */
void sip_data_free(struct SipData *x);

/**
 * Run the pipeline. Writes one label per row into `labels` (`-1`
 * outlier or noise, `0` unclustered, `1..K` cluster) and one 0/1 flag
 * per feature into `features`.
 *
 * # Safety
 * Handles must be live; `labels` must hold `n` and `features` `d` entries.
 */
enum SipStatus sip_run_pipeline(const struct SipPipeline *p,
                                const struct SipData *x,
                                int32_t *labels,
                                uint8_t *features);

/**
 * Selective test of the mean difference of `feature` between clusters
 * `cluster_a` and `cluster_b` under `Sigma = sigma2 * I`. Passing 0 for
 * both clusters tests the two largest.
 *
 * # Safety
 * Handles must be live and `out` a valid pointer.
 */
enum SipStatus sip_selective_test(const struct SipPipeline *p,
                                  const struct SipData *x,
                                  double sigma2,
                                  int32_t cluster_a,
                                  int32_t cluster_b,
                                  size_t feature,
                                  struct SipTestResult *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SIPIPE_H */
