#ifndef AOI_TOOLKIT_H
#define AOI_TOOLKIT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum AoiStatus {
  AOI_STATUS_OK = 0,
  AOI_STATUS_INVALID_PARAMETER = 2,
  AOI_STATUS_NUMERIC_DOMAIN = 3,
  AOI_STATUS_INTERNAL = 4,
  AOI_STATUS_NULL_POINTER = 5,
  AOI_STATUS_PANIC = 6,
} AoiStatus;

typedef enum AoiPolicyKind {
  AOI_POLICY_KIND_SECOND_ORDER_OPTIMAL = 0,
  AOI_POLICY_KIND_SLOTTED_ALOHA = 1,
  AOI_POLICY_KIND_OPTIMAL_ALOHA = 2,
  AOI_POLICY_KIND_AGE_THRESHOLD_ALOHA = 3,
} AoiPolicyKind;

/**
 * Opaque result of [`aoi_optimize`].
 */
typedef struct AoiOptimization AoiOptimization;

/**
 * Opaque result of [`aoi_simulate`].
 */
typedef struct AoiSimulation AoiSimulation;

typedef struct AoiNetworkConfig {
  /**
   * Active users per cluster.
   */
  uint32_t n;
  /**
   * Number of clusters.
   */
  uint32_t c;
  /**
   * AoI moment order.
   */
  uint32_t z;
  /**
   * Weight of the active users' moment.
   */
  double w;
} AoiNetworkConfig;

typedef struct AoiAnalysis {
  double lambda;
  double theta;
  double m_a;
  double v2_a;
  double m_p;
  double v2_p;
  double active_moment;
  double passive_moment;
  double objective;
} AoiAnalysis;

typedef struct AoiTracePoint {
  double lambda;
  double r;
  double s;
  double objective;
} AoiTracePoint;

typedef struct AoiSimParams {
  uint64_t slots;
  uint32_t runs;
  uint64_t base_seed;
  uint64_t warmup_slots;
  uint64_t batch_length;
} AoiSimParams;

/**
 * Aggregate of a simulation, or one run of it (`run_index` is -1 for the aggregate).
 */
typedef struct AoiSimSummary {
  int64_t run_index;
  double active_moment;
  double passive_moment;
  double objective;
  double m_a;
  double v2_a;
  double m_p;
  double v2_p;
} AoiSimSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call into this library on the same thread.
 */
const char *aoi_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *aoi_version(void);

/**
 * Second-order statistics, AoI moments and objective for the chain `(r, s)`.
 *
 * # Safety
 * `config` must point to a valid config and `out` to writable memory.
 */
enum AoiStatus aoi_analyze(const struct AoiNetworkConfig *config,
                           double r,
                           double s,
                           struct AoiAnalysis *out);

/**
 * `E[AoI^z]` from a delivery process with the given mean and temporal variance.
 *
 * # Safety
 * `out` must point to writable memory.
 */
enum AoiStatus aoi_aoi_moment(double mean, double temporal_variance, uint32_t z, double *out);

/**
 * Smallest positive roots of the active (`alpha`) and passive (`beta`) cubics.
 *
 * # Safety
 * `alpha` and `beta` must point to writable memory.
 */
enum AoiStatus aoi_roots(uint32_t n, uint32_t c, double *alpha, double *beta);

/**
 * Line search over `λ ∈ (0, 1/N]` with `s = 1`. On success `*out` owns a handle
 * to release with [`aoi_optimization_free`].
 *
 * # Safety
 * `config` must point to a valid config and `out` to writable memory.
 */
enum AoiStatus aoi_optimize(const struct AoiNetworkConfig *config,
                            double precision,
                            struct AoiOptimization **out);

/**
 * Optimal point as a trace point (`lambda*`, `r*`, `s*`, `F`).
 *
 * # Safety
 * `handle` must come from [`aoi_optimize`] and not be freed; `out` must be writable.
 */
enum AoiStatus aoi_optimization_best(const struct AoiOptimization *handle,
                                     struct AoiTracePoint *out);

/**
 * Number of evaluated line-search points (0 for a null handle).
 *
 * # Safety
 * `handle` must be null or come from [`aoi_optimize`] and not be freed.
 */
size_t aoi_optimization_trace_len(const struct AoiOptimization *handle);

/**
 * # Safety
 * `handle` must come from [`aoi_optimize`] and not be freed; `out` must be writable.
 */
enum AoiStatus aoi_optimization_trace_point(const struct AoiOptimization *handle,
                                            size_t index,
                                            struct AoiTracePoint *out);

/**
 * # Safety
 * `handle` must be null or come from [`aoi_optimize`]; it must not be used afterwards.
 */
void aoi_optimization_free(struct AoiOptimization *handle);

/**
 * Default simulation parameters (10 runs of 100 000 slots).
 */
struct AoiSimParams aoi_sim_params_default(void);

/**
 * Builds `policy` for `config` and simulates it. `precision` is the line-search
 * and ALOHA-sweep resolution. On success `*out` owns a handle to release with
 * [`aoi_simulation_free`].
 *
 * # Safety
 * `config` and `params` must point to valid values and `out` to writable memory.
 */
enum AoiStatus aoi_simulate(const struct AoiNetworkConfig *config,
                            enum AoiPolicyKind policy,
                            double precision,
                            const struct AoiSimParams *params,
                            struct AoiSimulation **out);

/**
 * Run-averaged results.
 *
 * # Safety
 * `handle` must come from [`aoi_simulate`] and not be freed; `out` must be writable.
 */
enum AoiStatus aoi_simulation_summary(const struct AoiSimulation *handle,
                                      struct AoiSimSummary *out);

/**
 * Number of runs held by the handle (0 for a null handle).
 *
 * # Safety
 * `handle` must be null or come from [`aoi_simulate`] and not be freed.
 */
size_t aoi_simulation_run_count(const struct AoiSimulation *handle);

/**
 * # Safety
 * `handle` must come from [`aoi_simulate`] and not be freed; `out` must be writable.
 */
enum AoiStatus aoi_simulation_run(const struct AoiSimulation *handle,
                                  size_t index,
                                  struct AoiSimSummary *out);

/**
 * # Safety
 * `handle` must be null or come from [`aoi_simulate`]; it must not be used afterwards.
 */
void aoi_simulation_free(struct AoiSimulation *handle);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* AOI_TOOLKIT_H */
