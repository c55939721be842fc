#ifndef DISPATCH_SIM_H
#define DISPATCH_SIM_H

/* Generated with cbindgen:0.29.4 */

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define DS_SHAPE_SINGLE_STAGE 0

#define DS_SHAPE_TWO_STAGE 1

#define DS_POLICY_RR 0

#define DS_POLICY_JIQ 1

#define DS_POLICY_LWL 2

#define DS_MIGRATION_RESUME 0

#define DS_MIGRATION_RESTART 1

#define DS_JIQ_FALLBACK_RANDOM 0

#define DS_JIQ_FALLBACK_ROUND_ROBIN 1

typedef enum DsStatus {
  DS_STATUS_OK = 0,
  DS_STATUS_NULL_POINTER = 1,
  DS_STATUS_INVALID_ARGUMENT = 2,
  DS_STATUS_IO = 3,
  DS_STATUS_PARSE = 4,
  DS_STATUS_CONFIG = 5,
  DS_STATUS_VALIDATION = 6,
  DS_STATUS_OVERFLOW = 7,
  DS_STATUS_PANIC = 8,
} DsStatus;

/**
 * A finished simulation run.
 */
typedef struct DsRun DsRun;

/**
 * Loaded or generated tasks.
 */
typedef struct DsWorkload DsWorkload;

typedef struct DsWorkloadStats {
  size_t task_count;
  size_t job_count;
  double span_s;
  /**
   * Tasks per second.
   */
  double lambda;
  double mean_cpu_demand;
} DsWorkloadStats;

typedef struct DsSystemConfig {
  /**
   * `DS_SHAPE_*`.
   */
  uint32_t shape;
  size_t n_total;
  /**
   * Two-stage only; 0 for both selects the equal split.
   */
  size_t n_stage1;
  size_t n_stage2;
  /**
   * Per-server speed in GNCU.
   */
  double speed;
  /**
   * Stage-2 speed; 0 uses `speed`.
   */
  double stage2_speed;
  /**
   * Stage-1 threshold in seconds (two-stage only).
   */
  double theta_s;
  /**
   * `DS_POLICY_*`.
   */
  uint32_t single_policy;
  uint32_t stage1_policy;
  uint32_t stage2_policy;
  /**
   * `DS_MIGRATION_*`.
   */
  uint32_t migration;
  /**
   * `DS_JIQ_FALLBACK_*`.
   */
  uint32_t jiq_fallback;
} DsSystemConfig;

typedef struct DsMetricsSummary {
  double mrt_s;
  double mjs;
  size_t job_count;
  size_t task_count;
  double p50_r;
  double p90_r;
  double p99_r;
  double p50_s;
  double p90_s;
  double p99_s;
  double min_s;
} DsMetricsSummary;

typedef struct DsCompletionRecord {
  /**
   * Index of the task in arrival order.
   */
  size_t task;
  uint64_t arrival_ns;
  uint64_t completion_ns;
  /**
   * -1 when absent.
   */
  int64_t stage1_server;
  int64_t stage2_server;
  bool migrated;
  uint64_t stage1_service_ns;
  uint64_t service_received_ns;
} DsCompletionRecord;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *ds_version(void);

/**
 * Message for the most recent failure on this thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *ds_last_error(void);

/**
 * Loads a trace CSV (`job_id,task_id,arrival_s,cpu_gncu_s`), multiplying
 * arrival times by `time_scale`.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum DsStatus ds_workload_load_trace(const char *path, double time_scale, struct DsWorkload **out_workload);

/**
 * Generates a synthetic workload from a spec in config-file syntax.
 *
 * # Safety
 * `spec_toml` must be a NUL-terminated string and `out` a valid pointer.
 */
enum DsStatus ds_workload_generate(const char *spec_toml, struct DsWorkload **out_workload);

/**
 * Number of tasks, or 0 for a null handle.
 *
 * # Safety
 * `workload` must be null or a live handle.
 */
size_t ds_workload_task_count(const struct DsWorkload *workload);

/**
 * Number of distinct jobs, or 0 for a null handle.
 *
 * # Safety
 * `workload` must be null or a live handle.
 */
size_t ds_workload_job_count(const struct DsWorkload *workload);

/**
 * # Safety
 * `workload` must be a live handle and `out_stats` a valid pointer.
 */
enum DsStatus ds_workload_stats(const struct DsWorkload *workload, struct DsWorkloadStats *out_stats);

/**
 * Per-server speed that offers load `rho0` to `n_servers` servers.
 *
 * # Safety
 * `stats` and `out_speed` must be valid pointers.
 */
enum DsStatus ds_derive_service_rate(const struct DsWorkloadStats *stats, size_t n_servers, double rho0, double *out_speed);

/**
 * Fills `out_config` with a single-stage system of `n` servers.
 *
 * # Safety
 * `out_config` must be a valid pointer.
 */
enum DsStatus ds_system_config_single(size_t n, double speed, uint32_t policy_code, struct DsSystemConfig *out_config);

/**
 * Fills `out_config` with an equal-split two-stage system, RR at both
 * stages and resume migration.
 *
 * # Safety
 * `out_config` must be a valid pointer.
 */
enum DsStatus ds_system_config_two_stage(size_t n, double speed, double theta_s, struct DsSystemConfig *out_config);

/**
 * Simulates `workload` on `config`. The run is validated; a run with
 * violations is still returned and reports them through
 * [`ds_run_violation_count`].
 *
 * # Safety
 * `workload` must be a live handle; `config` and `out_run` valid pointers.
 */
enum DsStatus ds_run(const struct DsWorkload *workload, const struct DsSystemConfig *config, uint64_t seed, struct DsRun **out_run);

/**
 * # Safety
 * `run` must be a live handle and `out_summary` a valid pointer.
 */
enum DsStatus ds_run_summary(const struct DsRun *run, struct DsMetricsSummary *out_summary);

/**
 * Number of completion records, or 0 for a null handle.
 *
 * # Safety
 * `run` must be null or a live handle.
 */
size_t ds_run_record_count(const struct DsRun *run);

/**
 * Record `index` in completion order.
 *
 * # Safety
 * `run` must be a live handle and `out_record` a valid pointer.
 */
enum DsStatus ds_run_record(const struct DsRun *run, size_t index, struct DsCompletionRecord *out_record);

/**
 * Validation violations found in the run, or 0 for a null handle.
 *
 * # Safety
 * `run` must be null or a live handle.
 */
size_t ds_run_violation_count(const struct DsRun *run);

/**
 * Writes the per-task records CSV.
 *
 * # Safety
 * `run` must be a live handle and `path` a NUL-terminated string.
 */
enum DsStatus ds_run_write_records(const struct DsRun *run, const char *path);

/**
 * # Safety
 * `workload` must be null or a handle not yet freed.
 */
void ds_workload_free(struct DsWorkload *workload);

/**
 * # Safety
 * `run` must be null or a handle not yet freed.
 */
void ds_run_free(struct DsRun *run);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DISPATCH_SIM_H */
