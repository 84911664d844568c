/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef WSN_ENERGY_H
#define WSN_ENERGY_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum WsnPhase {
  WSN_PHASE_INITIALIZATION = 0,
  WSN_PHASE_COLLECTION = 1,
  WSN_PHASE_MAINTENANCE = 2,
} WsnPhase;

typedef enum WsnStatus {
  WSN_STATUS_OK = 0,
  WSN_STATUS_NULL_POINTER = 1,
  WSN_STATUS_INVALID_ARGUMENT = 2,
  WSN_STATUS_INVALID_CONFIG = 3,
  WSN_STATUS_RANK_DEFICIENT = 4,
  WSN_STATUS_SINGULARITY = 5,
  WSN_STATUS_PARSE = 6,
  WSN_STATUS_IO = 7,
  WSN_STATUS_OUT_OF_RANGE = 8,
  WSN_STATUS_OTHER = 9,
  WSN_STATUS_PANIC = 10,
} WsnStatus;

// Fit report handle.
typedef struct WsnFit WsnFit;

// Scenario configuration handle.
typedef struct WsnScenario WsnScenario;

// Slice trace handle.
typedef struct WsnTrace WsnTrace;

typedef struct WsnSliceRecord {
  uint32_t slice;
  enum WsnPhase phase;
  // Individual, Local, Global, Environment, Sink.
  double flows[5];
  double energy_j;
  uint32_t alive_nodes;
} WsnSliceRecord;

typedef struct WsnFitSummary {
  double mape_pct;
  double max_pct_error;
  // Index of the dominant constituent (0 Individual .. 4 Sink).
  uint32_t dominant;
  uint64_t observations;
  double condition;
} WsnFitSummary;

typedef struct WsnUsage {
  uint64_t b_cpu;
  uint64_t b_mem;
  uint64_t b_rx;
  uint64_t b_tx;
  uint64_t b_sens;
} WsnUsage;

typedef struct WsnPowerProfile {
  double p_cpu;
  double p_mem;
  double p_rx;
  double p_tx;
  double p_sens;
} WsnPowerProfile;

typedef struct WsnRadioParams {
  double e_t_elec;
  double e_r_elec;
  double eps_fs;
  double eps_mp;
  double eps_amp;
  double alpha_pl;
  // Crossover distance; NaN derives it from `eps_fs` and `eps_mp`.
  double d0;
} WsnRadioParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failure on this thread, or NULL. Valid until the
// next failing call on this thread.
const char *wsn_last_error(void);

// Library version as a static NUL-terminated string.
const char *wsn_version(void);

// A scenario with every default.
struct WsnScenario *wsn_scenario_default(void);

// Parses and validates a TOML scenario.
//
// # Safety
// `toml` must be a NUL-terminated string; `out` must be writable.
enum WsnStatus wsn_scenario_from_toml(const char *toml, struct WsnScenario **out);

// # Safety
// `scenario` must be a live handle.
enum WsnStatus wsn_scenario_set_seed(struct WsnScenario *scenario, uint64_t seed);

// Sets a sweepable parameter by name. The change is rejected, leaving the
// scenario untouched, if it breaks a boundary.
//
// # Safety
// `scenario` must be a live handle; `key` a NUL-terminated string.
enum WsnStatus wsn_scenario_set_parameter(struct WsnScenario *scenario,
                                          const char *key,
                                          double value);

// # Safety
// `scenario` must be NULL or a handle not yet freed.
void wsn_scenario_free(struct WsnScenario *scenario);

// Runs the scenario to completion.
//
// # Safety
// `scenario` must be a live handle; `out` must be writable.
enum WsnStatus wsn_simulate(const struct WsnScenario *scenario, struct WsnTrace **out);

// Number of slices, 0 for NULL.
//
// # Safety
// `trace` must be NULL or a live handle.
size_t wsn_trace_len(const struct WsnTrace *trace);

// # Safety
// `trace` must be a live handle; `out` must be writable.
enum WsnStatus wsn_trace_record(const struct WsnTrace *trace,
                                size_t index,
                                struct WsnSliceRecord *out);

// # Safety
// `trace` must be a live handle; `path` a NUL-terminated string.
enum WsnStatus wsn_trace_write_csv(const struct WsnTrace *trace, const char *path);

// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum WsnStatus wsn_trace_read_csv(const char *path, struct WsnTrace **out);

// # Safety
// `trace` must be NULL or a handle not yet freed.
void wsn_trace_free(struct WsnTrace *trace);

// Least-squares fit of a trace. `mask_bits` selects constituents (bit 0
// Individual .. bit 4 Sink); `train_fraction` in (0, 1] is the leading share
// of slices fitted, the rest held out for the error summary.
//
// # Safety
// `trace` must be a live handle; `out` must be writable.
enum WsnStatus wsn_fit_trace(const struct WsnTrace *trace,
                             uint32_t mask_bits,
                             double train_fraction,
                             struct WsnFit **out);

// Writes the five coefficients (zero for inactive constituents).
//
// # Safety
// `fit` must be a live handle; `out` must point to 5 writable doubles.
enum WsnStatus wsn_fit_coefficients(const struct WsnFit *fit, double *out);

// # Safety
// `fit` must be a live handle; `out` must be writable.
enum WsnStatus wsn_fit_summary(const struct WsnFit *fit, struct WsnFitSummary *out);

// # Safety
// `fit` must be NULL or a handle not yet freed.
void wsn_fit_free(struct WsnFit *fit);

// Energy of one task from its resource usage.
//
// # Safety
// Pointers must be valid.
enum WsnStatus wsn_task_energy(const struct WsnUsage *usage,
                               const struct WsnPowerProfile *profile,
                               double *out);

// Overall energy `sum alpha_k * b_k` over the constituents in `mask_bits`.
//
// # Safety
// `alpha` and `flows` must each point to 5 readable doubles.
enum WsnStatus wsn_overall_energy(const double *alpha,
                                  const double *flows,
                                  uint32_t mask_bits,
                                  double *out);

// Default radio parameters.
struct WsnRadioParams wsn_radio_default(void);

// Distance beyond which relaying through a midpoint uses less energy than
// one direct hop.
//
// # Safety
// Pointers must be valid.
enum WsnStatus wsn_relay_threshold(const struct WsnRadioParams *params, double *out);

// Transmit energy per bit over distance `d`.
//
// # Safety
// Pointers must be valid.
enum WsnStatus wsn_tx_energy_per_bit(const struct WsnRadioParams *params, double d, double *out);

// Name of constituent `index` (0..4) as a static string, NULL if out of range.
const char *wsn_constituent_name(uint32_t index);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WSN_ENERGY_H */
