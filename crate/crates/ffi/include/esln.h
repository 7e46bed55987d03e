#ifndef ESLN_H
#define ESLN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  ESLN_SERIES_TIME = 0,
  ESLN_SERIES_SX = 1,
  ESLN_SERIES_SY = 2,
  ESLN_SERIES_SZ = 3,
  ESLN_SERIES_TRACE_RE = 4,
  ESLN_SERIES_TRACE_IM = 5,
  ESLN_SERIES_SX_ERR = 6,
  ESLN_SERIES_SY_ERR = 7,
  ESLN_SERIES_SZ_ERR = 8,
  ESLN_SERIES_TRACE_ERR = 9,
} EslnSeries;

typedef enum {
  ESLN_STATUS_OK = 0,
  ESLN_STATUS_NULL_POINTER = 1,
  ESLN_STATUS_INVALID_UTF8 = 2,
  ESLN_STATUS_INVALID_CONFIG = 3,
  ESLN_STATUS_UNKNOWN_SCENARIO = 4,
  ESLN_STATUS_DOMAIN = 5,
  ESLN_STATUS_NUMERICAL = 6,
  ESLN_STATUS_WINDOW = 7,
  ESLN_STATUS_IO = 8,
  ESLN_STATUS_BUFFER_TOO_SMALL = 9,
  /*
   The run finished but exceeded the exclusion budget.
   */
  ESLN_STATUS_UNRELIABLE = 10,
  ESLN_STATUS_PANIC = 99,
} EslnStatus;

/*
 Run configuration.
 */
typedef struct EslnConfig EslnConfig;

/*
 Ensemble averages of one run.
 */
typedef struct EslnResult EslnResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failure on this thread, or null. Valid until the next
 failing call on the same thread.
 */
const char *esln_last_error(void);

/*
 Creates a configuration with the defaults of `scenario`.

 # Safety
 `scenario` must be a NUL-terminated string and `out` a valid pointer.
 */
EslnStatus esln_config_new(const char *scenario, EslnConfig **out);

/*
 Sets one `key = value` entry.

 # Safety
 `config` must come from [`esln_config_new`]; `key` and `value` must be
 NUL-terminated strings.
 */
EslnStatus esln_config_set(EslnConfig *config, const char *key, const char *value);

/*
 # Safety
 `config` must come from [`esln_config_new`] or be null.
 */
void esln_config_free(EslnConfig *config);

/*
 Runs the configured ensemble in memory. A result is returned even when it
 is flagged unreliable, together with [`EslnStatus::Unreliable`].

 # Safety
 `config` must come from [`esln_config_new`] and `out` be a valid pointer.
 */
EslnStatus esln_run_ensemble(const EslnConfig *config, EslnResult **out);

/*
 Runs the configured scenario and writes its files to the `out` directory.

 # Safety
 `config` must come from [`esln_config_new`].
 */
EslnStatus esln_run_scenario(const EslnConfig *config);

/*
 Number of grid nodes in the result, or 0 for a null handle.

 # Safety
 `result` must come from [`esln_run_ensemble`] or be null.
 */
uintptr_t esln_result_len(const EslnResult *result);

/*
 Trajectories excluded from the average, or 0 for a null handle.

 # Safety
 `result` must come from [`esln_run_ensemble`] or be null.
 */
uintptr_t esln_result_excluded(const EslnResult *result);

/*
 Copies one series into `buf`, which must hold [`esln_result_len`] values.
 Error series are NaN when the run had fewer samples than batches.

 # Safety
 `result` must come from [`esln_run_ensemble`]; `buf` must be valid for
 `len` writes.
 */
EslnStatus esln_result_copy(const EslnResult *result,
                            EslnSeries series,
                            double *buf,
                            uintptr_t len);

/*
 # Safety
 `result` must come from [`esln_run_ensemble`] or be null.
 */
void esln_result_free(EslnResult *result);

/*
 Asymptotic Landau-Zener ⟨σ_z⟩ for an isolated spin.

 # Safety
 `out` must be a valid pointer.
 */
EslnStatus esln_lz_limit(double delta, double kappa, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ESLN_H */
