/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#ifndef CONVDISS_H
#define CONVDISS_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ConvdissStatus {
  CONVDISS_STATUS_OK = 0,
  CONVDISS_STATUS_NULL_POINTER = 1,
  CONVDISS_STATUS_INVALID_UTF8 = 2,
  CONVDISS_STATUS_CONFIG = 3,
  CONVDISS_STATUS_INVALID_ARGUMENT = 4,
  CONVDISS_STATUS_RUNTIME = 5,
  // Index, name or buffer length does not match the data.
  CONVDISS_STATUS_OUT_OF_RANGE = 6,
  // The query does not apply to this run (e.g. blow-up time of a
  // completed run).
  CONVDISS_STATUS_NOT_APPLICABLE = 7,
  CONVDISS_STATUS_PANIC = 8,
} ConvdissStatus;

typedef enum ConvdissRegime {
  CONVDISS_REGIME_DISSIPATIVE = 0,
  CONVDISS_REGIME_BLOW_UP = 1,
  CONVDISS_REGIME_INCONCLUSIVE = 2,
} ConvdissRegime;

// Parsed, validated run configuration.
typedef struct ConvdissConfig ConvdissConfig;

// Finished run with its recorded diagnostics.
typedef struct ConvdissRun ConvdissRun;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Parses a TOML configuration document.
//
// # Safety
// `text` must be a NUL-terminated string and `out` a valid pointer.
enum ConvdissStatus convdiss_config_parse(const char *text, struct ConvdissConfig **out);

// Reads and parses a TOML configuration file.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum ConvdissStatus convdiss_config_load(const char *path, struct ConvdissConfig **out);

// Overrides the final time.
//
// # Safety
// `config` must come from `convdiss_config_parse` or `convdiss_config_load`.
enum ConvdissStatus convdiss_config_set_t_max(struct ConvdissConfig *config, double t_max);

// Overrides the number of grid cells.
//
// # Safety
// `config` must come from `convdiss_config_parse` or `convdiss_config_load`.
enum ConvdissStatus convdiss_config_set_n_cells(struct ConvdissConfig *config, size_t n_cells);

// # Safety
// `config` must be null or a handle not yet freed.
void convdiss_config_free(struct ConvdissConfig *config);

// Integrates the configured problem from its initial data.
//
// # Safety
// `config` must be a live handle and `out` a valid pointer.
enum ConvdissStatus convdiss_run(const struct ConvdissConfig *config, struct ConvdissRun **out);

// # Safety
// `run` must be null or a handle not yet freed.
void convdiss_run_free(struct ConvdissRun *run);

// # Safety
// `run` must be a live handle and `out` a valid pointer.
enum ConvdissStatus convdiss_run_regime(const struct ConvdissRun *run, enum ConvdissRegime *out);

// Detection time and extrapolated blow-up time (NaN when the fit failed).
// Returns `NotApplicable` unless the run blew up.
//
// # Safety
// `run` must be a live handle; `t_detect` and `t_est` valid pointers.
enum ConvdissStatus convdiss_run_blowup_time(const struct ConvdissRun *run,
                                             double *t_detect,
                                             double *t_est);

// Number of recorded samples.
//
// # Safety
// `run` must be a live handle and `out` a valid pointer.
enum ConvdissStatus convdiss_run_sample_count(const struct ConvdissRun *run, size_t *out);

// Number of diagnostic columns.
//
// # Safety
// `run` must be a live handle and `out` a valid pointer.
enum ConvdissStatus convdiss_run_column_count(const struct ConvdissRun *run, size_t *out);

// Name of column `index`. The string lives as long as the run handle.
//
// # Safety
// `run` must be a live handle and `out` a valid pointer.
enum ConvdissStatus convdiss_run_column_name(const struct ConvdissRun *run,
                                             size_t index,
                                             const char **out);

// Copies the sample times into `buf`; `len` must equal the sample count.
//
// # Safety
// `run` must be a live handle and `buf` valid for `len` writes.
enum ConvdissStatus convdiss_run_times(const struct ConvdissRun *run, double *buf, size_t len);

// Copies the column called `name` (e.g. "L2", "Linf", "H1") into `buf`;
// `len` must equal the sample count.
//
// # Safety
// `run` must be a live handle, `name` a NUL-terminated string and `buf`
// valid for `len` writes.
enum ConvdissStatus convdiss_run_column(const struct ConvdissRun *run,
                                        const char *name,
                                        double *buf,
                                        size_t len);

// Fits `y^{-q_eff}` linearly in `t` and returns its zero crossing.
//
// # Safety
// `t` and `y` must be valid for `n` reads and `out` a valid pointer.
enum ConvdissStatus convdiss_estimate_blowup_time(const double *t,
                                                  const double *y,
                                                  size_t n,
                                                  double q_eff,
                                                  double *out);

// Message of the last failure on this thread, empty if none. Valid until
// the next failing call on the same thread.
const char *convdiss_last_error(void);

const char *convdiss_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CONVDISS_H */
