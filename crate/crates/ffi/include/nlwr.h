#ifndef NLWR_H
#define NLWR_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

/**
 * Result codes. `Io`, `Config` and `Numerical` share their values with the
 * exit codes of the `nlwr` binary.
 */
typedef enum NlwrStatus {
  NLWR_STATUS_OK = 0,
  NLWR_STATUS_IO = 1,
  NLWR_STATUS_CONFIG = 2,
  NLWR_STATUS_NUMERICAL = 3,
  NLWR_STATUS_DOMAIN = 4,
  NLWR_STATUS_NULL_POINTER = 5,
  NLWR_STATUS_INVALID_UTF8 = 6,
  NLWR_STATUS_BUFFER_TOO_SMALL = 7,
  NLWR_STATUS_PANIC = 8,
} NlwrStatus;

/**
 * Opaque time-stepping session created by [`nlwr_simulation_new`].
 */
typedef struct NlwrSimulation NlwrSimulation;

/**
 * Message of the last failed call on this thread, or null if none. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *nlwr_last_error(void);

/**
 * Library version as a static nul-terminated string.
 */
const char *nlwr_version(void);

/**
 * Create a session from a run config in JSON form. The session starts at
 * level 0 with the discretized initial data.
 *
 * # Safety
 * `config_json` must be a nul-terminated string and `out` a valid pointer.
 * The handle written to `*out` must be released with
 * [`nlwr_simulation_free`].
 */
enum NlwrStatus nlwr_simulation_new(const char *config_json, struct NlwrSimulation **out);

/**
 * Release a session. Null is accepted and ignored.
 *
 * # Safety
 * `sim` must be null or a handle from [`nlwr_simulation_new`] that has not
 * been freed.
 */
void nlwr_simulation_free(struct NlwrSimulation *sim);

/**
 * Advance `steps` levels. On a numerical failure the session keeps the
 * last finite level.
 *
 * # Safety
 * `sim` must be a live handle not used concurrently from another thread.
 */
enum NlwrStatus nlwr_simulation_step(struct NlwrSimulation *sim, uint64_t steps);

/**
 * Current time level `n`.
 *
 * # Safety
 * `sim` must be a live handle and `out` a valid pointer.
 */
enum NlwrStatus nlwr_simulation_level(const struct NlwrSimulation *sim, uint64_t *out);

/**
 * Current time `n * tau`.
 *
 * # Safety
 * `sim` must be a live handle and `out` a valid pointer.
 */
enum NlwrStatus nlwr_simulation_time(const struct NlwrSimulation *sim, double *out);

/**
 * Mesh width and time step.
 *
 * # Safety
 * `sim` must be a live handle; `h` and `tau` must be valid pointers.
 */
enum NlwrStatus nlwr_simulation_steps(const struct NlwrSimulation *sim, double *h, double *tau);

/**
 * Number of cells on the padded grid.
 *
 * # Safety
 * `sim` must be a live handle and `out` a valid pointer.
 */
enum NlwrStatus nlwr_simulation_len(const struct NlwrSimulation *sim, size_t *out);

/**
 * Copy the cell averages of the current level into `buf`. `*len` receives
 * the cell count even when `capacity` is too small.
 *
 * # Safety
 * `sim` must be a live handle, `len` a valid pointer and `buf` valid for
 * `capacity` writes.
 */
enum NlwrStatus nlwr_simulation_values(const struct NlwrSimulation *sim,
                                       double *buf,
                                       size_t capacity,
                                       size_t *len);

/**
 * Copy the cell centres matching [`nlwr_simulation_values`] into `buf`.
 *
 * # Safety
 * Same contract as [`nlwr_simulation_values`].
 */
enum NlwrStatus nlwr_simulation_cell_centers(const struct NlwrSimulation *sim,
                                             double *buf,
                                             size_t capacity,
                                             size_t *len);

/**
 * Quadrature weights `w_0..w_{m-1}` for a kernel profile (`linear`,
 * `exponential`, `constant`) and rule (`left`, `normalized-left`,
 * `exact`). `*len` receives `m` even when `capacity` is too small.
 *
 * # Safety
 * `kernel` and `rule` must be nul-terminated strings, `len` a valid
 * pointer and `buf` valid for `capacity` writes.
 */
enum NlwrStatus nlwr_weights(const char *kernel,
                             const char *rule,
                             double delta,
                             double h,
                             double *buf,
                             size_t capacity,
                             size_t *len);

/**
 * Numerical flux `g(rho_l, rho_r, q_l, q_r)` for `lf`, `godunov` or `mlf`.
 * `alpha` is ignored by `godunov`.
 *
 * # Safety
 * `flux` must be a nul-terminated string and `out` a valid pointer.
 */
enum NlwrStatus nlwr_flux_eval(const char *flux,
                               double alpha,
                               double rho_l,
                               double rho_r,
                               double q_l,
                               double q_r,
                               double *out);

/**
 * Total variation `sum |v_{j+1} - v_j|` of `len` values.
 *
 * # Safety
 * `values` must be valid for `len` reads (may be null when `len` is 0) and
 * `out` a valid pointer.
 */
enum NlwrStatus nlwr_total_variation(const double *values, size_t len, double *out);

#endif  /* NLWR_H */
