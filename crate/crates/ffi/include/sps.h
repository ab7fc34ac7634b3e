#ifndef SPS_H
#define SPS_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes. Values 2 to 5 coincide with the `sps` exit codes.
 */
typedef enum {
  SPS_STATUS_OK = 0,
  SPS_STATUS_NULL_POINTER = 1,
  SPS_STATUS_CONFIG = 2,
  SPS_STATUS_NUMERICAL = 3,
  SPS_STATUS_UNBOUNDED = 4,
  SPS_STATUS_VERIFICATION = 5,
  SPS_STATUS_PARSE = 6,
  SPS_STATUS_IO = 7,
  SPS_STATUS_BUFFER_TOO_SMALL = 8,
  SPS_STATUS_PANIC = 9,
} SpsStatus;

/**
 * Opaque field handle.
 */
typedef struct SpsField SpsField;

/**
 * Opaque grid handle.
 */
typedef struct SpsGrid SpsGrid;

/**
 * Opaque handle to a finished minimization.
 */
typedef struct SpsGroundState SpsGroundState;

typedef struct {
  double kinetic;
  double hartree;
  double potential;
  double total;
  double l2_sq;
  double lp_p;
  double h_half_sq;
  double hdot_half_sq;
  double h_minus_half_sq;
  double d_value;
} SpsEnergy;

typedef struct {
  double virial_residual;
  double virial_relative;
  double pohozaev_residual;
  double pohozaev_relative;
  double el_residual_rel;
  double omega;
} SpsIdentityReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message (NUL-terminated) into `buf`. Returns the
 * message length in bytes excluding the terminator; nothing is written
 * when `buf` is null or `len` is too small.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
size_t sps_last_error_message(char *buf, size_t len);

/**
 * Library version, a static NUL-terminated string.
 */
const char *sps_version(void);

/**
 * # Safety
 * `out` must be valid for writing a pointer.
 */
SpsStatus sps_grid_new(size_t n, double box_length, SpsGrid **out);

/**
 * # Safety
 * `grid` must be null or a handle from [`sps_grid_new`] not yet freed.
 */
void sps_grid_free(SpsGrid *grid);

/**
 * Number of grid points `n³`.
 *
 * # Safety
 * `grid` must be a live handle.
 */
size_t sps_grid_len(const SpsGrid *grid);

/**
 * `A·exp(−|x|²/w²)` centered in the box.
 *
 * # Safety
 * `grid` must be a live handle, `out` valid for writing a pointer.
 */
SpsStatus sps_field_gaussian(const SpsGrid *grid, double amplitude, double width, SpsField **out);

/**
 * Builds a field from `len = 2n³` doubles holding `(re, im)` pairs,
 * x fastest.
 *
 * # Safety
 * `values` must be valid for reading `len` doubles.
 */
SpsStatus sps_field_from_values(const SpsGrid *grid,
                                const double *values,
                                size_t len,
                                SpsField **out);

/**
 * Writes the `(re, im)` pairs of `field` into `buf` (`len = 2n³`).
 *
 * # Safety
 * `buf` must be valid for writing `len` doubles.
 */
SpsStatus sps_field_values(const SpsField *field, double *buf, size_t len);

/**
 * `‖u‖₂²`, or NaN for a null handle.
 *
 * # Safety
 * `field` must be null or a live handle.
 */
double sps_field_mass(const SpsField *field);

/**
 * # Safety
 * `field` must be null or a handle not yet freed.
 */
void sps_field_free(SpsField *field);

/**
 * # Safety
 * `path` must be a NUL-terminated string, `out` valid for writing.
 */
SpsStatus sps_field_read(const char *path, SpsField **out);

/**
 * # Safety
 * `field` must be a live handle, `path` a NUL-terminated string.
 */
SpsStatus sps_field_write(const SpsField *field, const char *path);

/**
 * Energy breakdown with `ρ` taken from the field.
 *
 * # Safety
 * `field` must be a live handle, `out` valid for writing.
 */
SpsStatus sps_energy(const SpsField *field,
                     double alpha,
                     double beta,
                     double p,
                     bool homogeneous,
                     SpsEnergy *out);

/**
 * Identity residuals; `omega` is extracted from the field when NaN.
 *
 * # Safety
 * `field` must be a live handle, `out` valid for writing.
 */
SpsStatus sps_identity_report(const SpsField *field,
                              double alpha,
                              double beta,
                              double p,
                              double omega,
                              SpsIdentityReport *out);

/**
 * Weinstein quotient of `field`.
 *
 * # Safety
 * `field` must be a live handle, `out` valid for writing.
 */
SpsStatus sps_weinstein_quotient(const SpsField *field, double *out);

/**
 * Minimizes from the default Gaussian start; other settings keep their
 * library defaults. `max_iters = 0` returns the projected start.
 *
 * # Safety
 * `grid` must be a live handle, `out` valid for writing.
 */
SpsStatus sps_minimize(const SpsGrid *grid,
                       double alpha,
                       double beta,
                       double p,
                       double rho,
                       size_t max_iters,
                       double grad_tol,
                       SpsGroundState **out);

/**
 * # Safety
 * `state` must be a live handle, the outputs valid for writing.
 */
SpsStatus sps_ground_state_summary(const SpsGroundState *state,
                                   double *energy,
                                   double *omega,
                                   bool *converged,
                                   size_t *iterations);

/**
 * Copies the minimizer into a new field handle.
 *
 * # Safety
 * `state` must be a live handle, `out` valid for writing.
 */
SpsStatus sps_ground_state_field(const SpsGroundState *state, SpsField **out);

/**
 * # Safety
 * `state` must be null or a handle not yet freed.
 */
void sps_ground_state_free(SpsGroundState *state);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPS_H */
