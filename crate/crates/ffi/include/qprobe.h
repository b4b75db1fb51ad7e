#ifndef QPROBE_H
#define QPROBE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum QpStatus {
  QP_STATUS_OK = 0,
  QP_STATUS_NULL_POINTER = 1,
  QP_STATUS_INVALID_ARGUMENT = 2,
  QP_STATUS_DOMAIN = 3,
  QP_STATUS_INVALID_STATE = 4,
  QP_STATUS_NON_PHYSICAL_STATE = 5,
  QP_STATUS_CONTRACT = 6,
  QP_STATUS_SINGULAR = 7,
  QP_STATUS_CONFIG = 8,
  QP_STATUS_OUT_OF_MODEL = 9,
  QP_STATUS_PANIC = 10,
} QpStatus;

/**
 * Values accepted by `parameter` arguments.
 */
typedef enum QpParameter {
  QP_PARAMETER_GAMMA = 0,
  QP_PARAMETER_TEMPERATURE = 1,
} QpParameter;

/**
 * Values accepted by `route` arguments.
 */
typedef enum QpRoute {
  QP_ROUTE_CLOSED_FORM = 0,
  QP_ROUTE_BLOCH_FINITE_DIFF = 1,
  QP_ROUTE_SLD_SPECTRAL = 2,
  /**
   * Closed-form temperature QFI with a single `sech^2` factor.
   */
  QP_ROUTE_CLOSED_FORM_AS_PRINTED = 3,
} QpRoute;

/**
 * Opaque handle to a prepared probe, a channel, and an interrogation time.
 */
typedef struct QpInterrogation QpInterrogation;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copy the calling thread's last error message into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length including the NUL,
 * or 0 if no error has been recorded.
 *
 * # Safety
 * `buf` must be NULL or point to `len` writable bytes.
 */
size_t qp_last_error_message(char *buf, size_t len);

/**
 * NUL-terminated crate version; static storage.
 */
const char *qp_version(void);

/**
 * Prepared polarization `R_z(p, q)` of a thermal probe at `y0`.
 *
 * # Safety
 * `out` must be NULL or valid for a write.
 */
enum QpStatus qp_prepare_rz(double p, double q, double y0, double *out);

/**
 * Diagonal probe with polarization `rz` sent through the channel for `t`.
 *
 * # Safety
 * `out` must be NULL or valid for a write. The handle written there must be
 * released with `qp_interrogation_free`.
 */
enum QpStatus qp_interrogation_new(double rz,
                                   double gamma,
                                   double y_eq,
                                   double omega,
                                   double t,
                                   struct QpInterrogation **out);

/**
 * Probe prepared from a thermal state at `y0` by measurement strengths
 * `(p, q)`, then sent through the channel for `t`.
 *
 * # Safety
 * As for `qp_interrogation_new`.
 */
enum QpStatus qp_interrogation_prepared(double p,
                                        double q,
                                        double y0,
                                        double gamma,
                                        double y_eq,
                                        double omega,
                                        double t,
                                        struct QpInterrogation **out);

/**
 * # Safety
 * `h` must be NULL or a handle from this library that has not been freed.
 */
void qp_interrogation_free(struct QpInterrogation *h);

/**
 * Evolved Bloch vector `(x, y, z)` written to `out[0..3]`.
 *
 * # Safety
 * `h` must be a live handle; `out` must be NULL or point to 3 doubles.
 */
enum QpStatus qp_evolved_bloch(const struct QpInterrogation *h, double *out);

/**
 * Quantum Fisher information for `parameter` (a `QpParameter`) by `route`
 * (a `QpRoute`).
 *
 * # Safety
 * `h` must be a live handle; `out` must be NULL or valid for a write.
 */
enum QpStatus qp_qfi(const struct QpInterrogation *h,
                     uint32_t parameter,
                     uint32_t route,
                     double *out);

/**
 * Classical Fisher information of a `sigma_z` readout.
 *
 * # Safety
 * As for `qp_qfi`.
 */
enum QpStatus qp_cfi_sigma_z(const struct QpInterrogation *h, uint32_t parameter, double *out);

/**
 * Energy change of the probe over the interrogation.
 *
 * # Safety
 * As for `qp_qfi`.
 */
enum QpStatus qp_energy_change(const struct QpInterrogation *h, double *out);

/**
 * Derivative of the energy change with respect to `parameter`.
 *
 * # Safety
 * As for `qp_qfi`.
 */
enum QpStatus qp_susceptibility(const struct QpInterrogation *h, uint32_t parameter, double *out);

/**
 * Variance of the probe Hamiltonian in the evolved state.
 *
 * # Safety
 * As for `qp_qfi`.
 */
enum QpStatus qp_hamiltonian_variance(const struct QpInterrogation *h, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QPROBE_H */
