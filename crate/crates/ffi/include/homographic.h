#ifndef HOMOGRAPHIC_H
#define HOMOGRAPHIC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible function.
 */
typedef enum HgStatus {
  HG_STATUS_OK = 0,
  HG_STATUS_NULL_POINTER = 1,
  HG_STATUS_INVALID_INPUT = 2,
  HG_STATUS_COLLISION = 3,
  HG_STATUS_CRITICAL_POINT = 4,
  HG_STATUS_PRECISION_EXHAUSTED = 5,
  HG_STATUS_NOT_CONVERGED = 6,
  HG_STATUS_BUFFER_TOO_SMALL = 7,
  HG_STATUS_FAILURE = 8,
  HG_STATUS_PANIC = 9,
} HgStatus;

/**
 * How an integration ended.
 */
typedef enum HgTermination {
  HG_TERMINATION_COMPLETED = 0,
  HG_TERMINATION_COLLISION = 1,
  HG_TERMINATION_STEP_SIZE_UNDERFLOW = 2,
} HgTermination;

/**
 * Result of a series verification run.
 */
typedef struct HgReport HgReport;

/**
 * A mass triple together with the potential exponent.
 */
typedef struct HgSystem HgSystem;

/**
 * Samples of an integrated trajectory.
 */
typedef struct HgTrajectory HgTrajectory;

/**
 * A central configuration; `kind` is 0 for Lagrange and 1 for Euler.
 */
typedef struct HgCentralConfig {
  double eta_x;
  double eta_y;
  int32_t kind;
  double grad_norm;
} HgCentralConfig;

/**
 * Reduced state `(r, phi, eta, rdot, phidot, etadot)`.
 */
typedef struct HgReducedState {
  double r;
  double phi;
  double eta_x;
  double eta_y;
  double rdot;
  double phidot;
  double etadot_x;
  double etadot_y;
} HgReducedState;

/**
 * One trajectory sample.
 */
typedef struct HgSample {
  double t;
  double tau;
  struct HgReducedState state;
  double inertia;
  double potential;
  double energy;
  double angular_momentum;
  double mu;
  double v2;
} HgSample;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *hg_version(void);

/**
 * Message of the last failure on this thread, or NULL. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *hg_last_error_message(void);

/**
 * Creates a system handle.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle pointer.
 */
enum HgStatus hg_system_new(double m1, double m2, double m3, double alpha, struct HgSystem **out);

/**
 * Releases a system handle. NULL is ignored.
 *
 * # Safety
 * `sys` must be NULL or a handle from [`hg_system_new`] not yet freed.
 */
void hg_system_free(struct HgSystem *sys);

/**
 * Configurational measure `mu` at the shape `eta = x + iy`.
 *
 * # Safety
 * `sys` must be a live handle and `out` a valid pointer.
 */
enum HgStatus hg_config_measure(const struct HgSystem *sys,
                                double eta_x,
                                double eta_y,
                                double *out);

/**
 * Norm of the shape-sphere gradient of `mu` at `eta = x + iy`.
 *
 * # Safety
 * `sys` must be a live handle and `out` a valid pointer.
 */
enum HgStatus hg_gradient_norm(const struct HgSystem *sys, double eta_x, double eta_y, double *out);

/**
 * Writes up to `capacity` central configurations into `buf` and their total
 * count into `count`. Returns `BufferTooSmall` (with `count` set) when the
 * buffer cannot hold them all; `buf` may be NULL when `capacity` is 0.
 *
 * # Safety
 * `sys` must be a live handle, `count` a valid pointer and `buf` valid for
 * `capacity` writes.
 */
enum HgStatus hg_central_configs(const struct HgSystem *sys,
                                 struct HgCentralConfig *buf,
                                 size_t capacity,
                                 size_t *count);

/**
 * Integrates from a reduced state, sampling `samples` equally spaced times
 * on `[t0, t1]` with DOP853 at relative and absolute tolerance `tol`.
 * A collision is not an error: the handle keeps the samples reached and
 * reports it through [`hg_trajectory_termination`].
 *
 * # Safety
 * `sys` must be a live handle, `initial` and `out` valid pointers.
 */
enum HgStatus hg_simulate(const struct HgSystem *sys,
                          const struct HgReducedState *initial,
                          double t0,
                          double t1,
                          size_t samples,
                          double tol,
                          struct HgTrajectory **out);

/**
 * Number of samples held by a trajectory; 0 for NULL.
 *
 * # Safety
 * `traj` must be NULL or a live handle.
 */
size_t hg_trajectory_len(const struct HgTrajectory *traj);

/**
 * Copies sample `index` into `out`.
 *
 * # Safety
 * `traj` must be a live handle and `out` a valid pointer.
 */
enum HgStatus hg_trajectory_sample(const struct HgTrajectory *traj,
                                   size_t index,
                                   struct HgSample *out);

/**
 * How the integration ended; `t_end` receives the stopping time when not NULL.
 *
 * # Safety
 * `traj` must be a live handle; `t_end` NULL or a valid pointer.
 */
enum HgTermination hg_trajectory_termination(const struct HgTrajectory *traj, double *t_end);

/**
 * Releases a trajectory handle. NULL is ignored.
 *
 * # Safety
 * `traj` must be NULL or a handle from [`hg_simulate`] not yet freed.
 */
void hg_trajectory_free(struct HgTrajectory *traj);

/**
 * Checks the leading series coefficients on every branch for the system's
 * exponent (1 or 2) at level `mu_tilde`, with `digits` working digits.
 *
 * # Safety
 * `sys` must be a live handle and `out` a valid pointer.
 */
enum HgStatus hg_verify(const struct HgSystem *sys,
                        double mu_tilde,
                        double c,
                        double v,
                        uint32_t digits,
                        struct HgReport **out);

/**
 * 1 when every gating comparison of the report passed, else 0.
 *
 * # Safety
 * `report` must be NULL or a live handle.
 */
int32_t hg_report_passed(const struct HgReport *report);

/**
 * The report as JSON, owned by the handle.
 *
 * # Safety
 * `report` must be NULL or a live handle.
 */
const char *hg_report_json(const struct HgReport *report);

/**
 * Releases a report handle. NULL is ignored.
 *
 * # Safety
 * `report` must be NULL or a handle from [`hg_verify`] not yet freed.
 */
void hg_report_free(struct HgReport *report);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HOMOGRAPHIC_H */
