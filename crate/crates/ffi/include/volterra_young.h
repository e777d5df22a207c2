/* C interface to the volterra-young numerical library.
* Generated by cbindgen from crates/ffi/src/lib.rs — do not edit. */

#ifndef VOLTERRA_YOUNG_H
#define VOLTERRA_YOUNG_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code of every FFI call.
 */
typedef enum VyStatus {
  /**
   * Success; out-parameters are valid.
   */
  VyStatus_Ok = 0,
  /**
   * An argument lies outside the mathematical domain of the operation.
   */
  VyStatus_Domain = 1,
  /**
   * A hypergeometric series failed to converge.
   */
  VyStatus_SeriesDivergence = 2,
  /**
   * A quadrature error estimate exceeded its tolerance.
   */
  VyStatus_Accuracy = 3,
  /**
   * A finite-difference step underflowed (user-supplied kernels only).
   */
  VyStatus_StepUnderflow = 4,
  /**
   * Invalid experiment or scheme configuration.
   */
  VyStatus_Config = 5,
  /**
   * A required pointer argument was NULL.
   */
  VyStatus_NullArgument = 6,
  /**
   * The library panicked internally; see `vy_last_error_message`.
   */
  VyStatus_Panic = 7,
} VyStatus;

/**
 * Opaque covariance-function handle.
 */
typedef struct VyCovariance VyCovariance;

/**
 * Opaque Volterra kernel handle.
 */
typedef struct VyKernel VyKernel;

/**
 * Parameters of the weakly singular operator quadratures (`K*`, tensor).
 */
typedef struct VyOperatorQuad {
  /**
   * Number of panels of the graded mesh (at least 4).
   */
  uint32_t panels;
  /**
   * Gauss–Legendre points per panel.
   */
  uint32_t points_per_panel;
  /**
   * Requested grading exponent.
   */
  double grading_exponent;
  /**
   * Expected Hölder regularity of the integrand's difference factor.
   */
  double holder_lambda_hint;
  /**
   * Absolute error tolerance.
   */
  double abs_tol;
} VyOperatorQuad;

/**
 * Parameters of the kernel-derived covariance quadrature.
 */
typedef struct VyCovarianceQuad {
  /**
   * Number of panels of the graded mesh.
   */
  uint32_t panels;
  /**
   * Gauss–Legendre points per panel.
   */
  uint32_t points_per_panel;
  /**
   * Requested grading exponent (raised to match the kernel singularity).
   */
  double grading_exponent;
  /**
   * Absolute error tolerance per unit interval.
   */
  double abs_tol;
} VyCovarianceQuad;

/**
 * Scalar field `φ(t)` supplied by the caller; the second argument is the
 * context pointer passed alongside the callback.
 */
typedef double (*VyField1D)(double, void*);

/**
 * Planar field `ψ(s, t)` supplied by the caller; the third argument is the
 * context pointer passed alongside the callback.
 */
typedef double (*VyField2D)(double, double, void*);

/**
 * Result of a covariance identity experiment.
 */
typedef struct VyIdentityResult {
  /**
   * Riemann-sum side (extrapolated limit of the refinement sequence).
   */
  double lhs;
  /**
   * Operator side (graded quadrature value).
   */
  double rhs;
  /**
   * `|lhs − rhs|`.
   */
  double abs_residual;
  /**
   * Residual relative to `max(|lhs|, |rhs|, 1e-12)`.
   */
  double rel_residual;
  /**
   * True when schedule entries were dropped by a size cap.
   */
  bool truncated;
} VyIdentityResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the most recent failure on the calling thread.
 *
 * Empty (not NULL) before any failure. The pointer stays valid until the
 * next failing call on the same thread.
 */
const char *vy_last_error_message(void);

/**
 * Default operator-quadrature parameters.
 */
struct VyOperatorQuad vy_operator_quad_default(void);

/**
 * Default covariance-quadrature parameters.
 */
struct VyCovarianceQuad vy_covariance_quad_default(void);

/**
 * Creates a fractional Brownian Volterra kernel on `[0, t_horizon]`.
 */
enum VyStatus vy_kernel_fbm(double h, double t_horizon, struct VyKernel **out);

/**
 * Creates a Riemann–Liouville kernel on `[0, t_horizon]`.
 */
enum VyStatus vy_kernel_riemann_liouville(double h, double t_horizon, struct VyKernel **out);

/**
 * Releases a kernel handle; NULL is a no-op.
 */
void vy_kernel_free(struct VyKernel *kernel);

/**
 * `K(t, s)`; zero whenever `s >= t`.
 */
enum VyStatus vy_kernel_eval(const struct VyKernel *kernel, double t, double s, double *out);

/**
 * `∂K/∂t (t, s)`; zero whenever `s >= t`.
 */
enum VyStatus vy_kernel_eval_dt(const struct VyKernel *kernel, double t, double s, double *out);

/**
 * Singularity exponent `alpha` of the kernel.
 */
enum VyStatus vy_kernel_alpha(const struct VyKernel *kernel, double *out);

/**
 * Time horizon `T` of the kernel.
 */
enum VyStatus vy_kernel_t_horizon(const struct VyKernel *kernel, double *out);

/**
 * Creates the closed-form fractional Brownian covariance
 * `½(s^{2H} + t^{2H} − |t−s|^{2H})` on `[0, t_horizon]²`.
 */
enum VyStatus vy_covariance_fbm_closed(double h, double t_horizon, struct VyCovariance **out);

/**
 * Creates the kernel-derived covariance
 * `R(s,t) = ∫ K(t,r) K(s,r) dr` evaluated with the given quadrature.
 */
enum VyStatus vy_covariance_from_kernel(const struct VyKernel *kernel,
                                        struct VyCovarianceQuad quad,
                                        struct VyCovariance **out);

/**
 * Releases a covariance handle; NULL is a no-op.
 */
void vy_covariance_free(struct VyCovariance *cov);

/**
 * `R(s, t)`.
 */
enum VyStatus vy_covariance_eval(const struct VyCovariance *cov, double s, double t, double *out);

/**
 * `K*φ(s) = φ(s)K(T,s) + ∫ (φ(r) − φ(s)) ∂K/∂r(r,s) dr` with its quadrature
 * error estimate. `estimate_out` may be NULL when the estimate is not
 * wanted.
 */
enum VyStatus vy_kstar_apply(const struct VyKernel *kernel,
                             VyField1D phi,
                             void *ctx,
                             double s,
                             struct VyOperatorQuad quad,
                             double *value_out,
                             double *estimate_out);

/**
 * `K*⊗K* ψ(u, v)` with its combined error estimate. `estimate_out` may be
 * NULL when the estimate is not wanted.
 */
enum VyStatus vy_kstar_tensor(const struct VyKernel *kernel,
                              VyField2D psi,
                              void *ctx,
                              double u,
                              double v,
                              struct VyOperatorQuad quad,
                              double *value_out,
                              double *estimate_out);

/**
 * Diagonal covariance identity
 * `∬ ψ dR = ∫ (K*⊗K* ψ)(r, r) dr` for the kernel-derived covariance.
 *
 * The Riemann-sum side refines along the dyadic schedule given by `cells`
 * (cells per axis, at least three strictly increasing entries); `tol`
 * governs its convergence flag.
 */
enum VyStatus vy_diagonal_identity(const struct VyKernel *kernel,
                                   VyField2D psi,
                                   void *ctx,
                                   struct VyOperatorQuad op_quad,
                                   struct VyCovarianceQuad cov_quad,
                                   const uint32_t *cells,
                                   size_t n_cells,
                                   double tol,
                                   struct VyIdentityResult *out);

/**
 * Product covariance identity
 * `∬ φ₁(s)φ₂(t) dR = ∫ K*φ₁(r) · K*φ₂(r) dr` against the supplied
 * covariance (closed-form or kernel-derived).
 */
enum VyStatus vy_product_identity(const struct VyKernel *kernel,
                                  VyField1D phi1,
                                  void *ctx1,
                                  VyField1D phi2,
                                  void *ctx2,
                                  const struct VyCovariance *cov,
                                  struct VyOperatorQuad op_quad,
                                  const uint32_t *cells,
                                  size_t n_cells,
                                  double tol,
                                  struct VyIdentityResult *out);

/**
 * p-variation of a sampled path (`p >= 1`), maximized over all subsets of
 * the sample points.
 */
enum VyStatus vy_pvar_1d(const double *samples, size_t len, double p, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VOLTERRA_YOUNG_H */
