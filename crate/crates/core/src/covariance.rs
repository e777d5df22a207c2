//! Covariance functions `R(s, t)` and their rectangular increments.
//!
//! Two sources are supported:
//!
//! * **Closed-form fBm**: `R(s,t) = ½ (s^{2H} + t^{2H} - |t-s|^{2H})`.
//! * **Kernel-derived**: `R(s,t) = ∫_0^{s∧t} K(t,r) K(s,r) dr`, evaluated by
//!   composite Gauss–Legendre on a mesh graded toward *both* endpoints of
//!   `(0, s∧t)` — the integrand behaves like `r^{-2α}` near 0 and like
//!   `(s∧t - r)^{-α}` near the upper endpoint when `s = t`.
//!
//! The 2D Young–Stieltjes machinery never needs `R` itself, only its
//! *rectangular increments*
//!
//! ```text
//! R(rect) = R(u1,v1) + R(u2,v2) - R(u1,v2) - R(u2,v1)
//! ```
//!
//! which for a covariance function are the increment covariances
//! `E[(X_{u2}-X_{u1})(X_{v2}-X_{v1})]`. [`rect_increment`] evaluates these
//! for arbitrary scalar fields.
//!
//! Positive semidefiniteness of sampled Gram matrices is a *diagnostic*
//! (quadrature error legitimately produces eigenvalues a hair below zero),
//! exposed via [`CovarianceFunction::min_eigenvalue_on_grid`].

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernels::VolterraKernel;
use crate::quadrature::{integrate_adaptive, Grading, QuadratureScheme};

/// Axis-aligned rectangle `[u1, u2] x [v1, v2]` inside `[0, T]^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub u1: f64,
    pub u2: f64,
    pub v1: f64,
    pub v2: f64,
}

impl Rect {
    /// Validating constructor: requires `u1 <= u2`, `v1 <= v2`.
    pub fn new(u1: f64, u2: f64, v1: f64, v2: f64) -> Result<Self> {
        if !(u1 <= u2 && v1 <= v2) {
            return Err(Error::domain(format!(
                "invalid rect: [{u1}, {u2}] x [{v1}, {v2}]"
            )));
        }
        Ok(Rect { u1, u2, v1, v2 })
    }
}

/// Rectangular increment `F(u1,v1) + F(u2,v2) - F(u1,v2) - F(u2,v1)`.
pub fn rect_increment<F: Fn(f64, f64) -> f64>(f: F, rect: &Rect) -> f64 {
    f(rect.u1, rect.v1) + f(rect.u2, rect.v2) - f(rect.u1, rect.v2) - f(rect.u2, rect.v1)
}

/// Standard fBm covariance `½ (s^{2H} + t^{2H} - |t-s|^{2H})`.
pub fn fbm_covariance(h: f64, s: f64, t: f64) -> f64 {
    0.5 * (s.powf(2.0 * h) + t.powf(2.0 * h) - (t - s).abs().powf(2.0 * h))
}

/// Kernel-derived covariance `∫_0^{s∧t} K(t,r) K(s,r) dr` by doubly graded
/// composite Gauss–Legendre quadrature.
///
/// The arguments are normalized (`lo = s∧t`, `hi = s∨t`) before any
/// numerical work, so `kernel_covariance(k, s, t, q)` and
/// `kernel_covariance(k, t, s, q)` run the identical code path and return
/// bit-identical values.
///
/// For a singular kernel (`α > 0`) the integrand behaves like `r^{-2α}` at
/// the origin — down to `r^{-1/2}` at the admissible extreme `α = 1/4` — and
/// the requested grading exponent is raised to at least 14: the leading
/// quadrature error is the first-panel mass `~ m^{-g(1-2α)}`, and smaller
/// exponents cannot reach the default `1e-8` tolerance at realistic panel
/// counts. `quad.panels` sets the starting resolution; the mesh is doubled
/// (up to four times) until the doubling estimate drops below `abs_tol`
/// scaled per unit interval, and [`Error::Accuracy`] reports the last
/// estimate if that never happens.
pub fn kernel_covariance(
    kernel: &VolterraKernel,
    s: f64,
    t: f64,
    quad: &QuadratureScheme,
) -> Result<f64> {
    let t_h = kernel.t_horizon();
    if !(s > 0.0 && t > 0.0 && s <= t_h && t <= t_h) {
        return Err(Error::domain(format!(
            "kernel_covariance: (s, t) = ({s}, {t}) outside (0, {t_h}]^2"
        )));
    }
    let lo = s.min(t);
    let hi = s.max(t);
    let alpha = kernel.alpha();
    let grading_exp = if alpha > 0.0 {
        quad.grading_exponent.max(14.0)
    } else {
        quad.grading_exponent
    };

    // Kernel evaluation errors inside the integrand cannot propagate out of
    // the quadrature closure; they are collected and rethrown afterwards.
    // Interior Gauss nodes never touch r = 0 or r = lo, so a correctly
    // declared kernel only fails here on programmer error.
    let failure = std::cell::RefCell::new(None);
    let integrand = |r: f64| -> f64 {
        match (kernel.eval(hi, r), kernel.eval(lo, r)) {
            (Ok(a), Ok(b)) => a * b,
            (Err(e), _) | (_, Err(e)) => {
                *failure.borrow_mut() = Some(e);
                0.0
            }
        }
    };
    let tol = quad.abs_tol * lo.max(1.0);
    let (value, estimate, converged) = integrate_adaptive(
        0.0,
        lo,
        quad.panels,
        quad.points_per_panel,
        grading_exp,
        Grading::TowardBoth,
        tol,
        4,
        integrand,
    );
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    if !converged {
        return Err(Error::Accuracy {
            estimate,
            tolerance: tol,
        });
    }
    Ok(value)
}

/// Where a covariance function's values come from.
#[derive(Debug, Clone)]
pub enum CovarianceSource {
    /// Closed-form fBm covariance with the given Hurst index.
    ClosedFormFbm { h: f64 },
    /// `∫ K(t,r) K(s,r) dr` for the given kernel, by quadrature.
    KernelDerived {
        kernel: VolterraKernel,
        quad: QuadratureScheme,
    },
}

/// A covariance function on `[0, T]^2`.
///
/// `R(0, t) = 0` for every source (closed form trivially, kernel-derived
/// because the integration interval is empty), and `R(s,t) = R(t,s)`
/// exactly — the kernel-derived path normalizes its arguments before any
/// floating-point work.
#[derive(Debug, Clone)]
pub struct CovarianceFunction {
    source: CovarianceSource,
    t_horizon: f64,
}

impl CovarianceFunction {
    /// Closed-form fBm covariance on `[0, T]`.
    pub fn closed_form_fbm(h: f64, t_horizon: f64) -> Result<Self> {
        if !(h > 0.0 && h < 1.0) {
            return Err(Error::domain(format!("Hurst index H = {h} out of (0,1)")));
        }
        if !(t_horizon > 0.0) {
            return Err(Error::domain("horizon must be positive".to_string()));
        }
        Ok(CovarianceFunction {
            source: CovarianceSource::ClosedFormFbm { h },
            t_horizon,
        })
    }

    /// Kernel-derived covariance; the horizon is the kernel's.
    pub fn kernel_derived(kernel: VolterraKernel, quad: QuadratureScheme) -> Self {
        let t_horizon = kernel.t_horizon();
        CovarianceFunction {
            source: CovarianceSource::KernelDerived { kernel, quad },
            t_horizon,
        }
    }

    /// Time horizon `T`.
    pub fn t_horizon(&self) -> f64 {
        self.t_horizon
    }

    /// The underlying source description.
    pub fn source(&self) -> &CovarianceSource {
        &self.source
    }

    /// Evaluates `R(s, t)`.
    pub fn eval(&self, s: f64, t: f64) -> Result<f64> {
        if !(0.0..=self.t_horizon).contains(&s) || !(0.0..=self.t_horizon).contains(&t) {
            return Err(Error::domain(format!(
                "covariance: (s, t) = ({s}, {t}) outside [0, {}]^2",
                self.t_horizon
            )));
        }
        if s == 0.0 || t == 0.0 {
            return Ok(0.0);
        }
        match &self.source {
            CovarianceSource::ClosedFormFbm { h } => Ok(fbm_covariance(*h, s, t)),
            CovarianceSource::KernelDerived { kernel, quad } => {
                kernel_covariance(kernel, s, t, quad)
            }
        }
    }

    /// Evaluates `R` on the product grid `us x vs`, in parallel.
    ///
    /// When both axes are the same grid (by value), symmetry is exploited:
    /// only the upper triangle is computed. Row-major result:
    /// `out[i][j] = R(us[i], vs[j])`.
    pub fn grid_matrix(&self, us: &[f64], vs: &[f64]) -> Result<Vec<Vec<f64>>> {
        let symmetric = us == vs;
        let rows: Result<Vec<Vec<f64>>> = us
            .par_iter()
            .enumerate()
            .map(|(i, &u)| {
                let lo = if symmetric { i } else { 0 };
                vs[lo..]
                    .iter()
                    .map(|&v| self.eval(u, v))
                    .collect::<Result<Vec<f64>>>()
            })
            .collect();
        let rows = rows?;
        if !symmetric {
            return Ok(rows);
        }
        // Mirror the upper triangle into a full matrix.
        let n = us.len();
        let mut full = vec![vec![0.0; n]; n];
        for (i, row) in rows.iter().enumerate() {
            for (off, &val) in row.iter().enumerate() {
                let j = i + off;
                full[i][j] = val;
                full[j][i] = val;
            }
        }
        Ok(full)
    }

    /// Smallest eigenvalue of the Gram matrix `[R(g_i, g_j)]` on a grid —
    /// the positive-semidefiniteness diagnostic. Values slightly below zero
    /// (at the scale of the quadrature tolerance) are expected for
    /// kernel-derived sources.
    pub fn min_eigenvalue_on_grid(&self, grid: &[f64]) -> Result<f64> {
        let m = self.grid_matrix(grid, grid)?;
        Ok(symmetric_min_eigenvalue(&m))
    }
}

/// Smallest eigenvalue of a symmetric matrix by the cyclic Jacobi method.
///
/// Desk-scale helper (grids here are at most a few hundred points); Jacobi
/// is unconditionally stable and needs no external linear-algebra stack.
fn symmetric_min_eigenvalue(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    if n == 0 {
        return 0.0;
    }
    let mut a: Vec<Vec<f64>> = m.to_vec();
    for _sweep in 0..60 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[p][q] * a[p][q];
            }
        }
        if off.sqrt() < 1e-14 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = 0.5 * (a[q][q] - a[p][p]) / a[p][q];
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i][i]).fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn fbm_covariance_closed_form_values() {
        // H = 1/2 degenerates to min(s, t).
        for (s, t) in [(0.3, 0.8), (0.9, 0.2), (0.5, 0.5)] {
            assert_relative_eq!(fbm_covariance(0.5, s, t), s.min(t), max_relative = 1e-14);
        }
        assert_relative_eq!(fbm_covariance(0.75, 1.0, 1.0), 1.0, max_relative = 1e-14);
        assert_relative_eq!(fbm_covariance(0.33, 1.0, 1.0), 1.0, max_relative = 1e-14);
        // t - s = s makes the two fractional terms cancel.
        assert_relative_eq!(fbm_covariance(0.25, 0.5, 1.0), 0.5, max_relative = 1e-14);
    }

    #[test]
    fn rect_increment_basics() {
        let r = Rect::new(0.25, 0.75, 0.1, 0.9).unwrap();
        // Bilinear field: increment factorizes into the side lengths.
        assert_relative_eq!(
            rect_increment(|u, v| u * v, &r),
            0.5 * 0.8,
            max_relative = 1e-14
        );
        // Additive fields have identically zero rectangular increments.
        assert_abs_diff_eq!(
            rect_increment(|u, v| u.powi(3) + v.sin(), &r),
            0.0,
            epsilon = 1e-15
        );
        let unit = Rect::new(0.0, 1.0, 0.0, 1.0).unwrap();
        assert_relative_eq!(rect_increment(|u, v| u.min(v), &unit), 1.0, max_relative = 1e-14);
        assert!(Rect::new(0.5, 0.1, 0.0, 1.0).is_err());
    }

    #[test]
    fn rect_increment_additivity_under_refinement() {
        // Splitting a rect into a 2x2 sub-grid: the four sub-increments sum
        // to the parent increment exactly (pure cancellation of mid terms).
        let f = |u: f64, v: f64| (u * 1.7 + 0.3).sin() * (v * v + 0.1).cos();
        let parent = Rect::new(0.2, 0.9, 0.1, 0.7).unwrap();
        let (um, vm) = (0.55, 0.4);
        let parts = [
            Rect::new(0.2, um, 0.1, vm).unwrap(),
            Rect::new(um, 0.9, 0.1, vm).unwrap(),
            Rect::new(0.2, um, vm, 0.7).unwrap(),
            Rect::new(um, 0.9, vm, 0.7).unwrap(),
        ];
        let total: f64 = parts.iter().map(|r| rect_increment(f, r)).sum();
        assert_relative_eq!(total, rect_increment(f, &parent), epsilon = 1e-15);
    }

    #[test]
    fn kernel_covariance_brownian_case_is_min() {
        let k = VolterraKernel::riemann_liouville(0.5, 1.0).unwrap();
        let q = QuadratureScheme::default();
        for (s, t) in [(0.3, 0.8), (1.0, 1.0), (0.9, 0.1)] {
            let r = kernel_covariance(&k, s, t, &q).unwrap();
            assert_abs_diff_eq!(r, s.min(t), epsilon = 1e-10);
        }
    }

    #[test]
    fn kernel_covariance_riemann_liouville_reference_values() {
        // Spot values from 40-digit quadrature of the closed-form RL
        // covariance, recorded before the implementation was written. The
        // assertions sit an order above the scheme's 1e-8 stopping tolerance.
        let q = QuadratureScheme::default();
        let k = VolterraKernel::riemann_liouville(0.75, 1.0).unwrap();
        assert_relative_eq!(
            kernel_covariance(&k, 0.5, 1.0, &q).unwrap(),
            0.38329631977264476,
            max_relative = 1e-7
        );
        let k = VolterraKernel::riemann_liouville(0.6, 1.0).unwrap();
        assert_relative_eq!(
            kernel_covariance(&k, 0.3, 0.8, &q).unwrap(),
            0.25597080655247089,
            max_relative = 1e-7
        );
        let k = VolterraKernel::riemann_liouville(0.5, 1.0).unwrap();
        assert_relative_eq!(
            kernel_covariance(&k, 0.4, 0.9, &q).unwrap(),
            0.4,
            max_relative = 1e-10
        );
    }

    #[test]
    fn kernel_covariance_matches_fbm_closed_form() {
        // The normalized fBm kernel reproduces the closed form; spot-checked
        // here, swept on a 6x6 grid by the acceptance suite.
        let q = QuadratureScheme::default();
        for h in [0.4, 0.75] {
            let k = VolterraKernel::fbm(h, 1.0).unwrap();
            for (s, t) in [(0.5, 1.0), (1.0, 1.0), (0.25, 0.75)] {
                let computed = kernel_covariance(&k, s, t, &q).unwrap();
                let exact = fbm_covariance(h, s, t);
                assert_relative_eq!(computed, exact, max_relative = 1e-4);
            }
        }
    }

    #[test]
    fn kernel_covariance_symmetry_is_exact() {
        let k = VolterraKernel::fbm(0.6, 1.0).unwrap();
        let q = QuadratureScheme::default();
        let a = kernel_covariance(&k, 0.37, 0.81, &q).unwrap();
        let b = kernel_covariance(&k, 0.81, 0.37, &q).unwrap();
        assert_eq!(a.to_bits(), b.to_bits(), "same code path after normalization");
    }

    #[test]
    fn kernel_covariance_accuracy_error_carries_estimate() {
        let k = VolterraKernel::fbm(0.75, 1.0).unwrap();
        let q = QuadratureScheme {
            panels: 2,
            points_per_panel: 2,
            grading_exponent: 1.0,
            abs_tol: 1e-12,
        };
        match kernel_covariance(&k, 0.9, 1.0, &q) {
            Err(Error::Accuracy { estimate, tolerance }) => {
                assert!(estimate > tolerance);
            }
            other => panic!("expected accuracy error, got {other:?}"),
        }
    }

    #[test]
    fn covariance_function_surface() {
        let closed = CovarianceFunction::closed_form_fbm(0.75, 1.0).unwrap();
        assert_eq!(closed.eval(0.0, 0.7).unwrap(), 0.0);
        assert_eq!(closed.eval(0.7, 0.0).unwrap(), 0.0);
        assert!(closed.eval(0.5, 1.2).is_err());
        assert_relative_eq!(closed.eval(1.0, 1.0).unwrap(), 1.0);

        let kernel = VolterraKernel::riemann_liouville(0.5, 1.0).unwrap();
        let derived = CovarianceFunction::kernel_derived(kernel, QuadratureScheme::default());
        assert_eq!(derived.eval(0.0, 0.5).unwrap(), 0.0);
        assert_abs_diff_eq!(derived.eval(0.25, 0.75).unwrap(), 0.25, epsilon = 1e-10);

        let grid: Vec<f64> = (0..=4).map(|i| i as f64 / 4.0).collect();
        let m = derived.grid_matrix(&grid, &grid).unwrap();
        assert_eq!(m.len(), 5);
        assert_abs_diff_eq!(m[2][3], 0.5, epsilon = 1e-10);
        assert_eq!(m[2][3].to_bits(), m[3][2].to_bits());
    }

    #[test]
    fn gram_matrices_are_numerically_psd() {
        let grid: Vec<f64> = (1..=6).map(|i| i as f64 / 6.0).collect();
        let closed = CovarianceFunction::closed_form_fbm(0.6, 1.0).unwrap();
        assert!(closed.min_eigenvalue_on_grid(&grid).unwrap() > -1e-12);

        let kernel = VolterraKernel::fbm(0.75, 1.0).unwrap();
        let derived = CovarianceFunction::kernel_derived(kernel, QuadratureScheme::default());
        assert!(derived.min_eigenvalue_on_grid(&grid).unwrap() > -1e-6);
    }

    #[test]
    fn jacobi_eigenvalues_spot_check() {
        // [[2,1],[1,2]] has eigenvalues 1 and 3.
        let m = vec![vec![2.0, 1.0], vec![1.0, 2.0]];
        assert_relative_eq!(symmetric_min_eigenvalue(&m), 1.0, max_relative = 1e-10);
    }
}
