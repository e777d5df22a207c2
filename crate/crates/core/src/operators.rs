//! The adjoint kernel operator `K*`, its pieces `A^K` and `B^K`, and the
//! tensor square `K*⊗K*`.
//!
//! For a Volterra kernel `K` and a field `φ` on `[0, T]`,
//!
//! ```text
//! K*φ(s) = φ(s)·K(T,s) + A^K(φ)(s),
//! A^K(φ)(s) = ∫ₛ^T [φ(r) − φ(s)] (∂K/∂r)(r, s) dr,
//! ```
//!
//! and for a 2D field `ψ` the tensor operator is
//!
//! ```text
//! K*⊗K* ψ(u,v) = ψ(u,v)K(T,u)K(T,v) + K(T,v)·A^K(ψ(·,v))(u)
//!              + K(T,u)·A^K(ψ(u,·))(v) + B^K(ψ)(u,v),
//! ```
//!
//! with `B^K` integrating the rectangular increments of `ψ` against
//! `K(dr₁,u) K(dr₂,v)`. The difference structure `φ(r) − φ(s)` is kept
//! explicit — never expanded — so the integrand is `(r−s)^{λ−α−1}` and
//! integrable whenever `φ` is `λ`-Hölder with `λ > α`.
//!
//! ## Quadrature design
//!
//! All operator integrals run on *fixed-resolution* meshes graded toward the
//! singular endpoint `r = s`: the value is computed at `quad.panels` panels
//! and the reported error estimate is the difference against the half-panel
//! mesh. Fixing the resolution (rather than adapting per call) is what makes
//! the product identity
//!
//! ```text
//! K*⊗K*(ψ₁⊗ψ₂)(u,v) = K*ψ₁(u) · K*ψ₂(v)
//! ```
//!
//! hold to rounding rather than to quadrature tolerance: `B^K` evaluates on
//! the exact tensor product of the 1D meshes, so the double sum factors
//! algebraically. The half-panel estimate is conservative for the returned
//! value — with the default grading the error shrinks ~64× per doubling, so
//! the estimate (the *coarse* mesh's error) overstates the fine error by
//! about that factor.
//!
//! Step functions are handled separately: `K*` applied to an indicator
//! `𝟙_{[a,b)}` is the closed form `K(b,s) − K(a,s)` ([`kstar_indicator`]),
//! and piecewise-constant 2D fields reduce to the bilinear sum
//! [`kstar_tensor_step`] — no quadrature, hence usable deep inside
//! Riemann-sum loops.

use crate::error::{Error, Result};
use crate::kernels::VolterraKernel;
use crate::quadrature::{gauss_legendre, graded_mesh, Grading};
use crate::regularity::Partition2D;

pub use crate::quadrature::SingularQuad;

/// Flattened Gauss nodes and weights of a panel mesh.
struct PanelRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

/// Nodes/weights on `[a, b]`, `panels` panels graded toward `a`.
fn singular_rule(a: f64, b: f64, panels: usize, points: usize, exponent: f64) -> PanelRule {
    let mesh = graded_mesh(a, b, panels, exponent, Grading::TowardLeft);
    let rule = gauss_legendre(points);
    let mut nodes = Vec::with_capacity(panels * points);
    let mut weights = Vec::with_capacity(panels * points);
    for w in mesh.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        let half = 0.5 * (w[1] - w[0]);
        for (&x, &gw) in rule.nodes.iter().zip(&rule.weights) {
            nodes.push(mid + half * x);
            weights.push(gw * half);
        }
    }
    PanelRule { nodes, weights }
}

fn check_quad(quad: &SingularQuad) -> Result<()> {
    if quad.panels < 4 {
        return Err(Error::domain(format!(
            "singular quadrature needs at least 4 panels, got {}",
            quad.panels
        )));
    }
    Ok(())
}

fn check_interior(s: f64, t_horizon: f64, what: &str) -> Result<()> {
    if !(s > 0.0 && s < t_horizon) {
        return Err(Error::domain(format!(
            "{what} must lie strictly inside (0, {t_horizon}), got {s}"
        )));
    }
    Ok(())
}

/// `Σ w_i [φ(r_i) − φ(s)] ∂K(r_i, s)` over a prepared rule.
fn ak_sum<F: Fn(f64) -> f64>(
    kernel: &VolterraKernel,
    phi: &F,
    phi_s: f64,
    s: f64,
    rule: &PanelRule,
) -> Result<f64> {
    let mut acc = 0.0;
    for (&r, &w) in rule.nodes.iter().zip(&rule.weights) {
        acc += w * (phi(r) - phi_s) * kernel.eval_dt(r, s)?;
    }
    Ok(acc)
}

/// `A^K(φ)(s)` with its half-panel error estimate.
///
/// The integrand `[φ(r) − φ(s)] ∂K/∂r(r,s)` is evaluated on `quad.panels`
/// panels graded toward `r = s` with exponent `quad.effective_grading(α)`;
/// the estimate is the difference against the half-panel mesh and errors
/// as [`Error::Accuracy`] when it exceeds `quad.abs_tol` per unit interval.
/// [`ak_apply_raw`] is the non-gating variant.
pub fn ak_apply_with_estimate<F: Fn(f64) -> f64>(
    kernel: &VolterraKernel,
    phi: F,
    s: f64,
    quad: &SingularQuad,
) -> Result<(f64, f64)> {
    let t_h = kernel.t_horizon();
    let (value, estimate) = ak_apply_raw(kernel, phi, s, quad)?;
    let tol = quad.abs_tol * (t_h - s).max(1.0);
    if estimate > tol {
        return Err(Error::Accuracy {
            estimate,
            tolerance: tol,
        });
    }
    Ok((value, estimate))
}

/// `A^K(φ)(s)` with its half-panel error estimate, no tolerance gate.
///
/// Near the interval ends the operator integrals get genuinely hard and the
/// estimate may sit far above `quad.abs_tol`; callers integrating the result
/// against weights that vanish there can still budget the total error
/// honestly. The caller owns the decision.
pub fn ak_apply_raw<F: Fn(f64) -> f64>(
    kernel: &VolterraKernel,
    phi: F,
    s: f64,
    quad: &SingularQuad,
) -> Result<(f64, f64)> {
    check_quad(quad)?;
    let t_h = kernel.t_horizon();
    check_interior(s, t_h, "operator evaluation point s")?;
    let g = quad.effective_grading(kernel.alpha());
    let phi_s = phi(s);
    let fine = singular_rule(s, t_h, quad.panels, quad.points_per_panel, g);
    let coarse = singular_rule(s, t_h, (quad.panels / 2).max(2), quad.points_per_panel, g);
    let value = ak_sum(kernel, &phi, phi_s, s, &fine)?;
    let rough = ak_sum(kernel, &phi, phi_s, s, &coarse)?;
    Ok((value, (value - rough).abs()))
}

/// `A^K(φ)(s)`, estimate discarded.
pub fn ak_apply<F: Fn(f64) -> f64>(
    kernel: &VolterraKernel,
    phi: F,
    s: f64,
    quad: &SingularQuad,
) -> Result<f64> {
    ak_apply_with_estimate(kernel, phi, s, quad).map(|(v, _)| v)
}

/// `K*φ(s) = φ(s)K(T,s) + A^K(φ)(s)` with the integral's error estimate.
pub fn kstar_apply_with_estimate<F: Fn(f64) -> f64>(
    kernel: &VolterraKernel,
    phi: F,
    s: f64,
    quad: &SingularQuad,
) -> Result<(f64, f64)> {
    let t_h = kernel.t_horizon();
    let boundary = phi(s) * kernel.eval(t_h, s)?;
    let (ak, est) = ak_apply_with_estimate(kernel, phi, s, quad)?;
    Ok((boundary + ak, est))
}

/// `K*φ(s)` with the integral's error estimate, no tolerance gate
/// (see [`ak_apply_raw`]).
pub fn kstar_apply_raw<F: Fn(f64) -> f64>(
    kernel: &VolterraKernel,
    phi: F,
    s: f64,
    quad: &SingularQuad,
) -> Result<(f64, f64)> {
    let t_h = kernel.t_horizon();
    let boundary = phi(s) * kernel.eval(t_h, s)?;
    let (ak, est) = ak_apply_raw(kernel, phi, s, quad)?;
    Ok((boundary + ak, est))
}

/// `K*φ(s)`, estimate discarded.
pub fn kstar_apply<F: Fn(f64) -> f64>(
    kernel: &VolterraKernel,
    phi: F,
    s: f64,
    quad: &SingularQuad,
) -> Result<f64> {
    kstar_apply_with_estimate(kernel, phi, s, quad).map(|(v, _)| v)
}

/// Componentwise `K*` on a fixed-length vector field (values in ℝᵈ).
pub fn kstar_apply_vec<F: Fn(f64) -> Vec<f64>>(
    kernel: &VolterraKernel,
    phi: F,
    s: f64,
    quad: &SingularQuad,
) -> Result<Vec<f64>> {
    let dim = phi(s).len();
    (0..dim)
        .map(|c| kstar_apply(kernel, |t| phi(t)[c], s, quad))
        .collect()
}

/// Closed-form `K*(𝟙_{[a,b)})(s) = K(b,s) − K(a,s)` — no quadrature.
///
/// Uses the Volterra convention `K(x, s) = 0` for `s ≥ x`, so the result is
/// `0` for `s ≥ b` and `K(b,s)` for `s ∈ [a, b)`.
pub fn kstar_indicator(kernel: &VolterraKernel, a: f64, b: f64, s: f64) -> Result<f64> {
    if !(0.0 <= a && a < b && b <= kernel.t_horizon()) {
        return Err(Error::domain(format!(
            "indicator needs 0 <= a < b <= T, got [{a}, {b})"
        )));
    }
    Ok(kernel.eval(b, s)? - kernel.eval(a, s)?)
}

/// Tensor quadrature of the rectangular increments of `ψ` on prepared rules.
fn bk_sum<P: Fn(f64, f64) -> f64>(
    psi: &P,
    u: f64,
    v: f64,
    dku: &[f64],
    dkv: &[f64],
    ru: &PanelRule,
    rv: &PanelRule,
) -> f64 {
    let mut acc = 0.0;
    for (i, &r1) in ru.nodes.iter().enumerate() {
        let ai = ru.weights[i] * dku[i];
        if ai == 0.0 {
            continue;
        }
        let psi_r1_v = psi(r1, v);
        let mut inner = 0.0;
        for (j, &r2) in rv.nodes.iter().enumerate() {
            let bj = rv.weights[j] * dkv[j];
            if bj == 0.0 {
                continue;
            }
            inner += bj * (psi(r1, r2) - psi(u, r2) - psi_r1_v + psi(u, v));
        }
        acc += ai * inner;
    }
    acc
}

fn dk_vector(kernel: &VolterraKernel, rule: &PanelRule, s: f64) -> Result<Vec<f64>> {
    rule.nodes.iter().map(|&r| kernel.eval_dt(r, s)).collect()
}

/// `B^K(ψ)(u,v)` with its half-panel error estimate.
///
/// Full tensor-product quadrature on the product of the 1D graded meshes —
/// the same meshes `A^K` uses in each variable — so that for product fields
/// the double sum factors into the two 1D sums exactly.
pub fn bk_apply_with_estimate<P: Fn(f64, f64) -> f64>(
    kernel: &VolterraKernel,
    psi: P,
    u: f64,
    v: f64,
    quad: &SingularQuad,
) -> Result<(f64, f64)> {
    let t_h = kernel.t_horizon();
    let (value, estimate) = bk_apply_raw(kernel, psi, u, v, quad)?;
    let tol = quad.abs_tol * (t_h - u).max(1.0) * (t_h - v).max(1.0);
    if estimate > tol {
        return Err(Error::Accuracy {
            estimate,
            tolerance: tol,
        });
    }
    Ok((value, estimate))
}

/// `B^K(ψ)(u,v)` with its half-panel error estimate, no tolerance gate
/// (see [`ak_apply_raw`]).
pub fn bk_apply_raw<P: Fn(f64, f64) -> f64>(
    kernel: &VolterraKernel,
    psi: P,
    u: f64,
    v: f64,
    quad: &SingularQuad,
) -> Result<(f64, f64)> {
    check_quad(quad)?;
    let t_h = kernel.t_horizon();
    check_interior(u, t_h, "tensor evaluation point u")?;
    check_interior(v, t_h, "tensor evaluation point v")?;
    let g = quad.effective_grading(kernel.alpha());
    let pts = quad.points_per_panel;

    let ru_f = singular_rule(u, t_h, quad.panels, pts, g);
    let rv_f = singular_rule(v, t_h, quad.panels, pts, g);
    let dku_f = dk_vector(kernel, &ru_f, u)?;
    let dkv_f = dk_vector(kernel, &rv_f, v)?;
    let value = bk_sum(&psi, u, v, &dku_f, &dkv_f, &ru_f, &rv_f);

    let half = (quad.panels / 2).max(2);
    let ru_c = singular_rule(u, t_h, half, pts, g);
    let rv_c = singular_rule(v, t_h, half, pts, g);
    let dku_c = dk_vector(kernel, &ru_c, u)?;
    let dkv_c = dk_vector(kernel, &rv_c, v)?;
    let rough = bk_sum(&psi, u, v, &dku_c, &dkv_c, &ru_c, &rv_c);

    Ok((value, (value - rough).abs()))
}

/// `B^K(ψ)(u,v)`, estimate discarded.
pub fn bk_apply<P: Fn(f64, f64) -> f64>(
    kernel: &VolterraKernel,
    psi: P,
    u: f64,
    v: f64,
    quad: &SingularQuad,
) -> Result<f64> {
    bk_apply_with_estimate(kernel, psi, u, v, quad).map(|(v, _)| v)
}

/// `K*⊗K* ψ(u,v)` with a combined error estimate.
///
/// The estimate adds the boundary-weighted `A^K` estimates and the `B^K`
/// estimate; the `ψ(u,v)K(T,u)K(T,v)` term is quadrature-free.
pub fn kstar_tensor_with_estimate<P: Fn(f64, f64) -> f64>(
    kernel: &VolterraKernel,
    psi: P,
    u: f64,
    v: f64,
    quad: &SingularQuad,
) -> Result<(f64, f64)> {
    let t_h = kernel.t_horizon();
    let ktu = kernel.eval(t_h, u)?;
    let ktv = kernel.eval(t_h, v)?;
    let (au, est_u) = ak_apply_with_estimate(kernel, |r| psi(r, v), u, quad)?;
    let (av, est_v) = ak_apply_with_estimate(kernel, |r| psi(u, r), v, quad)?;
    let (b, est_b) = bk_apply_with_estimate(kernel, &psi, u, v, quad)?;
    let value = psi(u, v) * ktu * ktv + ktv * au + ktu * av + b;
    let estimate = ktv.abs() * est_u + ktu.abs() * est_v + est_b;
    Ok((value, estimate))
}

/// `K*⊗K* ψ(u,v)` with a combined error estimate, no tolerance gates on the
/// constituent integrals (see [`ak_apply_raw`]).
pub fn kstar_tensor_raw<P: Fn(f64, f64) -> f64>(
    kernel: &VolterraKernel,
    psi: P,
    u: f64,
    v: f64,
    quad: &SingularQuad,
) -> Result<(f64, f64)> {
    let t_h = kernel.t_horizon();
    let ktu = kernel.eval(t_h, u)?;
    let ktv = kernel.eval(t_h, v)?;
    let (au, est_u) = ak_apply_raw(kernel, |r| psi(r, v), u, quad)?;
    let (av, est_v) = ak_apply_raw(kernel, |r| psi(u, r), v, quad)?;
    let (b, est_b) = bk_apply_raw(kernel, &psi, u, v, quad)?;
    let value = psi(u, v) * ktu * ktv + ktv * au + ktu * av + b;
    let estimate = ktv.abs() * est_u + ktu.abs() * est_v + est_b;
    Ok((value, estimate))
}

/// `K*⊗K* ψ(u,v)`, estimate discarded.
pub fn kstar_tensor<P: Fn(f64, f64) -> f64>(
    kernel: &VolterraKernel,
    psi: P,
    u: f64,
    v: f64,
    quad: &SingularQuad,
) -> Result<f64> {
    kstar_tensor_with_estimate(kernel, psi, u, v, quad).map(|(v, _)| v)
}

/// Two-pass (iterated) evaluation of the tensor operator: `K*` in the first
/// variable producing the field `t ↦ K*(ψ(·,t))(u)`, then `K*` in the second.
///
/// Equals [`kstar_tensor`] up to quadrature error. The returned estimate is
/// the outer pass's estimate plus the largest inner-pass estimate observed;
/// inner-pass errors enter the outer integrand as (difference-damped) data
/// error, so the sum is the natural first-order bound.
pub fn kstar_iterated_with_estimate<P: Fn(f64, f64) -> f64>(
    kernel: &VolterraKernel,
    psi: P,
    u: f64,
    v: f64,
    quad: &SingularQuad,
) -> Result<(f64, f64)> {
    use std::cell::RefCell;
    let inner_failure: RefCell<Option<Error>> = RefCell::new(None);
    let inner_worst = std::cell::Cell::new(0.0_f64);
    let inner = |t: f64| -> f64 {
        match kstar_apply_with_estimate(kernel, |r| psi(r, t), u, quad) {
            Ok((val, est)) => {
                if est > inner_worst.get() {
                    inner_worst.set(est);
                }
                val
            }
            Err(e) => {
                *inner_failure.borrow_mut() = Some(e);
                0.0
            }
        }
    };
    let (value, est_outer) = kstar_apply_with_estimate(kernel, inner, v, quad)?;
    if let Some(e) = inner_failure.into_inner() {
        return Err(e);
    }
    Ok((value, est_outer + inner_worst.get()))
}

/// Quadrature-free `K*⊗K*` on a piecewise-constant field.
///
/// `coeffs[i][j]` is the value of `ψ^π` on the cell
/// `[u_i, u_{i+1}) × [v_j, v_{j+1})`; the result is
///
/// ```text
/// Σ_{i,j} coeffs[i][j] · [K(u_{i+1},r1) − K(u_i,r1)] · [K(v_{j+1},r2) − K(v_j,r2)],
/// ```
///
/// i.e. `aᵀ C b` with the indicator vectors `a`, `b` — exact bilinearity,
/// `O(n)` kernel evaluations and `O(n²)` multiplies per point.
pub fn kstar_tensor_step(
    kernel: &VolterraKernel,
    part: &Partition2D,
    coeffs: &[Vec<f64>],
    r1: f64,
    r2: f64,
) -> Result<f64> {
    let t_h = kernel.t_horizon();
    check_interior(r1, t_h, "step evaluation point r1")?;
    check_interior(r2, t_h, "step evaluation point r2")?;
    let us = part.u_grid.points();
    let vs = part.v_grid.points();
    if coeffs.len() != us.len() - 1 || coeffs.iter().any(|row| row.len() != vs.len() - 1) {
        return Err(Error::domain(format!(
            "step coefficients must be {}x{} (one per cell)",
            us.len() - 1,
            vs.len() - 1
        )));
    }
    let ku: Vec<f64> = us
        .iter()
        .map(|&x| kernel.eval(x, r1))
        .collect::<Result<_>>()?;
    let kv: Vec<f64> = vs
        .iter()
        .map(|&x| kernel.eval(x, r2))
        .collect::<Result<_>>()?;
    let b: Vec<f64> = kv.windows(2).map(|w| w[1] - w[0]).collect();
    let mut acc = 0.0;
    for (i, row) in coeffs.iter().enumerate() {
        let a_i = ku[i + 1] - ku[i];
        if a_i == 0.0 {
            continue;
        }
        let inner: f64 = row.iter().zip(&b).map(|(&c, &bj)| c * bj).sum();
        acc += a_i * inner;
    }
    Ok(acc)
}

/// `A^K` with the integration domain split at the given interior breakpoints
/// (sorted, strictly inside `(s, T)`): for fields with jumps — steps, or
/// fields glued cell-wise — each segment is smooth, and only the first one
/// carries the `r = s` kernel singularity.
#[cfg_attr(not(test), allow(dead_code))]
pub(crate) fn ak_apply_split<F: Fn(f64) -> f64>(
    kernel: &VolterraKernel,
    phi: F,
    s: f64,
    quad: &SingularQuad,
    splits: &[f64],
) -> Result<f64> {
    check_quad(quad)?;
    let t_h = kernel.t_horizon();
    check_interior(s, t_h, "operator evaluation point s")?;
    if splits.windows(2).any(|w| w[1] <= w[0]) || splits.iter().any(|&b| b <= s || b >= t_h) {
        return Err(Error::domain(
            "split points must be sorted and strictly inside (s, T)".to_string(),
        ));
    }
    let g = quad.effective_grading(kernel.alpha());
    let phi_s = phi(s);
    let mut edges = vec![s];
    edges.extend_from_slice(splits);
    edges.push(t_h);
    let mut acc = 0.0;
    for (seg, w) in edges.windows(2).enumerate() {
        // Only the first segment touches the singularity at r = s.
        let exponent = if seg == 0 { g } else { 1.0 };
        let rule = singular_rule(w[0], w[1], quad.panels, quad.points_per_panel, exponent);
        acc += ak_sum(kernel, &phi, phi_s, s, &rule)?;
    }
    Ok(acc)
}

/// `K*⊗K*` via quadrature split at cell boundaries in both variables —
/// the general-path reference for [`kstar_tensor_step`].
#[cfg_attr(not(test), allow(dead_code))]
pub(crate) fn kstar_tensor_split<P: Fn(f64, f64) -> f64>(
    kernel: &VolterraKernel,
    psi: P,
    u: f64,
    v: f64,
    quad: &SingularQuad,
    splits_u: &[f64],
    splits_v: &[f64],
) -> Result<f64> {
    let t_h = kernel.t_horizon();
    let ktu = kernel.eval(t_h, u)?;
    let ktv = kernel.eval(t_h, v)?;
    let au = ak_apply_split(kernel, |r| psi(r, v), u, quad, splits_u)?;
    let av = ak_apply_split(kernel, |r| psi(u, r), v, quad, splits_v)?;

    // B^K over the product of the split meshes.
    let g = quad.effective_grading(kernel.alpha());
    let build = |a: f64, splits: &[f64]| -> Vec<PanelRule> {
        let mut edges = vec![a];
        edges.extend_from_slice(splits);
        edges.push(t_h);
        edges
            .windows(2)
            .enumerate()
            .map(|(seg, w)| {
                let exponent = if seg == 0 { g } else { 1.0 };
                singular_rule(w[0], w[1], quad.panels, quad.points_per_panel, exponent)
            })
            .collect()
    };
    let mut b = 0.0;
    for ru in &build(u, splits_u) {
        let dku = dk_vector(kernel, ru, u)?;
        for rv in &build(v, splits_v) {
            let dkv = dk_vector(kernel, rv, v)?;
            b += bk_sum(&psi, u, v, &dku, &dkv, ru, rv);
        }
    }
    Ok(psi(u, v) * ktu * ktv + ktv * au + ktu * av + b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regularity::Grid1D;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn rl(h: f64) -> VolterraKernel {
        VolterraKernel::riemann_liouville(h, 1.0).unwrap()
    }

    fn fbm(h: f64) -> VolterraKernel {
        VolterraKernel::fbm(h, 1.0).unwrap()
    }

    #[test]
    fn brownian_kernels_make_kstar_the_identity() {
        let q = SingularQuad::default();
        for k in [rl(0.5), fbm(0.5)] {
            for s in [0.2, 0.5, 0.9] {
                let v = kstar_apply(&k, |t| (3.0 * t).sin(), s, &q).unwrap();
                assert_abs_diff_eq!(v, (3.0 * s).sin(), epsilon = 1e-12);
            }
            let v = kstar_tensor(&k, |a, b| a * b + (a + 2.0 * b).cos(), 0.3, 0.7, &q).unwrap();
            assert_abs_diff_eq!(v, 0.21 + (1.7_f64).cos(), epsilon = 1e-12);
        }
    }

    #[test]
    fn constant_fields_reduce_to_the_boundary_term() {
        let q = SingularQuad::default();
        for k in [rl(0.75), fbm(0.6), fbm(0.4)] {
            let s = 0.35;
            let (ak, est) = ak_apply_with_estimate(&k, |_| 2.5, s, &q).unwrap();
            assert_eq!(ak, 0.0, "zero integrand sums to exactly zero");
            assert_eq!(est, 0.0);
            let v = kstar_apply(&k, |_| 2.5, s, &q).unwrap();
            assert_relative_eq!(v, 2.5 * k.eval(1.0, s).unwrap(), max_relative = 1e-14);
        }
    }

    #[test]
    fn riemann_liouville_power_field_reference_value() {
        // K*(t ↦ t)(1/2) for the H = 0.75 RL kernel on [0,1]: the integral
        // has a closed form (power-function integrand), evaluated to 40
        // digits and frozen before this module was written.
        let q = SingularQuad::default();
        let k = rl(0.75);
        let (v, est) = kstar_apply_with_estimate(&k, |t| t, 0.5, &q).unwrap();
        assert_relative_eq!(v, 0.5566377651474005, max_relative = 1e-9);
        assert!(est < 1e-8);
        let a = ak_apply(&k, |t| t, 0.5, &q).unwrap();
        assert_relative_eq!(a, 0.09277296085790008, max_relative = 1e-9);
        // The two surfaces share the quadrature path exactly.
        let boundary = 0.5 * k.eval(1.0, 0.5).unwrap();
        assert_eq!((boundary + a).to_bits(), v.to_bits());
    }

    #[test]
    fn fbm_kstar_reference_spots() {
        // K* for the normalized fBm kernel, H = 0.75: frozen oracle values
        // for the two fields the covariance-identity experiments use.
        let q = SingularQuad::default();
        let k = fbm(0.75);
        let phi1 = |t: f64| t.powf(0.6);
        let phi2 = |t: f64| t.cos();
        for (r, expect) in [
            (0.25, 0.6372779654335495),
            (0.5, 0.6909077832405027),
            (0.75, 0.6720490341251372),
        ] {
            let v = kstar_apply(&k, phi1, r, &q).unwrap();
            assert_relative_eq!(v, expect, max_relative = 1e-6);
        }
        for (r, expect) in [
            (0.25, 0.9804622205286702),
            (0.5, 0.7632505148717319),
            (0.75, 0.5332820546188582),
        ] {
            let v = kstar_apply(&k, phi2, r, &q).unwrap();
            assert_relative_eq!(v, expect, max_relative = 1e-6);
        }
    }

    #[test]
    fn derivative_quadrature_consistent_with_kernel_differences() {
        // Fundamental-theorem cross-check on a singularity-free segment:
        // ∫_a^b ∂K/∂t(t,s) dt = K(b,s) − K(a,s). Validates the
        // finite-difference derivative path against direct evaluation.
        let rule = gauss_legendre(16);
        for k in [rl(0.75), fbm(0.75), fbm(0.6)] {
            let (s, a, b) = (0.2, 0.4, 0.9);
            let quad_val = rule.integrate(a, b, |t| k.eval_dt(t, s).unwrap());
            let exact = k.eval(b, s).unwrap() - k.eval(a, s).unwrap();
            assert_relative_eq!(quad_val, exact, max_relative = 1e-8);
        }
    }

    #[test]
    fn indicator_closed_form() {
        let k = rl(0.75);
        // s past the window: both kernel terms vanish.
        assert_eq!(kstar_indicator(&k, 0.1, 0.4, 0.7).unwrap(), 0.0);
        // s inside the window: K(b, s) alone.
        let v = kstar_indicator(&k, 0.1, 0.4, 0.2).unwrap();
        assert_relative_eq!(v, k.eval(0.4, 0.2).unwrap(), max_relative = 1e-14);
        // Additivity across adjacent windows.
        let whole = kstar_indicator(&k, 0.1, 0.9, 0.05).unwrap();
        let left = kstar_indicator(&k, 0.1, 0.5, 0.05).unwrap();
        let right = kstar_indicator(&k, 0.5, 0.9, 0.05).unwrap();
        assert_relative_eq!(whole, left + right, max_relative = 1e-13);
        // Brownian: indicator of the containing window.
        let b = rl(0.5);
        assert_eq!(kstar_indicator(&b, 0.1, 0.4, 0.2).unwrap(), 1.0);
        assert_eq!(kstar_indicator(&b, 0.1, 0.4, 0.6).unwrap(), 0.0);
        assert!(kstar_indicator(&k, 0.4, 0.1, 0.2).is_err());
    }

    #[test]
    fn product_fields_factorize_to_rounding() {
        let q = SingularQuad::default();
        let psi1 = |t: f64| t.powf(0.6) + 0.3;
        let psi2 = |t: f64| (2.0 * t).cos();
        for k in [rl(0.6), rl(0.75)] {
            for (u, v) in [(0.2, 0.6), (0.5, 0.5), (0.8, 0.3)] {
                let tensor = kstar_tensor(&k, |a, b| psi1(a) * psi2(b), u, v, &q).unwrap();
                let left = kstar_apply(&k, psi1, u, &q).unwrap();
                let right = kstar_apply(&k, psi2, v, &q).unwrap();
                let err = (tensor - left * right).abs();
                assert!(
                    err <= 1e-12 * (1.0 + tensor.abs()),
                    "factorization off by {err:.3e} at ({u}, {v})"
                );
            }
        }
    }

    #[test]
    fn operators_are_linear_in_the_field() {
        let q = SingularQuad::default();
        let k = rl(0.7);
        let f1 = |t: f64| t * t;
        let f2 = |t: f64| (t + 0.2).ln();
        let s = 0.4;
        let combo = kstar_apply(&k, |t| 2.0 * f1(t) - 0.5 * f2(t), s, &q).unwrap();
        let parts =
            2.0 * kstar_apply(&k, f1, s, &q).unwrap() - 0.5 * kstar_apply(&k, f2, s, &q).unwrap();
        assert_relative_eq!(combo, parts, max_relative = 1e-12);
    }

    #[test]
    fn additive_fields_have_zero_bk() {
        let q = SingularQuad::default();
        let k = rl(0.75);
        let (b, est) = bk_apply_with_estimate(&k, |a, c| a.powi(2) + c.sin(), 0.3, 0.6, &q).unwrap();
        // The increments vanish mathematically; in floats the pre-summed
        // terms leave cancellation residue at the 1e-18 scale.
        assert_abs_diff_eq!(b, 0.0, epsilon = 1e-14);
        assert!(est < 1e-14);
    }

    #[test]
    fn iterated_application_matches_tensor() {
        let q = SingularQuad::default();
        let k = rl(0.7);
        let psi = |a: f64, b: f64| (a + b).cos() + a * b;
        for (u, v) in [(0.3, 0.6), (0.5, 0.5)] {
            let (direct, est) = kstar_tensor_with_estimate(&k, psi, u, v, &q).unwrap();
            let (two_pass, _) = kstar_iterated_with_estimate(&k, psi, u, v, &q).unwrap();
            let diff = (two_pass - direct).abs();
            assert!(
                diff <= 5.0 * est.max(1e-15),
                "two-pass off by {diff:.3e} vs estimate {est:.3e}"
            );
        }
    }

    #[test]
    fn step_field_tensor_is_exact() {
        let grid = Grid1D::new(vec![0.0, 0.3, 0.7, 1.0]).unwrap();
        let part = Partition2D::new(grid.clone(), grid);
        let coeffs = vec![
            vec![0.5, -1.0, 2.0],
            vec![1.5, 0.25, -0.75],
            vec![-2.0, 1.0, 0.5],
        ];
        // Brownian kernel: the bilinear sum selects the containing cell.
        let b = rl(0.5);
        let v = kstar_tensor_step(&b, &part, &coeffs, 0.4, 0.85).unwrap();
        assert_relative_eq!(v, coeffs[1][2], max_relative = 1e-14);

        // Single cell: c · K(T,r1) K(T,r2).
        let k = rl(0.75);
        let one = Grid1D::new(vec![0.0, 1.0]).unwrap();
        let single = Partition2D::new(one.clone(), one);
        let v = kstar_tensor_step(&k, &single, &[vec![3.0]], 0.25, 0.6).unwrap();
        let expect = 3.0 * k.eval(1.0, 0.25).unwrap() * k.eval(1.0, 0.6).unwrap();
        assert_relative_eq!(v, expect, max_relative = 1e-14);
    }

    #[test]
    fn step_field_tensor_agrees_with_split_quadrature() {
        // The closed-form bilinear sum against the general quadrature path
        // with the domain split at every cell edge, evaluated mid-cell.
        let grid = Grid1D::new(vec![0.0, 0.3, 0.7, 1.0]).unwrap();
        let part = Partition2D::new(grid.clone(), grid.clone());
        let coeffs = vec![
            vec![0.5, -1.0, 2.0],
            vec![1.5, 0.25, -0.75],
            vec![-2.0, 1.0, 0.5],
        ];
        let k = rl(0.75);
        let (r1, r2) = (0.45, 0.5);
        let exact = kstar_tensor_step(&k, &part, &coeffs, r1, r2).unwrap();

        let pts = grid.points();
        let cell = |x: f64| -> usize {
            pts.windows(2).position(|w| x >= w[0] && x < w[1]).unwrap()
        };
        let psi = |a: f64, b: f64| coeffs[cell(a)][cell(b)];
        let splits: Vec<f64> = pts[1..pts.len() - 1].to_vec();
        let splits_r1: Vec<f64> = splits.iter().copied().filter(|&x| x > r1).collect();
        let splits_r2: Vec<f64> = splits.iter().copied().filter(|&x| x > r2).collect();
        let q = SingularQuad::default();
        let general =
            kstar_tensor_split(&k, psi, r1, r2, &q, &splits_r1, &splits_r2).unwrap();
        assert_abs_diff_eq!(general, exact, epsilon = 1e-8);
    }

    #[test]
    fn vector_fields_apply_componentwise() {
        let q = SingularQuad::default();
        let k = rl(0.75);
        let v = kstar_apply_vec(&k, |t| vec![t, t * t], 0.5, &q).unwrap();
        let s0 = kstar_apply(&k, |t| t, 0.5, &q).unwrap();
        let s1 = kstar_apply(&k, |t| t * t, 0.5, &q).unwrap();
        assert_eq!(v, vec![s0, s1]);
    }

    #[test]
    fn domain_and_accuracy_errors() {
        let k = rl(0.75);
        let q = SingularQuad::default();
        assert!(kstar_apply(&k, |t| t, 0.0, &q).is_err());
        assert!(kstar_apply(&k, |t| t, 1.0, &q).is_err());
        assert!(matches!(
            ak_apply(&k, |t| t, 0.5, &SingularQuad { panels: 2, ..q }),
            Err(Error::Domain(_))
        ));
        // A deliberately hopeless scheme: uniform mesh, one point per panel,
        // tight tolerance on a singular integrand.
        let bad = SingularQuad {
            panels: 4,
            points_per_panel: 1,
            grading_exponent: 1.0,
            holder_lambda_hint: 1.0,
            abs_tol: 1e-12,
        };
        match ak_apply(&k, |t| t, 0.5, &bad) {
            Err(Error::Accuracy { estimate, tolerance }) => assert!(estimate > tolerance),
            other => panic!("expected accuracy error, got {other:?}"),
        }
    }
}
