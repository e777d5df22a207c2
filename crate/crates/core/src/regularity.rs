//! p-variation estimators and Hölder bi-continuity profiles.
//!
//! Two families of sampled-function diagnostics live here:
//!
//! * **p-variation** — [`pvar_1d`] is the exact supremum over all
//!   subpartitions of the sample grid (dynamic programming); [`pvar_2d_grid`]
//!   is a documented *lower bound* of the 2D p-variation, the maximum of the
//!   rectangular-increment grid sum over the full grid and its dyadic
//!   coarsenings. The true 2D supremum ranges over all pairs of subpartitions
//!   and is combinatorially out of reach; the lower bound is what the Young
//!   inequality checks need.
//! * **Hölder fitting** — moduli of continuity measured at dyadic gap scales
//!   and fitted by log–log least squares. [`holder_bifit_2d`] fits the three
//!   bounds of bi-continuity (two directional, one rectangular) and decides
//!   between the plain and the *strong* flavor: strong means the rectangular
//!   increments factor as `C·Δu^λ·Δv^λ`, which is what the tensor-operator
//!   machinery downstream requires of its integrands.
//!
//! A plain bi-continuous profile can always be traded for a strong one at
//! half the exponent ([`strong_downgrade`]): a rectangular increment is the
//! difference of two u-increments *and* the difference of two v-increments,
//! so it is bounded by `2C·min(Δu,Δv)^λ ≤ 2C·Δu^{λ/2}·Δv^{λ/2}`.

use crate::error::{Error, Result};

/// Strictly increasing times spanning `[0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid1D {
    points: Vec<f64>,
}

impl Grid1D {
    /// Validating constructor: at least two points, starting at 0, strictly
    /// increasing.
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::domain("grid needs at least 2 points".to_string()));
        }
        if points[0] != 0.0 {
            return Err(Error::domain(format!(
                "grid must start at 0, got {}",
                points[0]
            )));
        }
        if points.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::domain(
                "grid points must be strictly increasing".to_string(),
            ));
        }
        Ok(Grid1D { points })
    }

    /// Uniform grid with `panels` panels on `[0, t_horizon]`.
    pub fn uniform(t_horizon: f64, panels: usize) -> Result<Self> {
        if !(t_horizon > 0.0) || panels == 0 {
            return Err(Error::domain("uniform grid needs T > 0, panels >= 1".to_string()));
        }
        let n = panels as f64;
        Grid1D::new((0..=panels).map(|k| t_horizon * k as f64 / n).collect())
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false // invariant: at least 2 points
    }

    /// Largest gap between consecutive points.
    pub fn mesh(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }

    /// Right endpoint `T`.
    pub fn t_horizon(&self) -> f64 {
        *self.points.last().expect("grid nonempty")
    }

    /// Samples a function at every grid point.
    pub fn sample<F: Fn(f64) -> f64>(&self, f: F) -> Vec<f64> {
        self.points.iter().map(|&t| f(t)).collect()
    }
}

/// Product partition of `[0, T]²`.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition2D {
    pub u_grid: Grid1D,
    pub v_grid: Grid1D,
}

impl Partition2D {
    pub fn new(u_grid: Grid1D, v_grid: Grid1D) -> Self {
        Partition2D { u_grid, v_grid }
    }

    /// Maximum of the two 1D meshes.
    pub fn mesh(&self) -> f64 {
        self.u_grid.mesh().max(self.v_grid.mesh())
    }

    /// Samples a 2D field row-major: `out[i][j] = f(u_i, v_j)`.
    pub fn sample<F: Fn(f64, f64) -> f64>(&self, f: F) -> Vec<Vec<f64>> {
        self.u_grid
            .points()
            .iter()
            .map(|&u| self.v_grid.points().iter().map(|&v| f(u, v)).collect())
            .collect()
    }
}

/// Flavor of a fitted Hölder bi-continuity profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HolderFlavor {
    /// Directional increments are `λ`-Hölder; rectangular increments carry
    /// no useful per-axis exponent of their own.
    BiContinuous,
    /// Rectangular increments additionally factor as `C·Δu^λ·Δv^λ`.
    StronglyBiContinuous,
}

/// Fitted Hölder bi-continuity profile of a sampled 2D field.
#[derive(Debug, Clone, PartialEq)]
pub struct HolderProfile {
    /// Hölder exponent in `(0, 1]`.
    pub lambda: f64,
    /// Fitted constant (finite, nonnegative).
    pub const_c: f64,
    pub flavor: HolderFlavor,
    /// Goodness of the weakest log–log fit that informed the profile.
    pub fit_r2: f64,
}

/// Exact 1D p-variation of the samples over all subpartitions.
///
/// `best[j]` is the maximal `Σ|increment|^p` over subpartitions of
/// `{0..=j}` ending at `j`; the recursion tries every previous endpoint, so
/// the result is the true supremum restricted to the sample points —
/// which for sampled data *is* the p-variation.
pub fn pvar_1d(samples: &[f64], p: f64) -> Result<f64> {
    if p < 1.0 {
        return Err(Error::domain(format!("p-variation needs p >= 1, got {p}")));
    }
    if samples.len() < 2 {
        return Err(Error::domain("p-variation needs at least 2 samples".to_string()));
    }
    let n = samples.len();
    let mut best = vec![0.0_f64; n];
    for j in 1..n {
        let mut b = f64::NEG_INFINITY;
        for i in 0..j {
            let cand = best[i] + (samples[j] - samples[i]).abs().powf(p);
            if cand > b {
                b = cand;
            }
        }
        best[j] = b;
    }
    Ok(best[n - 1].powf(1.0 / p))
}

/// Lower-bound estimator of the 2D p-variation on a sampled grid.
///
/// Evaluates the rectangular-increment grid sum `(Σ_{i,j} |ΔΔf|^p)^{1/p}`
/// on the full sample grid and on every dyadic coarsening (every 2nd, 4th, …
/// index, always keeping the last row/column), and returns the maximum.
/// Unlike the 1D case this does not search all subpartitions, so it is a
/// lower bound of the true 2D p-variation.
pub fn pvar_2d_grid(samples: &[Vec<f64>], p: f64) -> Result<f64> {
    if p < 1.0 {
        return Err(Error::domain(format!("p-variation needs p >= 1, got {p}")));
    }
    let nu = samples.len();
    if nu < 2 || samples[0].len() < 2 {
        return Err(Error::domain("2D p-variation needs a 2x2 grid at least".to_string()));
    }
    let nv = samples[0].len();
    if samples.iter().any(|r| r.len() != nv) {
        return Err(Error::domain("ragged sample matrix".to_string()));
    }

    // Index subsets 0, s, 2s, ..., plus the final index.
    let stride_indices = |n: usize, s: usize| -> Vec<usize> {
        let mut idx: Vec<usize> = (0..n).step_by(s).collect();
        if *idx.last().expect("nonempty") != n - 1 {
            idx.push(n - 1);
        }
        idx
    };

    let mut best = 0.0_f64;
    let mut stride = 1usize;
    while stride < nu.max(nv) {
        let iu = stride_indices(nu, stride);
        let iv = stride_indices(nv, stride);
        if iu.len() >= 2 && iv.len() >= 2 {
            let mut acc = 0.0;
            for wi in iu.windows(2) {
                for wj in iv.windows(2) {
                    let inc = samples[wi[1]][wj[1]] + samples[wi[0]][wj[0]]
                        - samples[wi[1]][wj[0]]
                        - samples[wi[0]][wj[1]];
                    acc += inc.abs().powf(p);
                }
            }
            best = best.max(acc.powf(1.0 / p));
        }
        stride *= 2;
    }
    Ok(best)
}

/// Dyadic gap scales `h_k = T·2^{-k}`, `k = 1..=K`, with `K` the deepest
/// scale at which at least `min_pairs` sample pairs have gap ≤ `h_K`.
fn dyadic_scales(grid: &Grid1D, min_pairs: usize) -> Vec<f64> {
    let t = grid.t_horizon();
    let pts = grid.points();
    let mut scales = Vec::new();
    for k in 1..48 {
        let h = t * 0.5_f64.powi(k);
        let mut pairs = 0usize;
        'outer: for i in 0..pts.len() {
            for j in (i + 1)..pts.len() {
                if pts[j] - pts[i] <= h {
                    pairs += 1;
                    if pairs >= min_pairs {
                        break 'outer;
                    }
                } else {
                    break;
                }
            }
        }
        if pairs >= min_pairs {
            scales.push(h);
        } else {
            break;
        }
    }
    scales
}

/// Modulus of continuity `ω(h) = sup_{|t_i - t_j| <= h} |f_i - f_j|` for
/// each scale in `scales` (which must be decreasing).
fn modulus_1d(grid: &Grid1D, samples: &[f64], scales: &[f64]) -> Vec<f64> {
    let pts = grid.points();
    scales
        .iter()
        .map(|&h| {
            let mut m = 0.0_f64;
            for i in 0..pts.len() {
                for j in (i + 1)..pts.len() {
                    if pts[j] - pts[i] > h {
                        break;
                    }
                    m = m.max((samples[j] - samples[i]).abs());
                }
            }
            m
        })
        .collect()
}

/// Least-squares line through `(ln x, ln y)`: returns `(slope, exp(intercept), r²)`.
/// Pairs with `y = 0` are skipped; fewer than two usable pairs → `None`.
fn loglog_fit(xs: &[f64], ys: &[f64]) -> Option<(f64, f64, f64)> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(_, &y)| y > 0.0)
        .map(|(&x, &y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = pts.iter().map(|p| (p.1 - my) * (p.1 - my)).sum();
    let ss_res: f64 = pts
        .iter()
        .map(|p| {
            let e = p.1 - (slope * p.0 + intercept);
            e * e
        })
        .sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Some((slope, intercept.exp(), r2))
}

/// Log–log fit of the 1D modulus of continuity over dyadic gap scales.
///
/// Returns `(lambda, const_c)` with `ω(h) ≈ const_c · h^lambda`. Constant
/// input (or input too flat for a fit) reports `(1, 0)`: every bound
/// `C·h^λ` with `C = 0` holds, and exponent 1 is the strongest claim.
pub fn holder_fit_1d(grid: &Grid1D, samples: &[f64]) -> Result<(f64, f64)> {
    if samples.len() != grid.len() {
        return Err(Error::domain(format!(
            "sample count {} does not match grid size {}",
            samples.len(),
            grid.len()
        )));
    }
    if samples.len() < 8 {
        return Err(Error::domain("Hölder fit needs at least 8 samples".to_string()));
    }
    let scales = dyadic_scales(grid, 4);
    let omega = modulus_1d(grid, samples, &scales);
    match loglog_fit(&scales, &omega) {
        Some((slope, c, _)) => Ok((slope, c)),
        None => Ok((1.0, 0.0)),
    }
}

/// Directional and rectangular moduli of a sampled 2D field at the given
/// scales: `(omega_u, omega_v, omega_rect)` where the rectangular modulus
/// at scale `h` is the sup of `|rect increment|` over cells with *both*
/// gaps ≤ `h`.
fn moduli_2d(
    part: &Partition2D,
    samples: &[Vec<f64>],
    scales: &[f64],
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let us = part.u_grid.points();
    let vs = part.v_grid.points();
    let nk = scales.len();

    // Deepest scale index a gap still fits in (scales are decreasing).
    let scale_index = |gap: f64| -> Option<usize> {
        if gap > scales[0] {
            return None;
        }
        let mut k = 0;
        while k + 1 < nk && gap <= scales[k + 1] {
            k += 1;
        }
        Some(k)
    };

    let mut bucket_u = vec![0.0_f64; nk];
    for j in 0..vs.len() {
        for i1 in 0..us.len() {
            for i2 in (i1 + 1)..us.len() {
                if let Some(k) = scale_index(us[i2] - us[i1]) {
                    let d = (samples[i2][j] - samples[i1][j]).abs();
                    bucket_u[k] = bucket_u[k].max(d);
                } else {
                    break;
                }
            }
        }
    }
    let mut bucket_v = vec![0.0_f64; nk];
    for row in samples {
        for j1 in 0..vs.len() {
            for j2 in (j1 + 1)..vs.len() {
                if let Some(k) = scale_index(vs[j2] - vs[j1]) {
                    let d = (row[j2] - row[j1]).abs();
                    bucket_v[k] = bucket_v[k].max(d);
                } else {
                    break;
                }
            }
        }
    }
    // Rectangular: bucket by the larger of the two gaps.
    let mut bucket_r = vec![0.0_f64; nk];
    for i1 in 0..us.len() {
        for i2 in (i1 + 1)..us.len() {
            let Some(ku) = scale_index(us[i2] - us[i1]) else { break };
            for j1 in 0..vs.len() {
                for j2 in (j1 + 1)..vs.len() {
                    let Some(kv) = scale_index(vs[j2] - vs[j1]) else { break };
                    let k = ku.min(kv);
                    let inc = (samples[i2][j2] + samples[i1][j1]
                        - samples[i2][j1]
                        - samples[i1][j2])
                        .abs();
                    bucket_r[k] = bucket_r[k].max(inc);
                }
            }
        }
    }
    // omega(h_k) = max over scales at least as deep as k.
    let suffix_max = |mut b: Vec<f64>| -> Vec<f64> {
        for k in (0..b.len().saturating_sub(1)).rev() {
            b[k] = b[k].max(b[k + 1]);
        }
        b
    };
    (suffix_max(bucket_u), suffix_max(bucket_v), suffix_max(bucket_r))
}

/// Fits the three bounds of Hölder bi-continuity on a sampled 2D field.
///
/// The two directional moduli give exponents `λ_u, λ_v`; the profile's
/// `lambda` is their minimum (clamped to `(0, 1]`). The rectangular modulus
/// at scale `h` fits `ω_r(h) ≈ C·h^σ`; since the strong bound reads
/// `C·Δu^a·Δv^a`, the fitted per-axis rectangular exponent is `a = σ/2`,
/// and the profile is **strongly** bi-continuous when `a ≥ λ − 0.1`.
///
/// Fields whose rectangular increments vanish identically (additive fields,
/// `g(u) + h(v)`) satisfy the strong bound vacuously; no exponent is
/// measurable from zeros, so they are reported as plain `BiContinuous` with
/// the directional exponent.
pub fn holder_bifit_2d(part: &Partition2D, samples: &[Vec<f64>]) -> Result<HolderProfile> {
    const FIT_SLACK: f64 = 0.1;
    let (nu, nv) = (part.u_grid.len(), part.v_grid.len());
    if nu < 8 || nv < 8 {
        return Err(Error::domain("bi-continuity fit needs >= 8 points per axis".to_string()));
    }
    if samples.len() != nu || samples.iter().any(|r| r.len() != nv) {
        return Err(Error::domain("sample matrix does not match the partition".to_string()));
    }
    let scales_u = dyadic_scales(&part.u_grid, 4);
    let scales_v = dyadic_scales(&part.v_grid, 4);
    // Shared scale list: the coarser horizon bounds both axes.
    let scales = if scales_u.len() <= scales_v.len() { scales_u } else { scales_v };
    if scales.len() < 2 {
        return Err(Error::domain("grids too coarse for a dyadic-scale fit".to_string()));
    }
    let (omega_u, omega_v, omega_r) = moduli_2d(part, samples, &scales);

    let fit_u = loglog_fit(&scales, &omega_u);
    let fit_v = loglog_fit(&scales, &omega_v);
    // Constant-in-one-direction fields: that direction poses no constraint.
    let (lam_u, c_u, r2_u) = fit_u.unwrap_or((1.0, 0.0, 1.0));
    let (lam_v, c_v, r2_v) = fit_v.unwrap_or((1.0, 0.0, 1.0));
    let lambda = lam_u.min(lam_v).clamp(f64::MIN_POSITIVE, 1.0);
    let const_c = c_u.max(c_v);
    let dir_r2 = r2_u.min(r2_v);

    match loglog_fit(&scales, &omega_r) {
        Some((sigma, c_r, r2_r)) => {
            let per_axis = 0.5 * sigma;
            if per_axis >= lambda - FIT_SLACK {
                Ok(HolderProfile {
                    lambda,
                    const_c: const_c.max(c_r),
                    flavor: HolderFlavor::StronglyBiContinuous,
                    fit_r2: dir_r2.min(r2_r),
                })
            } else {
                Ok(HolderProfile {
                    lambda,
                    const_c,
                    flavor: HolderFlavor::BiContinuous,
                    fit_r2: dir_r2.min(r2_r),
                })
            }
        }
        // All rectangular increments vanished: vacuously strong, reported
        // as the plain flavor since no rectangular exponent is measurable.
        None => Ok(HolderProfile {
            lambda,
            const_c,
            flavor: HolderFlavor::BiContinuous,
            fit_r2: dir_r2,
        }),
    }
}

/// Trades a plain bi-continuous profile for a strongly bi-continuous one at
/// half the exponent.
///
/// A rectangular increment is a difference of two u-increments and also a
/// difference of two v-increments, hence bounded by `2C·min(Δu,Δv)^λ`,
/// and `min(Δu,Δv)^λ ≤ Δu^{λ/2}·Δv^{λ/2}`.
pub fn strong_downgrade(profile: &HolderProfile) -> Result<HolderProfile> {
    if profile.flavor != HolderFlavor::BiContinuous {
        return Err(Error::domain(
            "strong_downgrade applies to plain bi-continuous profiles".to_string(),
        ));
    }
    Ok(HolderProfile {
        lambda: 0.5 * profile.lambda,
        const_c: 2.0 * profile.const_c,
        flavor: HolderFlavor::StronglyBiContinuous,
        fit_r2: profile.fit_r2,
    })
}
