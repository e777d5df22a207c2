//! Composite Gauss–Legendre quadrature on power-graded meshes.
//!
//! The integrands this crate meets are weakly singular: near an endpoint `e`
//! they behave like `|x - e|^beta` with `beta > -1` (integrable, but with
//! unbounded derivatives). Composite Gauss–Legendre on a uniform mesh
//! converges slowly for such integrands; on a mesh whose panel widths shrink
//! like a power of the distance to the singular endpoint, the error decays at
//! the smooth-integrand rate again. Concretely, the breakpoints toward a
//! left singular endpoint `a` are
//!
//! ```text
//! x_k = a + (b - a) * (k / m)^g,   k = 0..m
//! ```
//!
//! with grading exponent `g >= 1`; `g = 1` is the uniform mesh. For an
//! `x^beta` singularity the leading error term is the first-panel mass
//! `~ m^{-g(1+beta)}`, so accuracy targets translate directly into grading
//! requirements: `g >= 1 / (1 + beta)` is the bare minimum for first-order
//! convergence, while the 1e-8 default tolerances against the strongest
//! admissible singularities (`beta = -1/2`) need `g` around 14. Operator-side
//! integrands are milder (`beta >= -1/4`) and use exponents clamped to
//! `[1, 8]`.
//!
//! Gauss–Legendre nodes are computed once per point count by Newton's method
//! on the Legendre polynomial recurrence and cached process-wide; the node
//! tables are immutable shared data and safe for concurrent use.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// Gauss–Legendre rule on the reference interval `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    /// Nodes in `(-1, 1)`, strictly increasing.
    pub nodes: Vec<f64>,
    /// Positive weights summing to 2.
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Computes the `n`-point rule by Newton iteration on P_n.
    ///
    /// The initial guesses `cos(pi (i - 1/4) / (n + 1/2))` are accurate to
    /// O(n^-2), so a handful of Newton steps reach machine precision.
    fn compute(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one point");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                // Legendre recurrence: (k+1) P_{k+1} = (2k+1) x P_k - k P_{k-1}.
                let mut p0 = 1.0;
                let mut p1 = x;
                for k in 1..n {
                    let p2 = ((2 * k + 1) as f64 * x * p1 - k as f64 * p0) / (k + 1) as f64;
                    p0 = p1;
                    p1 = p2;
                }
                // Derivative from P_n and P_{n-1}.
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-15 {
                    break;
                }
            }
            // Nodes come out in decreasing order of x for increasing i.
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    /// Integrates `f` over `[a, b]` with this rule (single panel).
    pub fn integrate<F: Fn(f64) -> f64>(&self, a: f64, b: f64, f: F) -> f64 {
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        let mut acc = 0.0;
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * x);
        }
        acc * half
    }
}

/// Returns the cached `n`-point Gauss–Legendre rule.
pub fn gauss_legendre(n: usize) -> Arc<GaussLegendre> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussLegendre>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("quadrature cache poisoned");
    guard
        .entry(n)
        .or_insert_with(|| Arc::new(GaussLegendre::compute(n)))
        .clone()
}

/// Which endpoint(s) of the integration interval carry a singularity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Grading {
    /// Panels shrink toward the left endpoint.
    TowardLeft,
    /// Panels shrink toward the right endpoint.
    TowardRight,
    /// Panels shrink toward both endpoints (mesh split at the midpoint).
    TowardBoth,
}

/// Breakpoints of a power-graded mesh of `panels` panels on `[a, b]`.
///
/// For `Grading::TowardBoth` the panel budget is split evenly between the two
/// halves (one extra panel goes to the left half when `panels` is odd).
///
/// Grading toward the point 0 itself can descend arbitrarily deep (the
/// subnormal range keeps breakpoints distinct), but toward a nonzero anchor
/// the resolution floor is the anchor's ulp: there the exponent is capped so
/// the innermost panel stays about `2^-45` of the interval wide, and any
/// breakpoints that still collide after rounding are merged. The mass thereby
/// left unresolved next to the anchor is `O(2^-45 (1+beta))` of the interval —
/// far below the tolerances used anywhere in this crate.
pub fn graded_mesh(a: f64, b: f64, panels: usize, exponent: f64, grading: Grading) -> Vec<f64> {
    assert!(panels >= 1 && b > a, "degenerate mesh request");
    let capped = |anchor: f64, m: usize| -> f64 {
        let g = exponent.max(1.0);
        if anchor == 0.0 || m < 2 {
            g
        } else {
            g.min(45.0 / (m as f64).log2())
        }
    };
    // Breakpoints graded toward `a`, for an interval of length `len`.
    let toward = |a: f64, len: f64, m: usize, g: f64| -> Vec<f64> {
        (0..=m)
            .map(|k| a + len * ((k as f64 / m as f64).powf(g)))
            .collect()
    };
    let mut pts = match grading {
        Grading::TowardLeft => toward(a, b - a, panels, capped(a, panels)),
        Grading::TowardRight => {
            let mut pts: Vec<f64> = toward(0.0, b - a, panels, capped(b, panels))
                .iter()
                .map(|x| b - x)
                .collect();
            pts.reverse();
            pts
        }
        Grading::TowardBoth => {
            let ml = panels.div_ceil(2).max(1);
            let mr = (panels - ml).max(1);
            let mid = 0.5 * (a + b);
            let mut pts = toward(a, mid - a, ml, capped(a, ml));
            let mut right: Vec<f64> = toward(0.0, mid - a, mr, capped(b, mr))
                .iter()
                .map(|x| b - x)
                .collect();
            right.reverse();
            pts.pop(); // midpoint is duplicated
            pts.extend(right);
            pts
        }
    };
    pts.dedup();
    pts
}

/// Integrates `f` over each panel of `mesh` with the cached `points`-point
/// Gauss–Legendre rule and sums the panels left to right.
///
/// All evaluation points are strictly interior to their panel, so integrands
/// singular exactly at a mesh breakpoint are never evaluated there.
pub fn integrate_mesh<F: Fn(f64) -> f64>(mesh: &[f64], points: usize, f: F) -> f64 {
    let rule = gauss_legendre(points);
    let mut acc = 0.0;
    for w in mesh.windows(2) {
        acc += rule.integrate(w[0], w[1], &f);
    }
    acc
}

/// Graded-mesh integration with a panel-doubling error estimate.
///
/// Returns `(value, estimate)` where `value` is the fine (doubled-panel)
/// result and `estimate = |fine - coarse|`. The estimate is the usual
/// a-posteriori proxy for the coarse error and a conservative one for the
/// returned fine value.
pub fn integrate_graded<F: Fn(f64) -> f64>(
    a: f64,
    b: f64,
    panels: usize,
    points: usize,
    exponent: f64,
    grading: Grading,
    f: F,
) -> (f64, f64) {
    let coarse = integrate_mesh(&graded_mesh(a, b, panels, exponent, grading), points, &f);
    let fine = integrate_mesh(&graded_mesh(a, b, 2 * panels, exponent, grading), points, &f);
    (fine, (fine - coarse).abs())
}

/// Graded-mesh integration that doubles the panel count until the
/// doubling estimate drops below `tol` (or `max_doublings` is exhausted).
///
/// Returns `(value, estimate, converged)`; `value` is always the finest
/// result computed and `estimate` the last doubling difference, so a caller
/// seeing `converged == false` can still report how far off it ended up.
pub fn integrate_adaptive<F: Fn(f64) -> f64>(
    a: f64,
    b: f64,
    panels: usize,
    points: usize,
    exponent: f64,
    grading: Grading,
    tol: f64,
    max_doublings: usize,
    f: F,
) -> (f64, f64, bool) {
    let mut m = panels.max(2);
    let mut value = integrate_mesh(&graded_mesh(a, b, m, exponent, grading), points, &f);
    let mut estimate = f64::INFINITY;
    for _ in 0..max_doublings {
        m *= 2;
        let fine = integrate_mesh(&graded_mesh(a, b, m, exponent, grading), points, &f);
        estimate = (fine - value).abs();
        value = fine;
        if estimate <= tol {
            return (value, estimate, true);
        }
    }
    (value, estimate, estimate <= tol)
}

/// Quadrature parameters for kernel-derived covariance evaluation.
///
/// Drives the computation of `R(s,t) = ∫ K(t,r) K(s,r) dr` on a mesh graded
/// toward both endpoints of `(0, s∧t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureScheme {
    /// Number of panels of the graded mesh.
    pub panels: usize,
    /// Gauss–Legendre points per panel.
    pub points_per_panel: usize,
    /// Requested grading exponent (the effective exponent may be raised to
    /// match the kernel's singularity, see `kernel_covariance`).
    pub grading_exponent: f64,
    /// Absolute error tolerance per unit interval.
    pub abs_tol: f64,
}

impl Default for QuadratureScheme {
    fn default() -> Self {
        QuadratureScheme {
            panels: 32,
            points_per_panel: 8,
            grading_exponent: 3.0,
            abs_tol: 1e-8,
        }
    }
}

/// Quadrature parameters for the weakly singular operator integrals
/// (`A^K`, `B^K` and friends).
///
/// `holder_lambda_hint` is the expected Hölder exponent of the difference
/// `phi(r) - phi(s)` appearing in those integrands; together with the
/// kernel's singularity exponent `alpha` it determines the grading needed
/// near `r = s`, where the integrand behaves like `(r - s)^{lambda - alpha - 1}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularQuad {
    /// Number of panels of the graded mesh (at least 4).
    pub panels: usize,
    /// Gauss–Legendre points per panel.
    pub points_per_panel: usize,
    /// Requested grading exponent.
    pub grading_exponent: f64,
    /// Expected regularity of the integrand's difference factor.
    pub holder_lambda_hint: f64,
    /// Absolute error tolerance.
    pub abs_tol: f64,
}

impl Default for SingularQuad {
    fn default() -> Self {
        // Exponent 7 reaches the 1e-8 tolerance against the worst admissible
        // operator integrand `(r-s)^{-1/4 - 1}` difference structure at 16
        // panels, while keeping the innermost Gauss nodes far enough from the
        // singular endpoint that finite-difference kernel derivatives do not
        // trip their step-underflow guard.
        SingularQuad {
            panels: 16,
            points_per_panel: 8,
            grading_exponent: 7.0,
            holder_lambda_hint: 1.0,
            abs_tol: 1e-8,
        }
    }
}

impl SingularQuad {
    /// Effective grading exponent for a kernel of singularity `alpha`:
    /// at least `1 / (lambda_hint - alpha)`, clamped to `[1, 8]`.
    pub fn effective_grading(&self, alpha: f64) -> f64 {
        let needed = if self.holder_lambda_hint > alpha {
            1.0 / (self.holder_lambda_hint - alpha)
        } else {
            8.0
        };
        self.grading_exponent.max(needed).clamp(1.0, 8.0)
    }
}

/// Deterministic pairwise (tree) summation.
///
/// Summing a slice this way is independent of how the terms were produced
/// (in particular of the rayon thread count), which is what makes the
/// experiment CSVs byte-identical across `--threads` settings, and it halves
/// the worst-case round-off growth compared to a running sum.
pub fn tree_sum(terms: &[f64]) -> f64 {
    match terms.len() {
        0 => 0.0,
        1 => terms[0],
        2 => terms[0] + terms[1],
        n => {
            let mid = n / 2;
            tree_sum(&terms[..mid]) + tree_sum(&terms[mid..])
        }
    }
}
