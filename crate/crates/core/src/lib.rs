//! 2D Young–Stieltjes integration against Volterra covariance functions.
//!
//! This crate computes integrals `∫∫ φ(u,v) dR(u,v)` of Hölder-regular
//! integrands against the covariance function `R` of a Volterra Gaussian
//! process (fractional Brownian motion, Riemann–Liouville and user-supplied
//! kernels), and numerically verifies the operator identities that justify
//! them — in particular that the 2D Young–Stieltjes integral equals the
//! diagonal integral of the tensor operator `K* ⊗ K*` applied to the
//! integrand:
//!
//! ```text
//! ∫∫_{[0,T]^2} φ dR  =  ∫_0^T (K* ⊗ K*) φ (r, r) dr
//! ```
//!
//! Module map:
//!
//! * [`kernels`] — Volterra kernels `K(t,s)`, their `∂K/∂t`, the Gauss
//!   hypergeometric function and singularity-bound verification.
//! * [`covariance`] — covariance functions (closed-form fBm and
//!   kernel-derived by weakly singular quadrature) and rectangular
//!   increments.
//! * [`regularity`] — grids and partitions, 1D/2D p-variation, Hölder
//!   (bi-)continuity fitting.
//! * [`operators`] — the operator `K*`, its pieces `A^K`/`B^K`, the tensor
//!   operator `K* ⊗ K*` and their exact action on step functions.
//! * [`integrator`] — 2D Riemann–Stieltjes sums, refinement schedules, the
//!   integral identities and L² convergence experiments, Young's inequality.
//! * [`quadrature`] — composite Gauss–Legendre rules on power-graded meshes
//!   (shared numerical plumbing).
//! * [`catalog`] — the string-addressable test-function and kernel catalog
//!   used by the CLI and the acceptance experiments.
//! * [`cli`] — the `vy` experiment driver (config parsing, CSV emission).
//!
//! Everything is deterministic by construction: parallel reductions are
//! reassociated into a fixed tree order, so results are bit-identical
//! across thread counts.

pub mod catalog;
pub mod cli;
pub mod covariance;
pub mod error;
pub mod integrator;
pub mod kernels;
pub mod operators;
pub mod quadrature;
pub mod regularity;

pub use error::{Error, Result};
