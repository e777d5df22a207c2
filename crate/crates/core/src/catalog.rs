//! String-addressable catalog of test functions, kernels and covariances.
//!
//! Experiment drivers (CLI, foreign bindings) refer to integrands and
//! kernels by compact ids so that new runs need no code changes:
//!
//! * 1D functions: `s` / `t` / `id` (identity), `1` / `one`, `cos`, `sin`,
//!   `pow:<lambda>` (`x^lambda`), `const:<c>`.
//! * 2D fields: `prod:<f>,<g>` and `sum:<f>,<g>` over 1D ids, `min`,
//!   `absdiff:<lambda>` (`|u−v|^lambda`), `const:<c>`,
//!   `fbmcov:H=<h>` (closed-form fractional Brownian covariance).
//! * Kernels: `rl:H=<h>` (Riemann–Liouville), `fbm:H=<h>`.
//! * Covariances: `fbm-closed:H=<h>`, `kernel:<kernel-id>`.
//!
//! Unknown ids come back as domain errors whose message lists the valid
//! grammar, so driver layers can surface the catalog directly.

use std::sync::Arc;

use crate::covariance::{fbm_covariance, CovarianceFunction};
use crate::error::{Error, Result};
use crate::kernels::VolterraKernel;
use crate::quadrature::QuadratureScheme;

/// Shared-ownership 1D test function.
pub type Field1D = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
/// Shared-ownership 2D test field.
pub type Field2D = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Grammar of 1D function ids.
pub const FUNCTIONS_1D: &str = "s | t | id | 1 | one | cos | sin | pow:<lambda> | const:<c>";
/// Grammar of 2D field ids.
pub const FUNCTIONS_2D: &str =
    "prod:<f>,<g> | sum:<f>,<g> | min | absdiff:<lambda> | const:<c> | fbmcov:H=<h>";
/// Grammar of kernel ids.
pub const KERNELS: &str = "rl:H=<h> | fbm:H=<h>";
/// Grammar of covariance ids.
pub const COVARIANCES: &str = "fbm-closed:H=<h> | kernel:<kernel-id>";

/// Multi-line human-readable catalog, used by `--list` and unknown-id
/// error paths.
pub fn catalog_help() -> String {
    format!(
        "catalog:\n  1D functions:  {FUNCTIONS_1D}\n  2D fields:     {FUNCTIONS_2D}\n  kernels:       {KERNELS}\n  covariances:   {COVARIANCES}"
    )
}

fn parse_number(text: &str, what: &str) -> Result<f64> {
    text.trim()
        .parse::<f64>()
        .map_err(|_| Error::domain(format!("{what}: cannot parse number from '{text}'")))
}

/// Parses `H=<h>` style parameters.
fn parse_named(text: &str, name: &str, what: &str) -> Result<f64> {
    let rest = text
        .strip_prefix(name)
        .and_then(|r| r.strip_prefix('='))
        .ok_or_else(|| Error::domain(format!("{what}: expected '{name}=<value>', got '{text}'")))?;
    parse_number(rest, what)
}

/// Resolves a 1D function id.
pub fn function_1d(id: &str) -> Result<Field1D> {
    let id = id.trim();
    if let Some(rest) = id.strip_prefix("pow:") {
        let lambda = parse_number(rest, "pow")?;
        if lambda <= 0.0 {
            return Err(Error::domain(format!(
                "pow: exponent lambda = {lambda} must be > 0"
            )));
        }
        return Ok(Arc::new(move |x: f64| x.powf(lambda)));
    }
    if let Some(rest) = id.strip_prefix("const:") {
        let c = parse_number(rest, "const")?;
        return Ok(Arc::new(move |_| c));
    }
    match id {
        "s" | "t" | "id" => Ok(Arc::new(|x| x)),
        "1" | "one" => Ok(Arc::new(|_| 1.0)),
        "cos" => Ok(Arc::new(f64::cos)),
        "sin" => Ok(Arc::new(f64::sin)),
        _ => Err(Error::domain(format!(
            "unknown 1D function id '{id}'; available: {FUNCTIONS_1D}"
        ))),
    }
}

/// Resolves a 2D field id.
pub fn function_2d(id: &str) -> Result<Field2D> {
    let id = id.trim();
    if let Some(rest) = id.strip_prefix("prod:") {
        let (f, g) = split_pair(rest, "prod")?;
        return Ok(Arc::new(move |u, v| f(u) * g(v)));
    }
    if let Some(rest) = id.strip_prefix("sum:") {
        let (f, g) = split_pair(rest, "sum")?;
        return Ok(Arc::new(move |u, v| f(u) + g(v)));
    }
    if let Some(rest) = id.strip_prefix("absdiff:") {
        let lambda = parse_number(rest, "absdiff")?;
        if lambda <= 0.0 {
            return Err(Error::domain(format!(
                "absdiff: exponent lambda = {lambda} must be > 0"
            )));
        }
        return Ok(Arc::new(move |u: f64, v: f64| (u - v).abs().powf(lambda)));
    }
    if let Some(rest) = id.strip_prefix("const:") {
        let c = parse_number(rest, "const")?;
        return Ok(Arc::new(move |_, _| c));
    }
    if let Some(rest) = id.strip_prefix("fbmcov:") {
        let h = parse_named(rest, "H", "fbmcov")?;
        if h <= 0.0 || h >= 1.0 {
            return Err(Error::domain(format!(
                "fbmcov: Hurst index H = {h} out of (0,1)"
            )));
        }
        return Ok(Arc::new(move |u, v| fbm_covariance(h, u, v)));
    }
    match id {
        "min" => Ok(Arc::new(f64::min)),
        _ => Err(Error::domain(format!(
            "unknown 2D field id '{id}'; available: {FUNCTIONS_2D}"
        ))),
    }
}

/// Splits `"<f>,<g>"` into two resolved 1D functions (1D ids contain no
/// commas, so the split is unambiguous).
fn split_pair(rest: &str, what: &str) -> Result<(Field1D, Field1D)> {
    let (a, b) = rest.split_once(',').ok_or_else(|| {
        Error::domain(format!("{what}: expected '<f>,<g>' with 1D ids, got '{rest}'"))
    })?;
    Ok((function_1d(a)?, function_1d(b)?))
}

/// Resolves a kernel id at the given horizon.
pub fn kernel(id: &str, t_horizon: f64) -> Result<VolterraKernel> {
    let id = id.trim();
    if let Some(rest) = id.strip_prefix("rl:") {
        let h = parse_named(rest, "H", "rl")?;
        return VolterraKernel::riemann_liouville(h, t_horizon);
    }
    if let Some(rest) = id.strip_prefix("fbm:") {
        let h = parse_named(rest, "H", "fbm")?;
        return VolterraKernel::fbm(h, t_horizon);
    }
    Err(Error::domain(format!(
        "unknown kernel id '{id}'; available: {KERNELS}"
    )))
}

/// Resolves a covariance id at the given horizon; kernel-derived
/// covariances use `quad` for their diagonal quadratures.
pub fn covariance(
    id: &str,
    t_horizon: f64,
    quad: &QuadratureScheme,
) -> Result<CovarianceFunction> {
    let id = id.trim();
    if let Some(rest) = id.strip_prefix("fbm-closed:") {
        let h = parse_named(rest, "H", "fbm-closed")?;
        return CovarianceFunction::closed_form_fbm(h, t_horizon);
    }
    if let Some(rest) = id.strip_prefix("kernel:") {
        return Ok(CovarianceFunction::kernel_derived(
            kernel(rest, t_horizon)?,
            *quad,
        ));
    }
    Err(Error::domain(format!(
        "unknown covariance id '{id}'; available: {COVARIANCES}"
    )))
}
