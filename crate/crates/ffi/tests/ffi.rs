//! Exercises the C ABI from Rust, plus one end-to-end check that the
//! generated header compiles, links and runs as an actual C program.
//!
//! The Rust-side tests focus on marshaling: handle lifecycles, out-pointer
//! discipline, status mapping, thread-local error text, and callback/context
//! plumbing. Numerical depth lives in the core crate's own suites; here the
//! reference values are chosen so that the expected numbers are exact or
//! nearly so (Brownian kernels make the operator side collapse to the
//! boundary term).

use std::ffi::{c_void, CStr};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use approx::{assert_abs_diff_eq, assert_relative_eq};
use volterra_young::kernels::VolterraKernel;
use volterra_young::operators::SingularQuad;
use volterra_young::quadrature::QuadratureScheme;
use volterra_young_ffi::*;

extern "C" fn const_one(_x: f64, _ctx: *mut c_void) -> f64 {
    1.0
}

extern "C" fn ramp(x: f64, _ctx: *mut c_void) -> f64 {
    x
}

extern "C" fn scaled_ramp(x: f64, ctx: *mut c_void) -> f64 {
    x * unsafe { *(ctx as *const f64) }
}

extern "C" fn planar_sum(s: f64, t: f64, _ctx: *mut c_void) -> f64 {
    s + t
}

extern "C" fn planar_product(s: f64, t: f64, _ctx: *mut c_void) -> f64 {
    s * t
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(vy_last_error_message()) }
        .to_str()
        .expect("error message is valid UTF-8")
        .to_string()
}

fn make_kernel(
    ctor: extern "C" fn(f64, f64, *mut *mut VyKernel) -> VyStatus,
    h: f64,
    t_horizon: f64,
) -> *mut VyKernel {
    let mut k: *mut VyKernel = ptr::null_mut();
    assert_eq!(ctor(h, t_horizon, &mut k), VyStatus::Ok);
    assert!(!k.is_null());
    k
}

#[test]
fn fbm_kernel_matches_core_evaluations() {
    let k = make_kernel(vy_kernel_fbm, 0.75, 1.0);
    let core = VolterraKernel::fbm(0.75, 1.0).unwrap();

    let mut v = f64::NAN;
    assert_eq!(vy_kernel_eval(k, 0.9, 0.4, &mut v), VyStatus::Ok);
    assert_eq!(v, core.eval(0.9, 0.4).unwrap());

    assert_eq!(vy_kernel_eval_dt(k, 0.9, 0.4, &mut v), VyStatus::Ok);
    assert_eq!(v, core.eval_dt(0.9, 0.4).unwrap());

    assert_eq!(vy_kernel_alpha(k, &mut v), VyStatus::Ok);
    assert_eq!(v, core.alpha());

    assert_eq!(vy_kernel_t_horizon(k, &mut v), VyStatus::Ok);
    assert_eq!(v, 1.0);

    vy_kernel_free(k);
}

#[test]
fn invalid_hurst_maps_to_domain_status() {
    let mut k: *mut VyKernel = ptr::null_mut();
    assert_eq!(vy_kernel_fbm(1.5, 1.0, &mut k), VyStatus::Domain);
    assert!(k.is_null(), "out pointer must stay untouched on failure");
    let msg = last_error();
    assert!(msg.contains("Hurst"), "unexpected message: {msg}");

    assert_eq!(
        vy_kernel_riemann_liouville(0.5, -1.0, &mut k),
        VyStatus::Domain
    );
    assert!(k.is_null());
}

#[test]
fn null_arguments_are_rejected_with_status_and_message() {
    let mut v = 0.0;
    assert_eq!(
        vy_kernel_eval(ptr::null(), 0.9, 0.4, &mut v),
        VyStatus::NullArgument
    );
    assert!(last_error().contains("kernel"), "{}", last_error());

    assert_eq!(vy_kernel_fbm(0.5, 1.0, ptr::null_mut()), VyStatus::NullArgument);

    let k = make_kernel(vy_kernel_riemann_liouville, 0.5, 1.0);
    assert_eq!(vy_kernel_eval(k, 0.9, 0.4, ptr::null_mut()), VyStatus::NullArgument);

    let mut est = 0.0;
    assert_eq!(
        vy_kstar_apply(
            k,
            None,
            ptr::null_mut(),
            0.5,
            vy_operator_quad_default(),
            &mut v,
            &mut est,
        ),
        VyStatus::NullArgument
    );
    assert!(last_error().contains("phi"), "{}", last_error());

    assert_eq!(vy_pvar_1d(ptr::null(), 4, 1.0, &mut v), VyStatus::NullArgument);

    vy_kernel_free(k);
}

#[test]
fn free_functions_accept_null() {
    vy_kernel_free(ptr::null_mut());
    vy_covariance_free(ptr::null_mut());
}

#[test]
fn closed_form_brownian_covariance_is_min() {
    let mut cov: *mut VyCovariance = ptr::null_mut();
    assert_eq!(vy_covariance_fbm_closed(0.5, 1.0, &mut cov), VyStatus::Ok);

    let mut v = 0.0;
    assert_eq!(vy_covariance_eval(cov, 0.25, 0.75, &mut v), VyStatus::Ok);
    assert_abs_diff_eq!(v, 0.25, epsilon = 1e-15);

    // Out-of-range arguments surface as a domain failure.
    assert_eq!(vy_covariance_eval(cov, 0.25, 1.75, &mut v), VyStatus::Domain);

    vy_covariance_free(cov);
}

#[test]
fn derived_covariance_matches_closed_form() {
    let k = make_kernel(vy_kernel_fbm, 0.75, 1.0);
    let mut derived: *mut VyCovariance = ptr::null_mut();
    assert_eq!(
        vy_covariance_from_kernel(k, vy_covariance_quad_default(), &mut derived),
        VyStatus::Ok
    );
    let mut closed: *mut VyCovariance = ptr::null_mut();
    assert_eq!(vy_covariance_fbm_closed(0.75, 1.0, &mut closed), VyStatus::Ok);

    let (mut a, mut b) = (0.0, 0.0);
    assert_eq!(vy_covariance_eval(derived, 0.3, 0.7, &mut a), VyStatus::Ok);
    assert_eq!(vy_covariance_eval(closed, 0.3, 0.7, &mut b), VyStatus::Ok);
    assert_relative_eq!(a, b, max_relative = 1e-4);

    vy_covariance_free(derived);
    vy_covariance_free(closed);
    vy_kernel_free(k);
}

#[test]
fn kstar_of_constant_field_is_the_boundary_term() {
    // The Brownian kernel is constant in time, so the correction integral
    // vanishes identically and K*1(s) = K(T, s) = 1 with a zero estimate.
    let k = make_kernel(vy_kernel_riemann_liouville, 0.5, 1.0);
    let (mut v, mut est) = (f64::NAN, f64::NAN);
    assert_eq!(
        vy_kstar_apply(
            k,
            Some(const_one),
            ptr::null_mut(),
            0.3,
            vy_operator_quad_default(),
            &mut v,
            &mut est,
        ),
        VyStatus::Ok
    );
    assert_eq!(v, 1.0);
    assert!(est.abs() < 1e-15, "estimate {est} should vanish");

    // The estimate out-pointer is optional.
    assert_eq!(
        vy_kstar_apply(
            k,
            Some(const_one),
            ptr::null_mut(),
            0.3,
            vy_operator_quad_default(),
            &mut v,
            ptr::null_mut(),
        ),
        VyStatus::Ok
    );
    vy_kernel_free(k);
}

#[test]
fn context_pointer_reaches_the_callback() {
    let k = make_kernel(vy_kernel_riemann_liouville, 0.5, 1.0);
    let scale = 2.5f64;
    let ctx = &scale as *const f64 as *mut c_void;
    let mut v = f64::NAN;
    assert_eq!(
        vy_kstar_apply(
            k,
            Some(scaled_ramp),
            ctx,
            0.3,
            vy_operator_quad_default(),
            &mut v,
            ptr::null_mut(),
        ),
        VyStatus::Ok
    );
    // K* acts as the identity on Brownian kernels, so the value is φ(0.3).
    assert_eq!(v, 2.5 * 0.3);
    vy_kernel_free(k);
}

#[test]
fn tensor_of_planar_field_reduces_to_boundary_product() {
    let k = make_kernel(vy_kernel_riemann_liouville, 0.5, 1.0);
    let (mut v, mut est) = (f64::NAN, f64::NAN);
    assert_eq!(
        vy_kstar_tensor(
            k,
            Some(planar_sum),
            ptr::null_mut(),
            0.3,
            0.6,
            vy_operator_quad_default(),
            &mut v,
            &mut est,
        ),
        VyStatus::Ok
    );
    assert_relative_eq!(v, 0.3 + 0.6, max_relative = 1e-14);
    assert!(est.abs() < 1e-15, "estimate {est} should vanish");
    vy_kernel_free(k);
}

#[test]
fn brownian_product_identity_closes_over_the_ffi() {
    // ∬ s·t dR with R = min is ∫ r² dr = 1/3, and so is the operator side;
    // the Riemann sums are quadratic in the mesh width, so the three-row
    // extrapolation recovers the limit almost exactly.
    let k = make_kernel(vy_kernel_riemann_liouville, 0.5, 1.0);
    let mut cov: *mut VyCovariance = ptr::null_mut();
    assert_eq!(vy_covariance_fbm_closed(0.5, 1.0, &mut cov), VyStatus::Ok);

    let cells: [u32; 3] = [8, 16, 32];
    let mut res = VyIdentityResult {
        lhs: f64::NAN,
        rhs: f64::NAN,
        abs_residual: f64::NAN,
        rel_residual: f64::NAN,
        truncated: true,
    };
    assert_eq!(
        vy_product_identity(
            k,
            Some(ramp),
            ptr::null_mut(),
            Some(ramp),
            ptr::null_mut(),
            cov,
            vy_operator_quad_default(),
            cells.as_ptr(),
            cells.len(),
            1e-6,
            &mut res,
        ),
        VyStatus::Ok
    );
    assert!(!res.truncated);
    assert_abs_diff_eq!(res.lhs, 1.0 / 3.0, epsilon = 1e-9);
    assert_abs_diff_eq!(res.rhs, 1.0 / 3.0, epsilon = 1e-9);
    assert!(res.rel_residual < 1e-9, "rel residual {}", res.rel_residual);

    vy_covariance_free(cov);
    vy_kernel_free(k);
}

#[test]
fn brownian_diagonal_identity_closes_over_the_ffi() {
    let k = make_kernel(vy_kernel_riemann_liouville, 0.5, 1.0);
    let cells: [u32; 3] = [4, 8, 16];
    let mut res = VyIdentityResult {
        lhs: f64::NAN,
        rhs: f64::NAN,
        abs_residual: f64::NAN,
        rel_residual: f64::NAN,
        truncated: true,
    };
    assert_eq!(
        vy_diagonal_identity(
            k,
            Some(planar_product),
            ptr::null_mut(),
            vy_operator_quad_default(),
            vy_covariance_quad_default(),
            cells.as_ptr(),
            cells.len(),
            1e-6,
            &mut res,
        ),
        VyStatus::Ok
    );
    assert!(!res.truncated);
    assert_abs_diff_eq!(res.lhs, 1.0 / 3.0, epsilon = 1e-9);
    assert_abs_diff_eq!(res.rhs, 1.0 / 3.0, epsilon = 1e-9);
    assert!(res.rel_residual < 1e-9, "rel residual {}", res.rel_residual);

    // A schedule with fewer than three rows is rejected outright.
    let short: [u32; 2] = [8, 16];
    assert_eq!(
        vy_diagonal_identity(
            k,
            Some(planar_product),
            ptr::null_mut(),
            vy_operator_quad_default(),
            vy_covariance_quad_default(),
            short.as_ptr(),
            short.len(),
            1e-6,
            &mut res,
        ),
        VyStatus::Domain
    );
    assert!(last_error().contains("schedule"), "{}", last_error());

    vy_kernel_free(k);
}

#[test]
fn pvar_of_a_monotone_ramp_is_its_total_variation() {
    let samples = [0.0, 0.25, 0.5, 0.75, 1.0];
    let mut v = f64::NAN;
    assert_eq!(
        vy_pvar_1d(samples.as_ptr(), samples.len(), 1.0, &mut v),
        VyStatus::Ok
    );
    assert_abs_diff_eq!(v, 1.0, epsilon = 1e-15);

    assert_eq!(
        vy_pvar_1d(samples.as_ptr(), samples.len(), 0.5, &mut v),
        VyStatus::Domain
    );
}

#[test]
fn quad_defaults_mirror_the_library_defaults() {
    let q = vy_operator_quad_default();
    let d = SingularQuad::default();
    assert_eq!(q.panels as usize, d.panels);
    assert_eq!(q.points_per_panel as usize, d.points_per_panel);
    assert_eq!(q.grading_exponent, d.grading_exponent);
    assert_eq!(q.holder_lambda_hint, d.holder_lambda_hint);
    assert_eq!(q.abs_tol, d.abs_tol);

    let c = vy_covariance_quad_default();
    let d = QuadratureScheme::default();
    assert_eq!(c.panels as usize, d.panels);
    assert_eq!(c.points_per_panel as usize, d.points_per_panel);
    assert_eq!(c.grading_exponent, d.grading_exponent);
    assert_eq!(c.abs_tol, d.abs_tol);
}

const SMOKE_C: &str = r#"
#include <stdio.h>
#include "volterra_young.h"

static double ramp(double x, void *ctx) {
    (void)ctx;
    return x;
}

int main(void) {
    VyKernel *k = NULL;
    if (vy_kernel_fbm(0.5, 1.0, &k) != VyStatus_Ok) return 1;

    double v = 0.0;
    if (vy_kernel_eval(k, 1.0, 0.5, &v) != VyStatus_Ok) return 2;
    if (v < 0.999999999 || v > 1.000000001) return 3;

    VyOperatorQuad quad = vy_operator_quad_default();
    double value = 0.0, estimate = 0.0;
    if (vy_kstar_apply(k, ramp, NULL, 0.25, quad, &value, &estimate) != VyStatus_Ok) return 4;
    if (value < 0.249999999 || value > 0.250000001) return 5;

    if (vy_kernel_eval(NULL, 1.0, 0.5, &v) != VyStatus_NullArgument) return 6;
    if (vy_last_error_message()[0] == '\0') return 7;

    vy_kernel_free(k);
    vy_kernel_free(NULL);
    return 0;
}
"#;

/// Compiles and runs a small C program against the generated header and the
/// cdylib, proving the header matches the ABI the library actually exports.
#[test]
fn c_smoke_test_compiles_links_and_runs() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let include_dir = manifest.join("include");
    // target/debug: two levels above the test executable in target/debug/deps.
    let exe = std::env::current_exe().unwrap();
    let lib_dir = exe
        .parent()
        .and_then(|p| p.parent())
        .expect("test binary lives in target/<profile>/deps")
        .to_path_buf();
    assert!(
        lib_dir.join("libvolterra_young_ffi.so").exists(),
        "cdylib not found in {}",
        lib_dir.display()
    );

    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    let bin = dir.path().join("smoke");
    std::fs::write(&src, SMOKE_C).unwrap();

    let compile = Command::new("gcc")
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Wextra")
        .arg("-Werror")
        .arg("-I")
        .arg(&include_dir)
        .arg(&src)
        .arg("-o")
        .arg(&bin)
        .arg("-L")
        .arg(&lib_dir)
        .arg("-lvolterra_young_ffi")
        .arg(format!("-Wl,-rpath,{}", lib_dir.display()))
        .output()
        .expect("gcc is available");
    assert!(
        compile.status.success(),
        "compilation failed:\n{}",
        String::from_utf8_lossy(&compile.stderr)
    );

    let run = Command::new(&bin).output().unwrap();
    assert!(
        run.status.success(),
        "smoke test exited with {:?}:\n{}",
        run.status.code(),
        String::from_utf8_lossy(&run.stderr)
    );
}
