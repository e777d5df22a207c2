//! C ABI for the `volterra-young` library.
//!
//! Conventions, mirrored in the generated header:
//!
//! * Every function returns a [`VyStatus`]; out-parameters are written only
//!   when the status is `Ok`.
//! * Constructors hand out opaque handles owned by the caller, released with
//!   the matching `*_free` function (`NULL` is a safe no-op there).
//! * [`vy_last_error_message`] returns a thread-local, NUL-terminated
//!   description of the most recent failure on the calling thread; the
//!   pointer stays valid until the next failing call on the same thread.
//! * Field callbacks receive the caller's context pointer untouched. They
//!   may be invoked from several threads concurrently, so they must be pure
//!   functions of their arguments and context.
//! * Panics never unwind across the boundary; they surface as
//!   `VyStatus_Panic` with the panic text in the error message.

use std::cell::RefCell;
use std::ffi::{c_char, c_void, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use volterra_young::covariance::CovarianceFunction;
use volterra_young::integrator::{diagonal_identity, dyadic_partitions, product_identity};
use volterra_young::kernels::VolterraKernel;
use volterra_young::operators::{
    kstar_apply_with_estimate, kstar_tensor_with_estimate, SingularQuad,
};
use volterra_young::quadrature::QuadratureScheme;
use volterra_young::regularity::pvar_1d;
use volterra_young::Error;

/// Status code of every FFI call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VyStatus {
    /// Success; out-parameters are valid.
    Ok = 0,
    /// An argument lies outside the mathematical domain of the operation.
    Domain = 1,
    /// A hypergeometric series failed to converge.
    SeriesDivergence = 2,
    /// A quadrature error estimate exceeded its tolerance.
    Accuracy = 3,
    /// A finite-difference step underflowed (user-supplied kernels only).
    StepUnderflow = 4,
    /// Invalid experiment or scheme configuration.
    Config = 5,
    /// A required pointer argument was NULL.
    NullArgument = 6,
    /// The library panicked internally; see `vy_last_error_message`.
    Panic = 7,
}

/// Opaque Volterra kernel handle.
pub struct VyKernel(VolterraKernel);

/// Opaque covariance-function handle.
pub struct VyCovariance(CovarianceFunction);

/// Scalar field `φ(t)` supplied by the caller; the second argument is the
/// context pointer passed alongside the callback.
pub type VyField1D = Option<extern "C" fn(f64, *mut c_void) -> f64>;

/// Planar field `ψ(s, t)` supplied by the caller; the third argument is the
/// context pointer passed alongside the callback.
pub type VyField2D = Option<extern "C" fn(f64, f64, *mut c_void) -> f64>;

/// Parameters of the weakly singular operator quadratures (`K*`, tensor).
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct VyOperatorQuad {
    /// Number of panels of the graded mesh (at least 4).
    pub panels: u32,
    /// Gauss–Legendre points per panel.
    pub points_per_panel: u32,
    /// Requested grading exponent.
    pub grading_exponent: f64,
    /// Expected Hölder regularity of the integrand's difference factor.
    pub holder_lambda_hint: f64,
    /// Absolute error tolerance.
    pub abs_tol: f64,
}

/// Parameters of the kernel-derived covariance quadrature.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct VyCovarianceQuad {
    /// Number of panels of the graded mesh.
    pub panels: u32,
    /// Gauss–Legendre points per panel.
    pub points_per_panel: u32,
    /// Requested grading exponent (raised to match the kernel singularity).
    pub grading_exponent: f64,
    /// Absolute error tolerance per unit interval.
    pub abs_tol: f64,
}

/// Result of a covariance identity experiment.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct VyIdentityResult {
    /// Riemann-sum side (extrapolated limit of the refinement sequence).
    pub lhs: f64,
    /// Operator side (graded quadrature value).
    pub rhs: f64,
    /// `|lhs − rhs|`.
    pub abs_residual: f64,
    /// Residual relative to `max(|lhs|, |rhs|, 1e-12)`.
    pub rel_residual: f64,
    /// True when schedule entries were dropped by a size cap.
    pub truncated: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn fail(status: VyStatus, message: &str) -> VyStatus {
    let sanitized: String = message.chars().map(|c| if c == '\0' { ' ' } else { c }).collect();
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
    status
}

fn fail_error(e: &Error) -> VyStatus {
    let status = match e {
        Error::Domain(_) => VyStatus::Domain,
        Error::SeriesDivergence { .. } => VyStatus::SeriesDivergence,
        Error::Accuracy { .. } => VyStatus::Accuracy,
        Error::StepUnderflow { .. } => VyStatus::StepUnderflow,
        Error::Config(_) => VyStatus::Config,
    };
    fail(status, &e.to_string())
}

fn null_arg(name: &str) -> VyStatus {
    fail(VyStatus::NullArgument, &format!("{name} must not be NULL"))
}

/// Runs a body under a panic guard, translating panics into `Panic` status.
fn guarded(body: impl FnOnce() -> VyStatus) -> VyStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic of unknown type".to_string());
            fail(VyStatus::Panic, &format!("internal panic: {msg}"))
        }
    }
}

/// Thread-safe view of a C field callback: the library may evaluate fields
/// from a thread pool, so the caller's callback and context must tolerate
/// concurrent invocation (the header documents this contract).
#[derive(Clone, Copy)]
struct Callback1D {
    f: extern "C" fn(f64, *mut c_void) -> f64,
    ctx: *mut c_void,
}
unsafe impl Send for Callback1D {}
unsafe impl Sync for Callback1D {}

impl Callback1D {
    fn eval(&self, x: f64) -> f64 {
        (self.f)(x, self.ctx)
    }
}

#[derive(Clone, Copy)]
struct Callback2D {
    f: extern "C" fn(f64, f64, *mut c_void) -> f64,
    ctx: *mut c_void,
}
unsafe impl Send for Callback2D {}
unsafe impl Sync for Callback2D {}

impl Callback2D {
    fn eval(&self, x: f64, y: f64) -> f64 {
        (self.f)(x, y, self.ctx)
    }
}

impl From<VyOperatorQuad> for SingularQuad {
    fn from(q: VyOperatorQuad) -> Self {
        SingularQuad {
            panels: q.panels as usize,
            points_per_panel: q.points_per_panel as usize,
            grading_exponent: q.grading_exponent,
            holder_lambda_hint: q.holder_lambda_hint,
            abs_tol: q.abs_tol,
        }
    }
}

impl From<VyCovarianceQuad> for QuadratureScheme {
    fn from(q: VyCovarianceQuad) -> Self {
        QuadratureScheme {
            panels: q.panels as usize,
            points_per_panel: q.points_per_panel as usize,
            grading_exponent: q.grading_exponent,
            abs_tol: q.abs_tol,
        }
    }
}

/// Message describing the most recent failure on the calling thread.
///
/// Empty (not NULL) before any failure. The pointer stays valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn vy_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Default operator-quadrature parameters.
#[no_mangle]
pub extern "C" fn vy_operator_quad_default() -> VyOperatorQuad {
    let q = SingularQuad::default();
    VyOperatorQuad {
        panels: q.panels as u32,
        points_per_panel: q.points_per_panel as u32,
        grading_exponent: q.grading_exponent,
        holder_lambda_hint: q.holder_lambda_hint,
        abs_tol: q.abs_tol,
    }
}

/// Default covariance-quadrature parameters.
#[no_mangle]
pub extern "C" fn vy_covariance_quad_default() -> VyCovarianceQuad {
    let q = QuadratureScheme::default();
    VyCovarianceQuad {
        panels: q.panels as u32,
        points_per_panel: q.points_per_panel as u32,
        grading_exponent: q.grading_exponent,
        abs_tol: q.abs_tol,
    }
}

fn kernel_new(
    out: *mut *mut VyKernel,
    build: impl FnOnce() -> volterra_young::Result<VolterraKernel>,
) -> VyStatus {
    if out.is_null() {
        return null_arg("out");
    }
    match build() {
        Ok(k) => {
            unsafe { *out = Box::into_raw(Box::new(VyKernel(k))) };
            VyStatus::Ok
        }
        Err(e) => fail_error(&e),
    }
}

/// Creates a fractional Brownian Volterra kernel on `[0, t_horizon]`.
#[no_mangle]
pub extern "C" fn vy_kernel_fbm(h: f64, t_horizon: f64, out: *mut *mut VyKernel) -> VyStatus {
    guarded(|| kernel_new(out, || VolterraKernel::fbm(h, t_horizon)))
}

/// Creates a Riemann–Liouville kernel on `[0, t_horizon]`.
#[no_mangle]
pub extern "C" fn vy_kernel_riemann_liouville(
    h: f64,
    t_horizon: f64,
    out: *mut *mut VyKernel,
) -> VyStatus {
    guarded(|| kernel_new(out, || VolterraKernel::riemann_liouville(h, t_horizon)))
}

/// Releases a kernel handle; NULL is a no-op.
#[no_mangle]
pub extern "C" fn vy_kernel_free(kernel: *mut VyKernel) {
    if !kernel.is_null() {
        drop(unsafe { Box::from_raw(kernel) });
    }
}

/// `K(t, s)`; zero whenever `s >= t`.
#[no_mangle]
pub extern "C" fn vy_kernel_eval(
    kernel: *const VyKernel,
    t: f64,
    s: f64,
    out: *mut f64,
) -> VyStatus {
    guarded(|| {
        if kernel.is_null() {
            return null_arg("kernel");
        }
        if out.is_null() {
            return null_arg("out");
        }
        match unsafe { &*kernel }.0.eval(t, s) {
            Ok(v) => {
                unsafe { *out = v };
                VyStatus::Ok
            }
            Err(e) => fail_error(&e),
        }
    })
}

/// `∂K/∂t (t, s)`; zero whenever `s >= t`.
#[no_mangle]
pub extern "C" fn vy_kernel_eval_dt(
    kernel: *const VyKernel,
    t: f64,
    s: f64,
    out: *mut f64,
) -> VyStatus {
    guarded(|| {
        if kernel.is_null() {
            return null_arg("kernel");
        }
        if out.is_null() {
            return null_arg("out");
        }
        match unsafe { &*kernel }.0.eval_dt(t, s) {
            Ok(v) => {
                unsafe { *out = v };
                VyStatus::Ok
            }
            Err(e) => fail_error(&e),
        }
    })
}

/// Singularity exponent `alpha` of the kernel.
#[no_mangle]
pub extern "C" fn vy_kernel_alpha(kernel: *const VyKernel, out: *mut f64) -> VyStatus {
    if kernel.is_null() {
        return null_arg("kernel");
    }
    if out.is_null() {
        return null_arg("out");
    }
    unsafe { *out = (*kernel).0.alpha() };
    VyStatus::Ok
}

/// Time horizon `T` of the kernel.
#[no_mangle]
pub extern "C" fn vy_kernel_t_horizon(kernel: *const VyKernel, out: *mut f64) -> VyStatus {
    if kernel.is_null() {
        return null_arg("kernel");
    }
    if out.is_null() {
        return null_arg("out");
    }
    unsafe { *out = (*kernel).0.t_horizon() };
    VyStatus::Ok
}

/// Creates the closed-form fractional Brownian covariance
/// `½(s^{2H} + t^{2H} − |t−s|^{2H})` on `[0, t_horizon]²`.
#[no_mangle]
pub extern "C" fn vy_covariance_fbm_closed(
    h: f64,
    t_horizon: f64,
    out: *mut *mut VyCovariance,
) -> VyStatus {
    guarded(|| {
        if out.is_null() {
            return null_arg("out");
        }
        match CovarianceFunction::closed_form_fbm(h, t_horizon) {
            Ok(c) => {
                unsafe { *out = Box::into_raw(Box::new(VyCovariance(c))) };
                VyStatus::Ok
            }
            Err(e) => fail_error(&e),
        }
    })
}

/// Creates the kernel-derived covariance
/// `R(s,t) = ∫ K(t,r) K(s,r) dr` evaluated with the given quadrature.
#[no_mangle]
pub extern "C" fn vy_covariance_from_kernel(
    kernel: *const VyKernel,
    quad: VyCovarianceQuad,
    out: *mut *mut VyCovariance,
) -> VyStatus {
    guarded(|| {
        if kernel.is_null() {
            return null_arg("kernel");
        }
        if out.is_null() {
            return null_arg("out");
        }
        let cov =
            CovarianceFunction::kernel_derived(unsafe { &*kernel }.0.clone(), quad.into());
        unsafe { *out = Box::into_raw(Box::new(VyCovariance(cov))) };
        VyStatus::Ok
    })
}

/// Releases a covariance handle; NULL is a no-op.
#[no_mangle]
pub extern "C" fn vy_covariance_free(cov: *mut VyCovariance) {
    if !cov.is_null() {
        drop(unsafe { Box::from_raw(cov) });
    }
}

/// `R(s, t)`.
#[no_mangle]
pub extern "C" fn vy_covariance_eval(
    cov: *const VyCovariance,
    s: f64,
    t: f64,
    out: *mut f64,
) -> VyStatus {
    guarded(|| {
        if cov.is_null() {
            return null_arg("cov");
        }
        if out.is_null() {
            return null_arg("out");
        }
        match unsafe { &*cov }.0.eval(s, t) {
            Ok(v) => {
                unsafe { *out = v };
                VyStatus::Ok
            }
            Err(e) => fail_error(&e),
        }
    })
}

/// `K*φ(s) = φ(s)K(T,s) + ∫ (φ(r) − φ(s)) ∂K/∂r(r,s) dr` with its quadrature
/// error estimate. `estimate_out` may be NULL when the estimate is not
/// wanted.
#[no_mangle]
pub extern "C" fn vy_kstar_apply(
    kernel: *const VyKernel,
    phi: VyField1D,
    ctx: *mut c_void,
    s: f64,
    quad: VyOperatorQuad,
    value_out: *mut f64,
    estimate_out: *mut f64,
) -> VyStatus {
    guarded(|| {
        if kernel.is_null() {
            return null_arg("kernel");
        }
        let Some(f) = phi else {
            return null_arg("phi");
        };
        if value_out.is_null() {
            return null_arg("value_out");
        }
        let cb = Callback1D { f, ctx };
        match kstar_apply_with_estimate(
            &unsafe { &*kernel }.0,
            |x| cb.eval(x),
            s,
            &quad.into(),
        ) {
            Ok((v, e)) => {
                unsafe { *value_out = v };
                if !estimate_out.is_null() {
                    unsafe { *estimate_out = e };
                }
                VyStatus::Ok
            }
            Err(e) => fail_error(&e),
        }
    })
}

/// `K*⊗K* ψ(u, v)` with its combined error estimate. `estimate_out` may be
/// NULL when the estimate is not wanted.
#[no_mangle]
pub extern "C" fn vy_kstar_tensor(
    kernel: *const VyKernel,
    psi: VyField2D,
    ctx: *mut c_void,
    u: f64,
    v: f64,
    quad: VyOperatorQuad,
    value_out: *mut f64,
    estimate_out: *mut f64,
) -> VyStatus {
    guarded(|| {
        if kernel.is_null() {
            return null_arg("kernel");
        }
        let Some(f) = psi else {
            return null_arg("psi");
        };
        if value_out.is_null() {
            return null_arg("value_out");
        }
        let cb = Callback2D { f, ctx };
        match kstar_tensor_with_estimate(
            &unsafe { &*kernel }.0,
            |x, y| cb.eval(x, y),
            u,
            v,
            &quad.into(),
        ) {
            Ok((val, est)) => {
                unsafe { *value_out = val };
                if !estimate_out.is_null() {
                    unsafe { *estimate_out = est };
                }
                VyStatus::Ok
            }
            Err(e) => fail_error(&e),
        }
    })
}

fn write_identity(
    out: *mut VyIdentityResult,
    res: volterra_young::integrator::IdentityResidual,
) -> VyStatus {
    unsafe {
        *out = VyIdentityResult {
            lhs: res.lhs,
            rhs: res.rhs,
            abs_residual: res.abs_residual,
            rel_residual: res.rel_residual,
            truncated: res.truncated,
        };
    }
    VyStatus::Ok
}

fn build_schedule(
    t_horizon: f64,
    cells: *const u32,
    n_cells: usize,
) -> Result<Vec<volterra_young::regularity::Partition2D>, VyStatus> {
    if cells.is_null() {
        return Err(null_arg("cells"));
    }
    let slice = unsafe { std::slice::from_raw_parts(cells, n_cells) };
    let cells: Vec<usize> = slice.iter().map(|&c| c as usize).collect();
    dyadic_partitions(t_horizon, &cells).map_err(|e| fail_error(&e))
}

/// Diagonal covariance identity
/// `∬ ψ dR = ∫ (K*⊗K* ψ)(r, r) dr` for the kernel-derived covariance.
///
/// The Riemann-sum side refines along the dyadic schedule given by `cells`
/// (cells per axis, at least three strictly increasing entries); `tol`
/// governs its convergence flag.
#[no_mangle]
pub extern "C" fn vy_diagonal_identity(
    kernel: *const VyKernel,
    psi: VyField2D,
    ctx: *mut c_void,
    op_quad: VyOperatorQuad,
    cov_quad: VyCovarianceQuad,
    cells: *const u32,
    n_cells: usize,
    tol: f64,
    out: *mut VyIdentityResult,
) -> VyStatus {
    guarded(|| {
        if kernel.is_null() {
            return null_arg("kernel");
        }
        let Some(f) = psi else {
            return null_arg("psi");
        };
        if out.is_null() {
            return null_arg("out");
        }
        let k = &unsafe { &*kernel }.0;
        let schedule = match build_schedule(k.t_horizon(), cells, n_cells) {
            Ok(s) => s,
            Err(status) => return status,
        };
        let cb = Callback2D { f, ctx };
        match diagonal_identity(
            k,
            |x, y| cb.eval(x, y),
            &op_quad.into(),
            &cov_quad.into(),
            &schedule,
            tol,
        ) {
            Ok(res) => write_identity(out, res),
            Err(e) => fail_error(&e),
        }
    })
}

/// Product covariance identity
/// `∬ φ₁(s)φ₂(t) dR = ∫ K*φ₁(r) · K*φ₂(r) dr` against the supplied
/// covariance (closed-form or kernel-derived).
#[no_mangle]
pub extern "C" fn vy_product_identity(
    kernel: *const VyKernel,
    phi1: VyField1D,
    ctx1: *mut c_void,
    phi2: VyField1D,
    ctx2: *mut c_void,
    cov: *const VyCovariance,
    op_quad: VyOperatorQuad,
    cells: *const u32,
    n_cells: usize,
    tol: f64,
    out: *mut VyIdentityResult,
) -> VyStatus {
    guarded(|| {
        if kernel.is_null() {
            return null_arg("kernel");
        }
        if cov.is_null() {
            return null_arg("cov");
        }
        let Some(f1) = phi1 else {
            return null_arg("phi1");
        };
        let Some(f2) = phi2 else {
            return null_arg("phi2");
        };
        if out.is_null() {
            return null_arg("out");
        }
        let k = &unsafe { &*kernel }.0;
        let schedule = match build_schedule(k.t_horizon(), cells, n_cells) {
            Ok(s) => s,
            Err(status) => return status,
        };
        let cb1 = Callback1D { f: f1, ctx: ctx1 };
        let cb2 = Callback1D { f: f2, ctx: ctx2 };
        match product_identity(
            k,
            |x| cb1.eval(x),
            |x| cb2.eval(x),
            &op_quad.into(),
            &unsafe { &*cov }.0,
            &schedule,
            tol,
        ) {
            Ok(res) => write_identity(out, res),
            Err(e) => fail_error(&e),
        }
    })
}

/// p-variation of a sampled path (`p >= 1`), maximized over all subsets of
/// the sample points.
#[no_mangle]
pub extern "C" fn vy_pvar_1d(
    samples: *const f64,
    len: usize,
    p: f64,
    out: *mut f64,
) -> VyStatus {
    guarded(|| {
        if samples.is_null() {
            return null_arg("samples");
        }
        if out.is_null() {
            return null_arg("out");
        }
        let slice = unsafe { std::slice::from_raw_parts(samples, len) };
        match pvar_1d(slice, p) {
            Ok(v) => {
                unsafe { *out = v };
                VyStatus::Ok
            }
            Err(e) => fail_error(&e),
        }
    })
}
