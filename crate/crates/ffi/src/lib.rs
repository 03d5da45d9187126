//! C ABI over `regfilt`.
//!
//! Every fallible function returns a [`RegfiltStatus`]; on failure the message
//! is available from [`regfilt_last_error_message`] on the same thread.
//! Handles are opaque and must be released with their `_free` function.
//! Lengths are in meters.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use regfilt::geometry::{Correspondence, Point3};
use regfilt::io::load_correspondences;
use regfilt::kalman::RegistrationResult;
use regfilt::method::{register, Method, MethodConfig};
use regfilt::sensor::{covariance_of_point, extract_z_levels, point_sigmas, sigma_z, CameraIntrinsics, PointSigma};
use regfilt::RegError;

/// Status codes. `0` to `4` match the exit codes of the `regfilt` CLI.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegfiltStatus {
    Ok = 0,
    Io = 1,
    InvalidArgument = 2,
    NumericalFailure = 3,
    RobustnessInfeasible = 4,
    NullPointer = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegfiltMethod {
    Horn = 0,
    Kf = 1,
    Rf = 2,
}

fn method_from_code(code: u32) -> Result<Method, RegError> {
    match code {
        c if c == RegfiltMethod::Horn as u32 => Ok(Method::Horn),
        c if c == RegfiltMethod::Kf as u32 => Ok(Method::Kf),
        c if c == RegfiltMethod::Rf as u32 => Ok(Method::Rf),
        other => Err(RegError::InvalidArgument(format!("unknown method code {other}"))),
    }
}

/// Filter settings; obtain defaults from [`regfilt_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegfiltOptions {
    pub process_sigma: f64,
    /// Used for pairs without their own sigma.
    pub measurement_sigma: [f64; 3],
    pub prior_covariance_scale: f64,
    pub sweeps: usize,
    pub theta: f64,
    pub theta_backoff: f64,
    pub max_backoffs: usize,
    /// Entry of the process-model uncertainty, applied to all nine states.
    pub sigma_a: f64,
}

impl RegfiltOptions {
    fn to_config(self) -> MethodConfig {
        let mut cfg = MethodConfig::default();
        let kf = &mut cfg.rf.kf;
        kf.process_sigma = self.process_sigma;
        kf.measurement_sigma = self.measurement_sigma.into();
        kf.prior_covariance_scale = self.prior_covariance_scale;
        kf.sweeps = self.sweeps;
        cfg.rf.theta = self.theta;
        cfg.rf.theta_backoff = self.theta_backoff;
        cfg.rf.max_backoffs = self.max_backoffs;
        cfg.uncertainty.sigma_a = [self.sigma_a; 9];
        cfg
    }
}

/// Opaque list of correspondences.
pub struct RegfiltCorrespondences {
    inner: Vec<Correspondence>,
}

/// Opaque registration outcome.
pub struct RegfiltResult {
    inner: RegistrationResult,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &RegError) -> RegfiltStatus {
    match e.exit_code() {
        1 => RegfiltStatus::Io,
        3 => RegfiltStatus::NumericalFailure,
        4 => RegfiltStatus::RobustnessInfeasible,
        _ => RegfiltStatus::InvalidArgument,
    }
}

enum Failure {
    Reg(RegError),
    Null(&'static str),
}

impl From<RegError> for Failure {
    fn from(e: RegError) -> Self {
        Failure::Reg(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> RegfiltStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RegfiltStatus::Ok,
        Ok(Err(Failure::Reg(e))) => {
            set_last_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Failure::Null(what))) => {
            set_last_error(format!("null pointer: {what}"));
            RegfiltStatus::NullPointer
        }
        Err(_) => {
            set_last_error("internal panic".into());
            RegfiltStatus::Panic
        }
    }
}

unsafe fn read3(p: *const f64, what: &'static str) -> Result<[f64; 3], Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(*(p as *const [f64; 3]))
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Null(what))
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn regfilt_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn regfilt_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

#[no_mangle]
pub extern "C" fn regfilt_options_default() -> RegfiltOptions {
    let cfg = MethodConfig::default();
    let kf = &cfg.rf.kf;
    RegfiltOptions {
        process_sigma: kf.process_sigma,
        measurement_sigma: kf.measurement_sigma.into(),
        prior_covariance_scale: kf.prior_covariance_scale,
        sweeps: kf.sweeps,
        theta: cfg.rf.theta,
        theta_backoff: cfg.rf.theta_backoff,
        max_backoffs: cfg.rf.max_backoffs,
        sigma_a: cfg.uncertainty.sigma_a[0],
    }
}

#[no_mangle]
pub extern "C" fn regfilt_correspondences_new() -> *mut RegfiltCorrespondences {
    Box::into_raw(Box::new(RegfiltCorrespondences { inner: Vec::new() }))
}

/// # Safety
/// `set` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn regfilt_correspondences_free(set: *mut RegfiltCorrespondences) {
    if !set.is_null() {
        drop(Box::from_raw(set));
    }
}

/// Appends one pair. `sigma` may be null.
///
/// # Safety
/// `source`, `target` and a non-null `sigma` must point to 3 doubles.
#[no_mangle]
pub unsafe extern "C" fn regfilt_correspondences_push(
    set: *mut RegfiltCorrespondences,
    source: *const f64,
    target: *const f64,
    sigma: *const f64,
) -> RegfiltStatus {
    guard(|| {
        let set = out_ref(set, "set")?;
        let s = Point3::from(read3(source, "source")?);
        let t = Point3::from(read3(target, "target")?);
        if !(s.iter().chain(t.iter()).all(|v| v.is_finite())) {
            return Err(RegError::InvalidArgument("coordinates must be finite".into()).into());
        }
        let c = if sigma.is_null() {
            Correspondence::new(s, t)
        } else {
            Correspondence::with_sigma(s, t, read3(sigma, "sigma")?.into())?
        };
        set.inner.push(c);
        Ok(())
    })
}

/// Number of pairs; 0 for a null handle.
///
/// # Safety
/// `set` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn regfilt_correspondences_len(set: *const RegfiltCorrespondences) -> usize {
    set.as_ref().map_or(0, |s| s.inner.len())
}

/// Loads a correspondence CSV (millimeters) into a new handle.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn regfilt_correspondences_load_csv(
    path: *const c_char,
    out: *mut *mut RegfiltCorrespondences,
) -> RegfiltStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        if path.is_null() {
            return Err(Failure::Null("path"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| RegError::InvalidArgument("path is not valid UTF-8".into()))?;
        let inner = load_correspondences(path)?;
        *out = Box::into_raw(Box::new(RegfiltCorrespondences { inner }));
        Ok(())
    })
}

/// Registers `set` with `method`, one of the [`RegfiltMethod`] values.
/// `options` may be null for defaults. On success `*out` receives a result
/// handle.
///
/// # Safety
/// `set` must be a live handle, `options` null or valid, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn regfilt_register(
    set: *const RegfiltCorrespondences,
    method: u32,
    options: *const RegfiltOptions,
    out: *mut *mut RegfiltResult,
) -> RegfiltStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let set = set.as_ref().ok_or(Failure::Null("set"))?;
        let opts = options.as_ref().copied().unwrap_or_else(|| regfilt_options_default());
        let inner = register(method_from_code(method)?, &set.inner, &opts.to_config())?;
        *out = Box::into_raw(Box::new(RegfiltResult { inner }));
        Ok(())
    })
}

/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn regfilt_result_free(result: *mut RegfiltResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// Row-major rotation into `out[9]`.
///
/// # Safety
/// `result` must be a live handle and `out` must hold 9 doubles.
#[no_mangle]
pub unsafe extern "C" fn regfilt_result_rotation(result: *const RegfiltResult, out: *mut f64) -> RegfiltStatus {
    guard(|| {
        let r = result.as_ref().ok_or(Failure::Null("result"))?;
        let out = out_ref(out as *mut [f64; 9], "out")?;
        *out = r.inner.transform.rotation.to_row_major();
        Ok(())
    })
}

/// Translation (meters) into `out[3]`.
///
/// # Safety
/// `result` must be a live handle and `out` must hold 3 doubles.
#[no_mangle]
pub unsafe extern "C" fn regfilt_result_translation(result: *const RegfiltResult, out: *mut f64) -> RegfiltStatus {
    guard(|| {
        let r = result.as_ref().ok_or(Failure::Null("result"))?;
        let out = out_ref(out as *mut [f64; 3], "out")?;
        *out = r.inner.transform.translation.into();
        Ok(())
    })
}

/// RMSE in meters; NaN for a null handle.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn regfilt_result_rmse(result: *const RegfiltResult) -> f64 {
    result.as_ref().map_or(f64::NAN, |r| r.inner.rmse)
}

/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn regfilt_result_scale(result: *const RegfiltResult) -> f64 {
    result.as_ref().map_or(f64::NAN, |r| r.inner.transform.scale)
}

/// Filter steps taken (0 for the closed form or a null handle).
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn regfilt_result_steps(result: *const RegfiltResult) -> usize {
    result.as_ref().map_or(0, |r| r.inner.steps)
}

/// Depth standard deviation of level `k` among the levels extracted from
/// `depths[0..n]`, using level offset `i`.
///
/// # Safety
/// `depths` must point to `n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn regfilt_sigma_z(
    depths: *const f64,
    n: usize,
    k: usize,
    i: usize,
    merge_epsilon: f64,
    out: *mut f64,
) -> RegfiltStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        if depths.is_null() && n > 0 {
            return Err(Failure::Null("depths"));
        }
        let slice = if n == 0 {
            &[][..]
        } else {
            std::slice::from_raw_parts(depths, n)
        };
        let levels = extract_z_levels(slice, merge_epsilon)?;
        *out = sigma_z(&levels, k, i)?;
        Ok(())
    })
}

/// Per-axis sigmas `(sx, sy, sz)` of pixel `(u, v)` with depth sigma `sz`.
///
/// # Safety
/// `out` must hold 3 doubles.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn regfilt_point_sigmas(
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    u: f64,
    v: f64,
    sz: f64,
    out: *mut f64,
) -> RegfiltStatus {
    guard(|| {
        let out = out_ref(out as *mut [f64; 3], "out")?;
        let intr = CameraIntrinsics::new(fx, fy, cx, cy)?;
        *out = point_sigmas(u, v, sz, &intr)?.to_vector().into();
        Ok(())
    })
}

/// Rank-one covariance `s·sᵀ` of `sigma[3]`, row-major into `out[9]`.
///
/// # Safety
/// `sigma` must hold 3 doubles and `out` 9.
#[no_mangle]
pub unsafe extern "C" fn regfilt_point_covariance(sigma: *const f64, out: *mut f64) -> RegfiltStatus {
    guard(|| {
        let s = read3(sigma, "sigma")?;
        let out = out_ref(out as *mut [f64; 9], "out")?;
        let c = covariance_of_point(&PointSigma::new(s[0], s[1], s[2])?);
        *out = std::array::from_fn(|i| c[(i / 3, i % 3)]);
        Ok(())
    })
}
