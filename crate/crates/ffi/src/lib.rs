//! C ABI for difflab.
//!
//! Objects cross the boundary as opaque handles that the caller releases with
//! the matching `*_free` function. Every fallible call returns a [`DlStatus`];
//! on failure [`dl_last_error`] describes what went wrong on the calling
//! thread. Configurations and fields are passed as JSON strings using the
//! same schema as the command line tool.

use difflab::estimator::{estimate_f, EstimatorOutput};
use difflab::harness::config::{ExperimentConfig, TruthSpec};
use difflab::likelihood::{log_q, ProxyModel};
use difflab::model::{alpha_d, rate_sequences, s_star, RateParams};
use difflab::sim::{sample_path, ObservationSet};
use difflab::{DiffusivityField, Error};
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

/// Result codes. Values 2 and 3 agree with the command line exit codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NumericalFailure = 3,
    Io = 4,
    Panic = 5,
}

/// A diffusivity field `f`.
pub struct DlField {
    inner: Arc<DiffusivityField>,
}

/// A discretely observed path `X_0, X_D, ..., X_{ND}`.
pub struct DlObservations {
    inner: ObservationSet,
}

/// A fitted estimator.
pub struct DlEstimate {
    inner: EstimatorOutput,
    j0: u32,
    j: u32,
}

/// Smoothness thresholds and rate sequences.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DlRates {
    pub alpha_d: u32,
    pub s_star: f64,
    pub eps_n: f64,
    pub d_interval: f64,
    pub e_n: f64,
    pub v_n: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(DlStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e.exit_code() {
            3 => DlStatus::NumericalFailure,
            _ if matches!(e, Error::Io(_)) => DlStatus::Io,
            _ => DlStatus::InvalidArgument,
        };
        Failure(code, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(DlStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(DlStatus::InvalidArgument, msg.into())
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> DlStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => DlStatus::Ok,
        Ok(Err(Failure(code, msg))) => {
            set_error(msg);
            code
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            DlStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| invalid(format!("{what} is not UTF-8")))
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

fn parse_config(json: &str) -> Result<ExperimentConfig, Failure> {
    let cfg: ExperimentConfig = serde_json::from_str(json).map_err(|e| invalid(format!("config: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn dl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a field from a truth description such as
/// `{"type":"bumps","base":1.0,"bumps":[{"center":[0.5],"radius":0.2,"amplitude":0.5}]}`.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dl_field_from_json(json: *const c_char, out: *mut *mut DlField) -> DlStatus {
    guard(|| {
        let spec: TruthSpec = serde_json::from_str(str_arg(json, "json")?).map_err(|e| invalid(format!("field: {e}")))?;
        let b = Box::new(DlField { inner: Arc::new(spec.field()) });
        put(out, Box::into_raw(b), "out")
    })
}

/// # Safety
/// `field` must come from `dl_field_from_json` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn dl_field_free(field: *mut DlField) {
    if !field.is_null() {
        drop(Box::from_raw(field));
    }
}

/// Evaluates `f(x)` for a point of dimension `dim`.
///
/// # Safety
/// `x` must point to `dim` doubles and `out` to one double.
#[no_mangle]
pub unsafe extern "C" fn dl_field_value(field: *const DlField, x: *const f64, dim: usize, out: *mut f64) -> DlStatus {
    guard(|| {
        let f = handle(field, "field")?;
        let x = slice_arg(x, dim, "x")?;
        if dim == 0 {
            return Err(invalid("dimension must be positive"));
        }
        put(out, f.inner.value(x), "out")
    })
}

/// Wraps caller-owned points (`count` points of dimension `dim`, row major)
/// sampled at spacing `d_interval`.
///
/// # Safety
/// `points` must point to `count * dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn dl_observations_new(
    dim: usize,
    d_interval: f64,
    points: *const f64,
    count: usize,
    out: *mut *mut DlObservations,
) -> DlStatus {
    guard(|| {
        let len = count.checked_mul(dim).ok_or_else(|| invalid("size overflow"))?;
        let pts = slice_arg(points, len, "points")?.to_vec();
        if !(d_interval > 0.0) {
            return Err(invalid("sampling interval must be positive"));
        }
        let obs = ObservationSet::new(dim, d_interval, 0, pts)?;
        put(out, Box::into_raw(Box::new(DlObservations { inner: obs })), "out")
    })
}

/// Simulates `n` transitions of the reflected diffusion described by an
/// experiment configuration (JSON).
///
/// # Safety
/// `config_json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dl_simulate(config_json: *const c_char, n: usize, seed: u64, out: *mut *mut DlObservations) -> DlStatus {
    guard(|| {
        let cfg = parse_config(str_arg(config_json, "config_json")?)?;
        if n == 0 {
            return Err(invalid("n must be positive"));
        }
        let sde = cfg.sde(Arc::new(cfg.truth.field()), cfg.truth.sup(), n, seed)?;
        let obs = sample_path(&sde)?;
        put(out, Box::into_raw(Box::new(DlObservations { inner: obs })), "out")
    })
}

/// Number of transitions `N` (the path holds `N + 1` points).
///
/// # Safety
/// `obs` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn dl_observations_len(obs: *const DlObservations) -> usize {
    obs.as_ref().map_or(0, |o| o.inner.n())
}

/// # Safety
/// `obs` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn dl_observations_dim(obs: *const DlObservations) -> usize {
    obs.as_ref().map_or(0, |o| o.inner.dim)
}

/// Copies the `(N + 1) * dim` coordinates into `buf`, which holds `len` doubles.
///
/// # Safety
/// `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn dl_observations_copy(obs: *const DlObservations, buf: *mut f64, len: usize) -> DlStatus {
    guard(|| {
        let o = handle(obs, "obs")?;
        let pts = &o.inner.points;
        if len < pts.len() {
            return Err(invalid(format!("buffer holds {len} values, {} needed", pts.len())));
        }
        if buf.is_null() {
            return Err(null("buf"));
        }
        std::ptr::copy_nonoverlapping(pts.as_ptr(), buf, pts.len());
        Ok(())
    })
}

/// # Safety
/// `obs` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn dl_observations_free(obs: *mut DlObservations) {
    if !obs.is_null() {
        drop(Box::from_raw(obs));
    }
}

/// Fits the truncated least-squares estimator. The configuration fixes the
/// domain, wavelet order, resolution rule and truncation level.
///
/// # Safety
/// `config_json` must be a NUL-terminated string, `obs` a live handle.
#[no_mangle]
pub unsafe extern "C" fn dl_estimate(config_json: *const c_char, obs: *const DlObservations, out: *mut *mut DlEstimate) -> DlStatus {
    guard(|| {
        let cfg = parse_config(str_arg(config_json, "config_json")?)?;
        let o = handle(obs, "obs")?;
        if o.inner.dim != cfg.dim() {
            return Err(Error::DimensionMismatch { expected: cfg.dim(), got: o.inner.dim }.into());
        }
        let regions = cfg.regions()?;
        let basis = cfg.basis_for(&cfg.family()?, &regions, o.inner.n().max(2))?;
        let est = estimate_f(&o.inner, &basis, cfg.truncation())?;
        put(out, Box::into_raw(Box::new(DlEstimate { inner: est, j0: basis.j0, j: basis.j })), "out")
    })
}

/// Evaluates the estimate at `x`; `truncated != 0` selects `min(f̂, M)_+`.
///
/// # Safety
/// `x` must point to `dim` doubles and `out` to one double.
#[no_mangle]
pub unsafe extern "C" fn dl_estimate_value(est: *const DlEstimate, x: *const f64, dim: usize, truncated: i32, out: *mut f64) -> DlStatus {
    guard(|| {
        let e = handle(est, "est")?;
        let x = slice_arg(x, dim, "x")?;
        let expected = e.inner.coeffs.basis.dim();
        if dim != expected {
            return Err(Error::DimensionMismatch { expected, got: dim }.into());
        }
        let f = if truncated != 0 { &e.inner.f_hat_star } else { &e.inner.f_hat };
        put(out, f.value(x), "out")
    })
}

/// Writes the coarse and fine levels and the number of coefficients.
///
/// # Safety
/// Output pointers must be valid; any of them may be null to skip it.
#[no_mangle]
pub unsafe extern "C" fn dl_estimate_info(est: *const DlEstimate, j0: *mut u32, j: *mut u32, coefficients: *mut usize) -> DlStatus {
    guard(|| {
        let e = handle(est, "est")?;
        if !j0.is_null() {
            j0.write(e.j0);
        }
        if !j.is_null() {
            j.write(e.j);
        }
        if !coefficients.is_null() {
            coefficients.write(e.inner.coeffs.values.len());
        }
        Ok(())
    })
}

/// # Safety
/// `est` must come from `dl_estimate` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn dl_estimate_free(est: *mut DlEstimate) {
    if !est.is_null() {
        drop(Box::from_raw(est));
    }
}

/// Log proxy transition density `log q_{D,f}(x, y)`.
///
/// # Safety
/// `x`, `y` must point to `dim` doubles and `out` to one double.
#[no_mangle]
pub unsafe extern "C" fn dl_log_q(
    field: *const DlField,
    d_interval: f64,
    x: *const f64,
    y: *const f64,
    dim: usize,
    out: *mut f64,
) -> DlStatus {
    guard(|| {
        let f = handle(field, "field")?;
        let (x, y) = (slice_arg(x, dim, "x")?, slice_arg(y, dim, "y")?);
        if dim == 0 || !(d_interval > 0.0) {
            return Err(invalid("dimension and sampling interval must be positive"));
        }
        let model = ProxyModel::new(f.inner.clone(), d_interval)?;
        put(out, log_q(&model, x, y)?, "out")
    })
}

/// Smoothness thresholds and rate sequences for dimension `d`, sampling
/// exponent `a`, smoothness `s` and sample size `n`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dl_ratecalc(d: u32, a: f64, s: f64, n: f64, out: *mut DlRates) -> DlStatus {
    guard(|| {
        let d = d as usize;
        let seq = rate_sequences(&RateParams { d, a, s, n })?;
        let rates = DlRates {
            alpha_d: alpha_d(d) as u32,
            s_star: s_star(d, a)?,
            eps_n: seq.eps_n,
            d_interval: seq.d_interval,
            e_n: seq.e_n,
            v_n: seq.v_n,
        };
        put(out, rates, "out")
    })
}
