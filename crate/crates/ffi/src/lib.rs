//! C ABI over the esln simulator.
//!
//! Handles are opaque and owned by the caller once returned; free them with
//! the matching `_free` function. Every entry point returns an [`EslnStatus`]
//! and never unwinds across the boundary. The message of the last failure on
//! the calling thread is available from [`esln_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use esln::config::{RunConfig, Scenario};
use esln::ensemble::{lz_limit, EnsembleResult, Simulator};
use esln::scenario::run_scenario;
use esln::EslnError;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EslnStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidConfig = 3,
    UnknownScenario = 4,
    Domain = 5,
    Numerical = 6,
    Window = 7,
    Io = 8,
    BufferTooSmall = 9,
    /// The run finished but exceeded the exclusion budget.
    Unreliable = 10,
    Panic = 99,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EslnSeries {
    Time = 0,
    Sx = 1,
    Sy = 2,
    Sz = 3,
    TraceRe = 4,
    TraceIm = 5,
    SxErr = 6,
    SyErr = 7,
    SzErr = 8,
    TraceErr = 9,
}

/// Run configuration.
pub struct EslnConfig(RunConfig);

/// Ensemble averages of one run.
pub struct EslnResult(EnsembleResult);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn record(status: EslnStatus, msg: impl Into<String>) -> EslnStatus {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
    status
}

fn from_error(e: EslnError) -> EslnStatus {
    let status = match &e {
        EslnError::InvalidConfig { .. } | EslnError::GridMismatch(_) => EslnStatus::InvalidConfig,
        EslnError::UnknownScenario(_) => EslnStatus::UnknownScenario,
        EslnError::Domain(_) => EslnStatus::Domain,
        EslnError::QuadratureNotConverged { .. } | EslnError::NegativeSpectrum { .. } => EslnStatus::Numerical,
        EslnError::Window(_) => EslnStatus::Window,
        EslnError::Io(_) => EslnStatus::Io,
    };
    record(status, e.to_string())
}

/// Runs `f`, mapping errors and panics to a status.
fn guard(f: impl FnOnce() -> Result<EslnStatus, EslnStatus>) -> EslnStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(s)) | Ok(Err(s)) => s,
        Err(_) => record(EslnStatus::Panic, "internal panic"),
    }
}

unsafe fn text<'a>(p: *const c_char) -> Result<&'a str, EslnStatus> {
    if p.is_null() {
        return Err(record(EslnStatus::NullPointer, "null string argument"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| record(EslnStatus::InvalidUtf8, "argument is not valid UTF-8"))
}

unsafe fn handle<'a, T>(p: *const T) -> Result<&'a T, EslnStatus> {
    p.as_ref().ok_or_else(|| record(EslnStatus::NullPointer, "null handle"))
}

/// Message of the last failure on this thread, or null. Valid until the next
/// failing call on the same thread.
#[no_mangle]
pub extern "C" fn esln_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Creates a configuration with the defaults of `scenario`.
///
/// # Safety
/// `scenario` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn esln_config_new(scenario: *const c_char, out: *mut *mut EslnConfig) -> EslnStatus {
    guard(|| {
        if out.is_null() {
            return Err(record(EslnStatus::NullPointer, "null output pointer"));
        }
        let sc: Scenario = text(scenario)?.parse().map_err(from_error)?;
        *out = Box::into_raw(Box::new(EslnConfig(RunConfig::for_scenario(sc))));
        Ok(EslnStatus::Ok)
    })
}

/// Sets one `key = value` entry.
///
/// # Safety
/// `config` must come from [`esln_config_new`]; `key` and `value` must be
/// NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn esln_config_set(config: *mut EslnConfig, key: *const c_char, value: *const c_char) -> EslnStatus {
    guard(|| {
        let cfg = config.as_mut().ok_or_else(|| record(EslnStatus::NullPointer, "null handle"))?;
        cfg.0.set(text(key)?, text(value)?).map_err(from_error)?;
        Ok(EslnStatus::Ok)
    })
}

/// # Safety
/// `config` must come from [`esln_config_new`] or be null.
#[no_mangle]
pub unsafe extern "C" fn esln_config_free(config: *mut EslnConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Runs the configured ensemble in memory. A result is returned even when it
/// is flagged unreliable, together with [`EslnStatus::Unreliable`].
///
/// # Safety
/// `config` must come from [`esln_config_new`] and `out` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn esln_run_ensemble(config: *const EslnConfig, out: *mut *mut EslnResult) -> EslnStatus {
    guard(|| {
        let cfg = handle(config)?;
        if out.is_null() {
            return Err(record(EslnStatus::NullPointer, "null output pointer"));
        }
        let ens = cfg.0.ensemble().map_err(from_error)?;
        let sim = Simulator::new(&ens.bath, &ens.grid, &ens.quadrature).map_err(from_error)?;
        let res = sim.run(&ens.spec).map_err(from_error)?;
        let unreliable = res.unreliable;
        *out = Box::into_raw(Box::new(EslnResult(res)));
        Ok(if unreliable {
            record(EslnStatus::Unreliable, "exclusion budget exceeded")
        } else {
            EslnStatus::Ok
        })
    })
}

/// Runs the configured scenario and writes its files to the `out` directory.
///
/// # Safety
/// `config` must come from [`esln_config_new`].
#[no_mangle]
pub unsafe extern "C" fn esln_run_scenario(config: *const EslnConfig) -> EslnStatus {
    guard(|| {
        let outcome = run_scenario(&handle(config)?.0).map_err(from_error)?;
        Ok(if outcome.unreliable {
            record(EslnStatus::Unreliable, "exclusion budget exceeded")
        } else {
            EslnStatus::Ok
        })
    })
}

/// Number of grid nodes in the result, or 0 for a null handle.
///
/// # Safety
/// `result` must come from [`esln_run_ensemble`] or be null.
#[no_mangle]
pub unsafe extern "C" fn esln_result_len(result: *const EslnResult) -> usize {
    result.as_ref().map_or(0, |r| r.0.times.len())
}

/// Trajectories excluded from the average, or 0 for a null handle.
///
/// # Safety
/// `result` must come from [`esln_run_ensemble`] or be null.
#[no_mangle]
pub unsafe extern "C" fn esln_result_excluded(result: *const EslnResult) -> usize {
    result.as_ref().map_or(0, |r| r.0.n_excluded)
}

/// Copies one series into `buf`, which must hold [`esln_result_len`] values.
/// Error series are NaN when the run had fewer samples than batches.
///
/// # Safety
/// `result` must come from [`esln_run_ensemble`]; `buf` must be valid for
/// `len` writes.
#[no_mangle]
pub unsafe extern "C" fn esln_result_copy(
    result: *const EslnResult,
    series: EslnSeries,
    buf: *mut f64,
    len: usize,
) -> EslnStatus {
    guard(|| {
        let r = &handle(result)?.0;
        if buf.is_null() {
            return Err(record(EslnStatus::NullPointer, "null buffer"));
        }
        let n = r.times.len();
        if len < n {
            return Err(record(EslnStatus::BufferTooSmall, format!("need {n} values, got {len}")));
        }
        let out = std::slice::from_raw_parts_mut(buf, n);
        let err = |pick: fn(&esln::ensemble::StdErrors) -> &Vec<f64>| {
            r.stderr.as_ref().map_or_else(|| vec![f64::NAN; n], |e| pick(e).clone())
        };
        let values: Vec<f64> = match series {
            EslnSeries::Time => r.times.clone(),
            EslnSeries::Sx => r.sx.clone(),
            EslnSeries::Sy => r.sy.clone(),
            EslnSeries::Sz => r.sz.clone(),
            EslnSeries::TraceRe => r.trace.iter().map(|z| z.re).collect(),
            EslnSeries::TraceIm => r.trace.iter().map(|z| z.im).collect(),
            EslnSeries::SxErr => err(|e| &e.sx),
            EslnSeries::SyErr => err(|e| &e.sy),
            EslnSeries::SzErr => err(|e| &e.sz),
            EslnSeries::TraceErr => err(|e| &e.trace),
        };
        out.copy_from_slice(&values);
        Ok(EslnStatus::Ok)
    })
}

/// # Safety
/// `result` must come from [`esln_run_ensemble`] or be null.
#[no_mangle]
pub unsafe extern "C" fn esln_result_free(result: *mut EslnResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// Asymptotic Landau-Zener ⟨σ_z⟩ for an isolated spin.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn esln_lz_limit(delta: f64, kappa: f64, out: *mut f64) -> EslnStatus {
    guard(|| {
        if out.is_null() {
            return Err(record(EslnStatus::NullPointer, "null output pointer"));
        }
        *out = lz_limit(delta, kappa).map_err(from_error)?;
        Ok(EslnStatus::Ok)
    })
}
