//! C ABI over `egf-core`.
//!
//! Every fallible call returns an [`EgfStatus`]; on failure the message is
//! kept per thread and can be copied out with [`egf_last_error`]. Handles are
//! opaque and must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use egf_core::companion::{build_companion, CompanionMatrix};
use egf_core::scenario::{parse_scenario, run_scenario, RunReport, ScenarioError};
use egf_core::symfun::{power_sums, sigma_from_tau, CurvatureSpectrum};
use egf_core::verify::exact_quasilinear_error;

/// Status codes. The first five match the CLI exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EgfStatus {
    Ok = 0,
    CheckFailed = 1,
    Parse = 2,
    Invalid = 3,
    Solver = 4,
    NullPointer = 5,
    Panic = 6,
}

/// Result of running one scenario.
pub struct EgfReport {
    report: RunReport,
    trajectory: bool,
}

/// Companion matrix of a curvature spectrum.
pub struct EgfCompanion {
    inner: CompanionMatrix,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(e: &ScenarioError) -> EgfStatus {
    match e.exit_code() {
        2 => EgfStatus::Parse,
        3 => EgfStatus::Invalid,
        _ => EgfStatus::Solver,
    }
}

fn core_status(e: &egf_core::Error) -> EgfStatus {
    if e.exit_code() == 3 {
        EgfStatus::Invalid
    } else {
        EgfStatus::Solver
    }
}

fn guard(f: impl FnOnce() -> EgfStatus) -> EgfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => {
            set_error("internal panic");
            EgfStatus::Panic
        }
    }
}

/// Copies `s` with a trailing NUL, truncating to `len`. Returns the size
/// needed for the whole string including the NUL.
unsafe fn copy_out(s: &str, buf: *mut c_char, len: usize) -> usize {
    if !buf.is_null() && len > 0 {
        let n = s.len().min(len - 1);
        std::ptr::copy_nonoverlapping(s.as_ptr().cast::<c_char>(), buf, n);
        *buf.add(n) = 0;
    }
    s.len() + 1
}

unsafe fn read_str<'a>(p: *const c_char) -> Result<&'a str, EgfStatus> {
    if p.is_null() {
        set_error("null string argument");
        return Err(EgfStatus::NullPointer);
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error("argument is not valid UTF-8");
        EgfStatus::Parse
    })
}

/// Copies the last error message of this thread into `buf`.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn egf_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| copy_out(&e.borrow(), buf, len))
}

/// Parses and runs a scenario given as TOML text.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn egf_run_scenario(toml: *const c_char, out: *mut *mut EgfReport) -> EgfStatus {
    guard(|| {
        if out.is_null() {
            set_error("null output pointer");
            return EgfStatus::NullPointer;
        }
        *out = std::ptr::null_mut();
        let text = match read_str(toml) {
            Ok(t) => t,
            Err(s) => return s,
        };
        let result = parse_scenario(text).and_then(|sc| run_scenario(&sc).map(|r| (r, sc.output.trajectory)));
        match result {
            Ok((report, trajectory)) => {
                *out = Box::into_raw(Box::new(EgfReport { report, trajectory }));
                EgfStatus::Ok
            }
            Err(e) => {
                set_error(e.to_string());
                status_of(&e)
            }
        }
    })
}

/// 1 if every check of the run passed, 0 otherwise or for a null handle.
///
/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn egf_report_passed(report: *const EgfReport) -> i32 {
    report.as_ref().map_or(0, |r| i32::from(r.report.passed()))
}

/// Sup norm of the main field at the final time, NaN for a null handle.
///
/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn egf_report_final_sup(report: *const EgfReport) -> f64 {
    report.as_ref().map_or(f64::NAN, |r| r.report.final_sup)
}

/// Error against the closed form. `Invalid` when the kind has none.
///
/// # Safety
/// `report` must be null or a live handle, `value` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn egf_report_error(report: *const EgfReport, value: *mut f64) -> EgfStatus {
    let (Some(r), false) = (report.as_ref(), value.is_null()) else {
        set_error("null argument");
        return EgfStatus::NullPointer;
    };
    match r.report.error {
        Some(e) => {
            *value = e;
            EgfStatus::Ok
        }
        None => {
            set_error("scenario kind has no closed form");
            EgfStatus::Invalid
        }
    }
}

/// Copies the verdict text. Returns the needed size including the NUL.
///
/// # Safety
/// `report` must be null or a live handle; `buf` null or `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn egf_report_verdict(report: *const EgfReport, buf: *mut c_char, len: usize) -> usize {
    match report.as_ref() {
        Some(r) => copy_out(&r.report.verdict(), buf, len),
        None => 0,
    }
}

/// Writes the CSV artifacts and verdict into `dir`.
///
/// # Safety
/// `report` must be a live handle and `dir` a NUL-terminated path.
#[no_mangle]
pub unsafe extern "C" fn egf_report_write(report: *const EgfReport, dir: *const c_char) -> EgfStatus {
    guard(|| {
        let Some(r) = report.as_ref() else {
            set_error("null report");
            return EgfStatus::NullPointer;
        };
        let dir = match read_str(dir) {
            Ok(d) => d,
            Err(s) => return s,
        };
        match r.report.write(Path::new(dir), r.trajectory) {
            Ok(()) => EgfStatus::Ok,
            Err(e) => {
                set_error(e.to_string());
                EgfStatus::Solver
            }
        }
    })
}

/// # Safety
/// `report` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn egf_report_free(report: *mut EgfReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Builds the companion matrix of the spectrum `k[0..n]`.
///
/// # Safety
/// `k` must point to `n` doubles and `out` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn egf_companion_from_spectrum(
    k: *const f64,
    n: usize,
    out: *mut *mut EgfCompanion,
) -> EgfStatus {
    guard(|| {
        if out.is_null() || (k.is_null() && n > 0) {
            set_error("null argument");
            return EgfStatus::NullPointer;
        }
        *out = std::ptr::null_mut();
        let values = if n == 0 { Vec::new() } else { std::slice::from_raw_parts(k, n).to_vec() };
        match CurvatureSpectrum::new(values) {
            Ok(spec) => {
                let inner = build_companion(&sigma_from_tau(&power_sums(&spec)));
                *out = Box::into_raw(Box::new(EgfCompanion { inner }));
                EgfStatus::Ok
            }
            Err(e) => {
                set_error(e.to_string());
                core_status(&e)
            }
        }
    })
}

/// Matrix dimension, 0 for a null handle.
///
/// # Safety
/// `b` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn egf_companion_dim(b: *const EgfCompanion) -> usize {
    b.as_ref().map_or(0, |b| b.inner.n())
}

/// Copies the entries row-major into `buf`, which must hold `dim*dim` doubles.
///
/// # Safety
/// `b` must be a live handle and `buf` point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn egf_companion_entries(b: *const EgfCompanion, buf: *mut f64, len: usize) -> EgfStatus {
    let (Some(b), false) = (b.as_ref(), buf.is_null()) else {
        set_error("null argument");
        return EgfStatus::NullPointer;
    };
    let m = b.inner.matrix();
    let n = m.nrows();
    if len < n * n {
        set_error(format!("buffer holds {len} values, need {}", n * n));
        return EgfStatus::Invalid;
    }
    let out = std::slice::from_raw_parts_mut(buf, n * n);
    for i in 0..n {
        for j in 0..n {
            out[i * n + j] = m[(i, j)];
        }
    }
    EgfStatus::Ok
}

/// # Safety
/// `b` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn egf_companion_free(b: *mut EgfCompanion) {
    if !b.is_null() {
        drop(Box::from_raw(b));
    }
}

/// Sup-norm error of the quasilinear reference problem against its closed
/// form, Crank-Nicolson on `nodes` points.
///
/// # Safety
/// `value` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn egf_exact_quasilinear_error(nodes: usize, dt: f64, t_end: f64, value: *mut f64) -> EgfStatus {
    guard(|| {
        if value.is_null() {
            set_error("null output pointer");
            return EgfStatus::NullPointer;
        }
        match exact_quasilinear_error(nodes, dt, t_end) {
            Ok((e, _)) => {
                *value = e;
                EgfStatus::Ok
            }
            Err(e) => {
                set_error(e.to_string());
                core_status(&e)
            }
        }
    })
}
