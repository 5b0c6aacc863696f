//! C ABI over `convdiss`.
//!
//! Handles are opaque and owned by the caller, who releases them with the
//! matching `*_free` function. Every entry point returns a
//! [`ConvdissStatus`]; on failure a message is available from
//! [`convdiss_last_error`] until the next failing call on the same thread.
//! Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use convdiss::config::{load_config, parse_config, RunConfig};
use convdiss::experiments::{classify_run, run_cell, Regime};
use convdiss::stepper::{estimate_blowup_time, RunOutcome};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvdissStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    InvalidArgument = 4,
    Runtime = 5,
    /// Index, name or buffer length does not match the data.
    OutOfRange = 6,
    /// The query does not apply to this run (e.g. blow-up time of a
    /// completed run).
    NotApplicable = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvdissRegime {
    Dissipative = 0,
    BlowUp = 1,
    Inconclusive = 2,
}

/// Parsed, validated run configuration.
pub struct ConvdissConfig {
    inner: RunConfig,
}

/// Finished run with its recorded diagnostics.
pub struct ConvdissRun {
    outcome: RunOutcome,
    names: Vec<CString>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).unwrap_or_default());
}

fn fail(status: ConvdissStatus, message: impl Into<String>) -> ConvdissStatus {
    set_error(message);
    status
}

fn guard(body: impl FnOnce() -> ConvdissStatus) -> ConvdissStatus {
    catch_unwind(AssertUnwindSafe(body)).unwrap_or_else(|_| fail(ConvdissStatus::Panic, "internal panic"))
}

unsafe fn read_str<'a>(s: *const c_char) -> Result<&'a str, ConvdissStatus> {
    if s.is_null() {
        return Err(fail(ConvdissStatus::NullPointer, "null string"));
    }
    CStr::from_ptr(s).to_str().map_err(|_| fail(ConvdissStatus::InvalidUtf8, "string is not UTF-8"))
}

macro_rules! deref {
    ($p:expr) => {
        match $p.as_ref() {
            Some(v) => v,
            None => return fail(ConvdissStatus::NullPointer, concat!("null ", stringify!($p))),
        }
    };
}

macro_rules! deref_mut {
    ($p:expr) => {
        match $p.as_mut() {
            Some(v) => v,
            None => return fail(ConvdissStatus::NullPointer, concat!("null ", stringify!($p))),
        }
    };
}

macro_rules! try_status {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(status) => return status,
        }
    };
}

fn finish_config(
    parsed: Result<RunConfig, convdiss::config::ConfigError>,
    out: &mut *mut ConvdissConfig,
) -> ConvdissStatus {
    match parsed.and_then(|c| c.validate().map(|_| c)) {
        Ok(inner) => {
            *out = Box::into_raw(Box::new(ConvdissConfig { inner }));
            ConvdissStatus::Ok
        }
        Err(e) => fail(ConvdissStatus::Config, e.to_string()),
    }
}

/// Parses a TOML configuration document.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn convdiss_config_parse(text: *const c_char, out: *mut *mut ConvdissConfig) -> ConvdissStatus {
    guard(|| {
        let out = deref_mut!(out);
        *out = ptr::null_mut();
        let text = try_status!(read_str(text));
        finish_config(parse_config(text), out)
    })
}

/// Reads and parses a TOML configuration file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn convdiss_config_load(path: *const c_char, out: *mut *mut ConvdissConfig) -> ConvdissStatus {
    guard(|| {
        let out = deref_mut!(out);
        *out = ptr::null_mut();
        let path = try_status!(read_str(path));
        finish_config(load_config(std::path::Path::new(path)), out)
    })
}

/// Overrides the final time.
///
/// # Safety
/// `config` must come from `convdiss_config_parse` or `convdiss_config_load`.
#[no_mangle]
pub unsafe extern "C" fn convdiss_config_set_t_max(config: *mut ConvdissConfig, t_max: f64) -> ConvdissStatus {
    guard(|| {
        let config = deref_mut!(config);
        let mut next = config.inner.clone();
        next.controls.t_max = t_max;
        if let Err(e) = next.validate() {
            return fail(ConvdissStatus::InvalidArgument, e.to_string());
        }
        config.inner = next;
        ConvdissStatus::Ok
    })
}

/// Overrides the number of grid cells.
///
/// # Safety
/// `config` must come from `convdiss_config_parse` or `convdiss_config_load`.
#[no_mangle]
pub unsafe extern "C" fn convdiss_config_set_n_cells(config: *mut ConvdissConfig, n_cells: usize) -> ConvdissStatus {
    guard(|| {
        let config = deref_mut!(config);
        let mut next = config.inner.clone();
        next.n_cells = n_cells;
        if let Err(e) = next.validate() {
            return fail(ConvdissStatus::InvalidArgument, e.to_string());
        }
        config.inner = next;
        ConvdissStatus::Ok
    })
}

/// # Safety
/// `config` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn convdiss_config_free(config: *mut ConvdissConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Integrates the configured problem from its initial data.
///
/// # Safety
/// `config` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn convdiss_run(config: *const ConvdissConfig, out: *mut *mut ConvdissRun) -> ConvdissStatus {
    guard(|| {
        let out = deref_mut!(out);
        *out = ptr::null_mut();
        let config = &deref!(config).inner;
        let profile = match config.profile() {
            Ok(p) => p,
            Err(e) => return fail(ConvdissStatus::Config, e.to_string()),
        };
        let spec = config.spec();
        match run_cell(&spec, &profile, config.n_cells, &config.controls, &config.diagnostics_config()) {
            Ok(outcome) => {
                let names =
                    outcome.series().names.iter().map(|n| CString::new(n.as_str()).unwrap_or_default()).collect();
                *out = Box::into_raw(Box::new(ConvdissRun { outcome, names }));
                ConvdissStatus::Ok
            }
            Err(e) => fail(ConvdissStatus::Runtime, e.to_string()),
        }
    })
}

/// # Safety
/// `run` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn convdiss_run_free(run: *mut ConvdissRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// # Safety
/// `run` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn convdiss_run_regime(run: *const ConvdissRun, out: *mut ConvdissRegime) -> ConvdissStatus {
    guard(|| {
        let run = deref!(run);
        let out = deref_mut!(out);
        *out = match classify_run(&run.outcome) {
            Regime::Dissipative => ConvdissRegime::Dissipative,
            Regime::BlowUp => ConvdissRegime::BlowUp,
            Regime::Inconclusive => ConvdissRegime::Inconclusive,
        };
        ConvdissStatus::Ok
    })
}

/// Detection time and extrapolated blow-up time (NaN when the fit failed).
/// Returns `NotApplicable` unless the run blew up.
///
/// # Safety
/// `run` must be a live handle; `t_detect` and `t_est` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn convdiss_run_blowup_time(
    run: *const ConvdissRun,
    t_detect: *mut f64,
    t_est: *mut f64,
) -> ConvdissStatus {
    guard(|| {
        let run = deref!(run);
        let t_detect = deref_mut!(t_detect);
        let t_est = deref_mut!(t_est);
        match &run.outcome {
            RunOutcome::BlowUp { t_detect: td, t_est: te, .. } => {
                *t_detect = *td;
                *t_est = te.unwrap_or(f64::NAN);
                ConvdissStatus::Ok
            }
            other => fail(ConvdissStatus::NotApplicable, format!("run ended as {}", other.label())),
        }
    })
}

/// Number of recorded samples.
///
/// # Safety
/// `run` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn convdiss_run_sample_count(run: *const ConvdissRun, out: *mut usize) -> ConvdissStatus {
    guard(|| {
        *deref_mut!(out) = deref!(run).outcome.series().len();
        ConvdissStatus::Ok
    })
}

/// Number of diagnostic columns.
///
/// # Safety
/// `run` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn convdiss_run_column_count(run: *const ConvdissRun, out: *mut usize) -> ConvdissStatus {
    guard(|| {
        *deref_mut!(out) = deref!(run).names.len();
        ConvdissStatus::Ok
    })
}

/// Name of column `index`. The string lives as long as the run handle.
///
/// # Safety
/// `run` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn convdiss_run_column_name(
    run: *const ConvdissRun,
    index: usize,
    out: *mut *const c_char,
) -> ConvdissStatus {
    guard(|| {
        let run = deref!(run);
        let out = deref_mut!(out);
        match run.names.get(index) {
            Some(name) => {
                *out = name.as_ptr();
                ConvdissStatus::Ok
            }
            None => fail(ConvdissStatus::OutOfRange, format!("column {index} of {}", run.names.len())),
        }
    })
}

unsafe fn copy_out(src: &[f64], buf: *mut f64, len: usize) -> ConvdissStatus {
    if buf.is_null() {
        return fail(ConvdissStatus::NullPointer, "null buffer");
    }
    if len != src.len() {
        return fail(ConvdissStatus::OutOfRange, format!("buffer holds {len}, need {}", src.len()));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), buf, len);
    ConvdissStatus::Ok
}

/// Copies the sample times into `buf`; `len` must equal the sample count.
///
/// # Safety
/// `run` must be a live handle and `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn convdiss_run_times(run: *const ConvdissRun, buf: *mut f64, len: usize) -> ConvdissStatus {
    guard(|| copy_out(&deref!(run).outcome.series().times, buf, len))
}

/// Copies the column called `name` (e.g. "L2", "Linf", "H1") into `buf`;
/// `len` must equal the sample count.
///
/// # Safety
/// `run` must be a live handle, `name` a NUL-terminated string and `buf`
/// valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn convdiss_run_column(
    run: *const ConvdissRun,
    name: *const c_char,
    buf: *mut f64,
    len: usize,
) -> ConvdissStatus {
    guard(|| {
        let run = deref!(run);
        let name = try_status!(read_str(name));
        match run.outcome.series().get(name) {
            Some(column) => copy_out(column, buf, len),
            None => fail(ConvdissStatus::OutOfRange, format!("no column {name:?}")),
        }
    })
}

/// Fits `y^{-q_eff}` linearly in `t` and returns its zero crossing.
///
/// # Safety
/// `t` and `y` must be valid for `n` reads and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn convdiss_estimate_blowup_time(
    t: *const f64,
    y: *const f64,
    n: usize,
    q_eff: f64,
    out: *mut f64,
) -> ConvdissStatus {
    guard(|| {
        let out = deref_mut!(out);
        if t.is_null() || y.is_null() {
            return fail(ConvdissStatus::NullPointer, "null sample array");
        }
        let t = std::slice::from_raw_parts(t, n);
        let y = std::slice::from_raw_parts(y, n);
        let samples: Vec<(f64, f64)> = t.iter().copied().zip(y.iter().copied()).collect();
        match estimate_blowup_time(&samples, q_eff) {
            Ok(v) => {
                *out = v;
                ConvdissStatus::Ok
            }
            Err(e) => fail(ConvdissStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Message of the last failure on this thread, empty if none. Valid until
/// the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn convdiss_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

#[no_mangle]
pub extern "C" fn convdiss_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
