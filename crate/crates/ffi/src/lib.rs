//! C ABI over `locq`.
//!
//! Objects cross the boundary as opaque handles created by `locq_*_new` /
//! `locq_*_from_*` and released by the matching `locq_*_free`. Every
//! fallible call returns a [`LocqStatus`]; on failure
//! [`locq_last_error`] describes the most recent error on the calling
//! thread. Strings returned by the library are owned by the caller and must
//! be released with [`locq_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use locq::config::{ExperimentConfig, OracleSpec, StateSpec};
use locq::ensemble::{localizable_quantumness, BasisAssignment, LqMethod};
use locq::qstate::{Bipartition, PureState};
use locq::runner::{self, RunError};
use locq::{Error, C64};

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LocqStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// Bad configuration or arguments (CLI exit code 2).
    Config = 3,
    /// Failure while running (CLI exit code 3).
    Runtime = 4,
    Panic = 5,
}

/// A pure state.
pub struct LocqState(PureState);

/// A parsed experiment configuration.
pub struct LocqExperiment(ExperimentConfig);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

struct Failure(LocqStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = if runner::is_config_error(&e) || matches!(e, Error::Json(_)) {
            LocqStatus::Config
        } else {
            LocqStatus::Runtime
        };
        Failure(status, e.to_string())
    }
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        let status = if e.exit_code() == runner::EXIT_CONFIG {
            LocqStatus::Config
        } else {
            LocqStatus::Runtime
        };
        Failure(status, e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> LocqStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            LocqStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside locq");
            LocqStatus::Panic
        }
    }
}

fn null() -> Failure {
    Failure(LocqStatus::NullPointer, "null pointer argument".into())
}

unsafe fn text<'a>(s: *const c_char) -> Result<&'a str, Failure> {
    if s.is_null() {
        return Err(null());
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|e| Failure(LocqStatus::InvalidUtf8, e.to_string()))
}

unsafe fn out<'a, T>(p: *mut T) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(null)
}

fn owned_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).map_or(ptr::null_mut(), CString::into_raw)
}

fn json_error(e: serde_json::Error) -> Failure {
    Failure(LocqStatus::Config, e.to_string())
}

/// Message for the last failed call on this thread, or null. Valid until
/// the next call into the library from this thread.
#[no_mangle]
pub extern "C" fn locq_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn locq_version() -> *const c_char {
    static V: &CStr =
        match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
            Ok(v) => v,
            Err(_) => panic!("version string"),
        };
    V.as_ptr()
}

/// Releases a string returned by the library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn locq_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Builds a state from a JSON family spec such as `{"family": "ghz", "n": 4}`.
///
/// # Safety
/// `spec` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn locq_state_from_spec(
    spec: *const c_char,
    out_state: *mut *mut LocqState,
) -> LocqStatus {
    guard(|| {
        let spec: StateSpec = serde_json::from_str(text(spec)?).map_err(json_error)?;
        let psi = spec.build()?;
        *out(out_state)? = Box::into_raw(Box::new(LocqState(psi)));
        Ok(())
    })
}

/// Builds a state from `2^n` amplitudes (normalized on the way in).
///
/// # Safety
/// `re` and `im` must each point to `2^n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn locq_state_from_amplitudes(
    n: usize,
    re: *const f64,
    im: *const f64,
    out_state: *mut *mut LocqState,
) -> LocqStatus {
    guard(|| {
        if re.is_null() || im.is_null() {
            return Err(null());
        }
        if n > 20 {
            return Err(Failure(
                LocqStatus::Config,
                format!("{n} qubits is too many for a dense state"),
            ));
        }
        let dim = 1usize << n;
        let (re, im) = (
            std::slice::from_raw_parts(re, dim),
            std::slice::from_raw_parts(im, dim),
        );
        let amps = re.iter().zip(im).map(|(&a, &b)| C64::new(a, b)).collect();
        let psi = PureState::normalized(n, amps).map_err(|e| match e {
            Error::ZeroProbabilityOutcome(_) => {
                Failure(LocqStatus::Config, "amplitude vector is zero".into())
            }
            e => e.into(),
        })?;
        *out(out_state)? = Box::into_raw(Box::new(LocqState(psi)));
        Ok(())
    })
}

/// # Safety
/// `state` must come from this library and not have been freed; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn locq_state_free(state: *mut LocqState) {
    if !state.is_null() {
        drop(Box::from_raw(state));
    }
}

/// Number of qubits, or 0 for a null handle.
///
/// # Safety
/// `state` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn locq_state_num_qubits(state: *const LocqState) -> usize {
    state.as_ref().map_or(0, |s| s.0.n())
}

/// Copies the `2^n` amplitudes into `re` / `im`; `len` is their capacity.
///
/// # Safety
/// `re` and `im` must each have room for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn locq_state_amplitudes(
    state: *const LocqState,
    re: *mut f64,
    im: *mut f64,
    len: usize,
) -> LocqStatus {
    guard(|| {
        let s = state.as_ref().ok_or_else(null)?;
        if re.is_null() || im.is_null() {
            return Err(null());
        }
        let amps = s.0.amplitudes();
        if len < amps.len() {
            return Err(Failure(
                LocqStatus::Config,
                format!("buffer of {len} for {} amplitudes", amps.len()),
            ));
        }
        for (i, a) in amps.iter().enumerate() {
            *re.add(i) = a.re;
            *im.add(i) = a.im;
        }
        Ok(())
    })
}

/// Exact localizable quantumness with `A` given by `a` (qubit indices) and
/// the rest measured. `oracle` is JSON such as `{"kind": "separable",
/// "cut": [0]}` or `{"kind": "stabilizer"}`; `basis` is `"fixed-z"`,
/// `"random"` or a Pauli string over `B`.
///
/// # Safety
/// `a` must point to `a_len` indices; strings must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn locq_localizable_quantumness(
    state: *const LocqState,
    a: *const usize,
    a_len: usize,
    oracle: *const c_char,
    basis: *const c_char,
    out_value: *mut f64,
) -> LocqStatus {
    guard(|| {
        let s = state.as_ref().ok_or_else(null)?;
        if a.is_null() && a_len > 0 {
            return Err(null());
        }
        let a = if a_len == 0 {
            &[][..]
        } else {
            std::slice::from_raw_parts(a, a_len)
        };
        let part = Bipartition::complement(s.0.n(), a)?;
        let spec: OracleSpec = serde_json::from_str(text(oracle)?).map_err(json_error)?;
        let oracle = spec.build(part.n_a())?;
        let basis: locq::config::BasisSpec =
            serde_json::from_value(serde_json::Value::String(text(basis)?.to_string()))
                .map_err(json_error)?;
        let basis: BasisAssignment = basis.0;
        *out(out_value)? =
            localizable_quantumness(&s.0, &part, &oracle, &basis, LqMethod::Exact)?.value;
        Ok(())
    })
}

/// Spectral gap of the fidelity observable with `A` the leading `n_a` qubits.
///
/// # Safety
/// `state` must be a live handle; `out_gap` writable.
#[no_mangle]
pub unsafe extern "C" fn locq_fidelity_gap(
    state: *const LocqState,
    n_a: usize,
    out_gap: *mut f64,
) -> LocqStatus {
    guard(|| {
        let s = state.as_ref().ok_or_else(null)?;
        *out(out_gap)? = locq::spectral::fidelity_gap(&s.0, n_a)?;
        Ok(())
    })
}

/// Median-of-means layout `(B, K)` for variance `sigma2`, accuracy `epsilon`
/// and failure probability `delta`.
///
/// # Safety
/// `out_b` and `out_k` must be writable.
#[no_mangle]
pub unsafe extern "C" fn locq_mom_parameters(
    sigma2: f64,
    epsilon: f64,
    delta: f64,
    out_b: *mut usize,
    out_k: *mut usize,
) -> LocqStatus {
    guard(|| {
        let p = locq::estimator::mom_parameters(sigma2, epsilon, delta)?;
        *out(out_b)? = p.b;
        *out(out_k)? = p.k;
        Ok(())
    })
}

/// Parses and validates an experiment config (same schema as the CLI).
///
/// # Safety
/// `json` must be NUL-terminated; `out_experiment` writable.
#[no_mangle]
pub unsafe extern "C" fn locq_experiment_from_json(
    json: *const c_char,
    out_experiment: *mut *mut LocqExperiment,
) -> LocqStatus {
    guard(|| {
        let cfg = ExperimentConfig::from_json(text(json)?, "<ffi>")
            .map_err(|e| Failure(LocqStatus::Config, e.to_string()))?;
        *out(out_experiment)? = Box::into_raw(Box::new(LocqExperiment(cfg)));
        Ok(())
    })
}

/// # Safety
/// `experiment` must come from this library and not have been freed; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn locq_experiment_free(experiment: *mut LocqExperiment) {
    if !experiment.is_null() {
        drop(Box::from_raw(experiment));
    }
}

/// Replaces the master seed.
///
/// # Safety
/// `experiment` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn locq_experiment_set_seed(
    experiment: *mut LocqExperiment,
    seed: u64,
) -> LocqStatus {
    guard(|| {
        experiment.as_mut().ok_or_else(null)?.0.seed = seed;
        Ok(())
    })
}

/// Runs the experiment on `workers` threads (0 = default) and returns the
/// `summary.json` text through `out_summary`. When `out_dir` is non-null all
/// artifacts are also written there.
///
/// # Safety
/// `experiment` must be a live handle; `out_dir` null or NUL-terminated;
/// `out_summary` writable. Free the summary with [`locq_string_free`].
#[no_mangle]
pub unsafe extern "C" fn locq_experiment_run(
    experiment: *const LocqExperiment,
    workers: usize,
    out_dir: *const c_char,
    out_summary: *mut *mut c_char,
) -> LocqStatus {
    guard(|| {
        let cfg = &experiment.as_ref().ok_or_else(null)?.0;
        let slot = out(out_summary)?;
        let dir = if out_dir.is_null() {
            None
        } else {
            Some(text(out_dir)?)
        };
        let art = runner::execute_with_workers(cfg, "<ffi>", (workers > 0).then_some(workers))?;
        if let Some(d) = dir {
            art.write(Path::new(d))
                .map_err(|e| Failure(LocqStatus::Runtime, e.to_string()))?;
        }
        *slot = owned_string(String::from_utf8_lossy(&art.summary).into_owned());
        Ok(())
    })
}
