//! C ABI over the simulator.
//!
//! Objects cross the boundary as opaque handles owned by the caller and
//! released with the matching `*_free`. Every fallible call returns an
//! [`NrStatus`]; on failure [`nr_last_error`] describes the problem for the
//! calling thread. Strings returned through out-parameters are owned by the
//! caller and released with [`nr_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use nurules::oracle::{self, OutcomeLaw};
use nurules::scenario::{self, Scenario};
use nurules::{export_config, parse_config, run_ensemble, EnsembleReport};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    Scenario = 4,
    Engine = 5,
    Oracle = 6,
    NotFound = 7,
    Internal = 8,
}

/// Validated scenario.
pub struct NrScenario(Scenario);

/// Ensemble statistics.
pub struct NrReport(EnsembleReport);

/// Exact outcome law.
pub struct NrLaw(OutcomeLaw);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).unwrap_or_default());
}

/// Message for the last failed call on this thread, empty if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn nr_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

fn guard(f: impl FnOnce() -> Result<(), (NrStatus, String)>) -> NrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => NrStatus::Ok,
        Ok(Err((status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("panic inside nurules");
            NrStatus::Internal
        }
    }
}

unsafe fn text<'a>(p: *const c_char) -> Result<&'a str, (NrStatus, String)> {
    if p.is_null() {
        return Err((NrStatus::NullPointer, "null string argument".into()));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| (NrStatus::InvalidUtf8, e.to_string()))
}

unsafe fn handle<'a, T>(p: *const T) -> Result<&'a T, (NrStatus, String)> {
    p.as_ref()
        .ok_or((NrStatus::NullPointer, "null handle".into()))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), (NrStatus, String)> {
    if out.is_null() {
        return Err((NrStatus::NullPointer, "null out-pointer".into()));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn put_string(out: *mut *mut c_char, s: String) -> Result<(), (NrStatus, String)> {
    if out.is_null() {
        return Err((NrStatus::NullPointer, "null out-pointer".into()));
    }
    let c = CString::new(s).map_err(|e| (NrStatus::Internal, e.to_string()))?;
    *out = c.into_raw();
    Ok(())
}

unsafe fn put_f64(out: *mut f64, v: f64) -> Result<(), (NrStatus, String)> {
    if out.is_null() {
        return Err((NrStatus::NullPointer, "null out-pointer".into()));
    }
    *out = v;
    Ok(())
}

/// Loads a built-in scenario by name.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn nr_scenario_builtin(
    name: *const c_char,
    out: *mut *mut NrScenario,
) -> NrStatus {
    guard(|| {
        let name = text(name)?;
        let sc = scenario::builtin(name).map_err(|e| (NrStatus::Scenario, e.to_string()))?;
        put(out, NrScenario(sc))
    })
}

/// Parses and validates a TOML scenario document.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn nr_scenario_from_toml(
    toml: *const c_char,
    out: *mut *mut NrScenario,
) -> NrStatus {
    guard(|| {
        let sc = parse_config(text(toml)?).map_err(|e| (NrStatus::Config, e.to_string()))?;
        put(out, NrScenario(sc))
    })
}

/// Serializes a scenario to TOML.
///
/// # Safety
/// `scenario` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nr_scenario_to_toml(
    scenario: *const NrScenario,
    out: *mut *mut c_char,
) -> NrStatus {
    guard(|| {
        let sc = handle(scenario)?;
        let s = export_config(&sc.0).map_err(|e| (NrStatus::Config, e.to_string()))?;
        put_string(out, s)
    })
}

/// # Safety
/// `scenario` must be null or a handle from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn nr_scenario_free(scenario: *mut NrScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Runs `trials` trajectories. `parallelism` 0 picks the default worker
/// count. Results depend only on the scenario, `master_seed` and `trials`.
///
/// # Safety
/// `scenario` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nr_run_ensemble(
    scenario: *const NrScenario,
    trials: u64,
    master_seed: u64,
    parallelism: usize,
    out: *mut *mut NrReport,
) -> NrStatus {
    guard(|| {
        let sc = handle(scenario)?;
        let report = run_ensemble(&sc.0, trials, master_seed, parallelism)
            .map_err(|e| (NrStatus::Engine, e.to_string()))?;
        put(out, NrReport(report))
    })
}

/// Observed frequency of `label`; zero when it never occurred.
///
/// # Safety
/// `report` must come from this library; `label` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn nr_report_frequency(
    report: *const NrReport,
    label: *const c_char,
    out: *mut f64,
) -> NrStatus {
    guard(|| {
        let r = handle(report)?;
        put_f64(out, r.0.frequency(text(label)?))
    })
}

/// Full report as JSON.
///
/// # Safety
/// `report` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nr_report_to_json(
    report: *const NrReport,
    out: *mut *mut c_char,
) -> NrStatus {
    guard(|| {
        let r = handle(report)?;
        let s = serde_json::to_string(&r.0).map_err(|e| (NrStatus::Internal, e.to_string()))?;
        put_string(out, s)
    })
}

/// # Safety
/// `report` must be null or a handle from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn nr_report_free(report: *mut NrReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Exact outcome law of a scenario.
///
/// # Safety
/// `scenario` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nr_outcome_law(
    scenario: *const NrScenario,
    out: *mut *mut NrLaw,
) -> NrStatus {
    guard(|| {
        let sc = handle(scenario)?;
        let law = oracle::outcome_law(&sc.0).map_err(|e| (NrStatus::Oracle, e.to_string()))?;
        put(out, NrLaw(law))
    })
}

/// Probability of `label`; [`NrStatus::NotFound`] for labels the law does
/// not list.
///
/// # Safety
/// `law` must come from this library; `label` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn nr_law_probability(
    law: *const NrLaw,
    label: *const c_char,
    out: *mut f64,
) -> NrStatus {
    guard(|| {
        let law = handle(law)?;
        let label = text(label)?;
        let p = law
            .0
            .probabilities
            .get(label)
            .copied()
            .ok_or((NrStatus::NotFound, format!("no label {label:?}")))?;
        put_f64(out, p)
    })
}

/// Law as a JSON object mapping labels to probabilities.
///
/// # Safety
/// `law` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nr_law_to_json(law: *const NrLaw, out: *mut *mut c_char) -> NrStatus {
    guard(|| {
        let law = handle(law)?;
        let s = serde_json::to_string(&law.0.probabilities)
            .map_err(|e| (NrStatus::Internal, e.to_string()))?;
        put_string(out, s)
    })
}

/// # Safety
/// `law` must be null or a handle from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn nr_law_free(law: *mut NrLaw) {
    if !law.is_null() {
        drop(Box::from_raw(law));
    }
}

/// # Safety
/// `s` must be null or a string returned by this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn nr_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
