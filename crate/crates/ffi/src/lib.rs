//! C interface to the hiersim runtime.
//!
//! Two opaque handles: a validated scenario (`HsScenario`) and a running
//! simulation built from one (`HsSim`). Every fallible call returns an
//! [`HsStatus`]; on failure the message is kept per thread and can be read
//! with [`hs_last_error`]. Panics are caught at the boundary and reported as
//! `HS_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use hiersim::runtime::RuntimeError;
use hiersim::scenario::{
    build_environment, bundled, bundled_dir, run_scenario, validate_text, BuiltScenario, ScenarioConfig, ScenarioError,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HsStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    /// The scenario text or its data files are invalid.
    InvalidScenario = 3,
    Runtime = 4,
    Io = 5,
    /// Unknown bundled scenario or column name.
    NotFound = 6,
    /// The simulation already ran all of its steps.
    Finished = 7,
    Panic = 8,
}

/// A parsed and validated scenario.
pub struct HsScenario {
    cfg: ScenarioConfig,
}

/// An initialized simulation.
pub struct HsSim {
    built: BuiltScenario,
    steps: u64,
    columns: Vec<(CString, hiersim::runtime::SignalKey)>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let mut s = msg.into();
    s.retain(|c| c != '\0');
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(s).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

struct Fail(HsStatus, String);

impl From<ScenarioError> for Fail {
    fn from(e: ScenarioError) -> Self {
        let status = match &e {
            ScenarioError::Config(_) | ScenarioError::Build(_) => HsStatus::InvalidScenario,
            ScenarioError::Runtime(_) => HsStatus::Runtime,
            ScenarioError::Io { .. } => HsStatus::Io,
            ScenarioError::Plot(_) => HsStatus::Io,
        };
        Fail(status, e.to_string())
    }
}

impl From<RuntimeError> for Fail {
    fn from(e: RuntimeError) -> Self {
        Fail(HsStatus::Runtime, e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> HsStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HsStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            HsStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail(HsStatus::NullArgument, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(HsStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

fn null(what: &str) -> Fail {
    Fail(HsStatus::NullArgument, format!("{what} is null"))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL. The pointer is
/// valid until the next hiersim call on the same thread.
#[no_mangle]
pub extern "C" fn hs_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Parses and validates scenario text. Relative data paths resolve against
/// `base_dir`; NULL means the current directory.
///
/// # Safety
/// `text` must be a NUL-terminated string, `base_dir` NULL or one, and `out`
/// a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn hs_scenario_from_text(
    text: *const c_char,
    base_dir: *const c_char,
    out: *mut *mut HsScenario,
) -> HsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let text = str_arg(text, "text")?;
        let base = if base_dir.is_null() {
            "."
        } else {
            str_arg(base_dir, "base_dir")?
        };
        let cfg = validate_text(text, Path::new(base), None)?;
        *out = Box::into_raw(Box::new(HsScenario { cfg }));
        Ok(())
    })
}

/// Loads one of the scenarios shipped with the library by name.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn hs_scenario_bundled(name: *const c_char, out: *mut *mut HsScenario) -> HsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let name = str_arg(name, "name")?;
        let b = bundled(name).ok_or_else(|| Fail(HsStatus::NotFound, format!("no bundled scenario '{name}'")))?;
        let cfg = validate_text(b.text, &bundled_dir(), None)?;
        *out = Box::into_raw(Box::new(HsScenario { cfg }));
        Ok(())
    })
}

/// Replaces the scenario seed.
///
/// # Safety
/// `sc` must come from this library and not be freed.
#[no_mangle]
pub unsafe extern "C" fn hs_scenario_set_seed(sc: *mut HsScenario, seed: u64) -> HsStatus {
    guard(|| {
        let sc = sc.as_mut().ok_or_else(|| null("scenario"))?;
        let base = sc.cfg.base_dir.clone();
        sc.cfg = validate_text(&sc.cfg.source, &base, Some(seed))?;
        Ok(())
    })
}

/// Number of steps the scenario runs.
///
/// # Safety
/// `sc` must be NULL or a live scenario.
#[no_mangle]
pub unsafe extern "C" fn hs_scenario_steps(sc: *const HsScenario) -> u64 {
    sc.as_ref().map_or(0, |s| s.cfg.simulation.steps)
}

/// Runs the whole scenario and writes its output files into `out_dir`.
/// `cluster_energy_kwh` may be NULL.
///
/// # Safety
/// `sc` must be a live scenario, `out_dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn hs_scenario_run(
    sc: *const HsScenario,
    out_dir: *const c_char,
    cluster_energy_kwh: *mut f64,
) -> HsStatus {
    guard(|| {
        let sc = sc.as_ref().ok_or_else(|| null("scenario"))?;
        let dir = str_arg(out_dir, "out_dir")?;
        let m = run_scenario(&sc.cfg, Path::new(dir))?;
        if !cluster_energy_kwh.is_null() {
            *cluster_energy_kwh = m.cluster_energy_kwh;
        }
        Ok(())
    })
}

/// # Safety
/// `sc` must be NULL or a scenario not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hs_scenario_free(sc: *mut HsScenario) {
    if !sc.is_null() {
        drop(Box::from_raw(sc));
    }
}

/// Builds and initializes a simulation. The scenario may be freed afterwards.
///
/// # Safety
/// `sc` must be a live scenario and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn hs_sim_new(sc: *const HsScenario, out: *mut *mut HsSim) -> HsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let sc = sc.as_ref().ok_or_else(|| null("scenario"))?;
        let mut built = build_environment(&sc.cfg)?;
        built.env.initialize()?;
        *out = Box::into_raw(Box::new(HsSim {
            built,
            steps: sc.cfg.simulation.steps,
            columns: Vec::new(),
        }));
        Ok(())
    })
}

/// Advances one step. Returns `HS_STATUS_FINISHED` once all steps ran.
///
/// # Safety
/// `sim` must be a live simulation.
#[no_mangle]
pub unsafe extern "C" fn hs_sim_step(sim: *mut HsSim) -> HsStatus {
    guard(|| {
        let sim = sim.as_mut().ok_or_else(|| null("sim"))?;
        if sim.built.env.clock().t >= sim.steps {
            return Err(Fail(HsStatus::Finished, "all steps done".into()));
        }
        sim.built.env.step()?;
        sim.columns.clear();
        Ok(())
    })
}

/// Steps completed so far.
///
/// # Safety
/// `sim` must be NULL or a live simulation.
#[no_mangle]
pub unsafe extern "C" fn hs_sim_timestep(sim: *const HsSim) -> u64 {
    sim.as_ref().map_or(0, |s| s.built.env.clock().t)
}

fn refresh_columns(sim: &mut HsSim) {
    if sim.columns.is_empty() {
        sim.columns = sim
            .built
            .env
            .latest()
            .iter()
            .filter_map(|(k, _)| CString::new(k.column_name()).ok().map(|c| (c, k.clone())))
            .collect();
    }
}

/// Number of values in the latest frame.
///
/// # Safety
/// `sim` must be NULL or a live simulation.
#[no_mangle]
pub unsafe extern "C" fn hs_sim_column_count(sim: *mut HsSim) -> usize {
    match sim.as_mut() {
        Some(s) => {
            refresh_columns(s);
            s.columns.len()
        }
        None => 0,
    }
}

/// Name of column `i` of the latest frame, in the same
/// `cluster.domain.system.component.variable.kind` form as the CSV output.
/// NULL when out of range. Valid until the next step or free.
///
/// # Safety
/// `sim` must be NULL or a live simulation.
#[no_mangle]
pub unsafe extern "C" fn hs_sim_column_name(sim: *mut HsSim, i: usize) -> *const c_char {
    match sim.as_mut() {
        Some(s) => {
            refresh_columns(s);
            s.columns.get(i).map_or(ptr::null(), |(c, _)| c.as_ptr())
        }
        None => ptr::null(),
    }
}

/// Reads one value of the latest frame by column name.
///
/// # Safety
/// `sim` must be a live simulation, `column` a NUL-terminated string and
/// `value` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn hs_sim_get(sim: *mut HsSim, column: *const c_char, value: *mut f64) -> HsStatus {
    guard(|| {
        let sim = sim.as_mut().ok_or_else(|| null("sim"))?;
        if value.is_null() {
            return Err(null("value"));
        }
        let name = str_arg(column, "column")?;
        refresh_columns(sim);
        let key = sim
            .columns
            .iter()
            .find(|(c, _)| c.to_bytes() == name.as_bytes())
            .map(|(_, k)| k)
            .ok_or_else(|| Fail(HsStatus::NotFound, format!("no column '{name}'")))?;
        *value = sim.built.env.latest().value(key).unwrap_or(f64::NAN);
        Ok(())
    })
}

/// # Safety
/// `sim` must be NULL or a simulation not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hs_sim_free(sim: *mut HsSim) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}
