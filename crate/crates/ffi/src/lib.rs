//! C ABI over `hslab`.
//!
//! Scenarios and trajectories are opaque handles created by `*_load` /
//! `hslab_simulate` and released with the matching `*_free`. Every fallible
//! call returns an [`HslabStatus`]; on failure the message is kept per
//! thread and can be read with [`hslab_last_error_message`].
//!
//! # Safety
//!
//! Pointers passed in must be null or valid for the access described on
//! each function. Handles are not thread-safe; do not share one between
//! threads without external locking.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use hslab::pressure::complementarity_scalar_bound;
use hslab::scenario::{load_scenario, Scenario};
use hslab::solver::{run_with, Trajectory};
use hslab::Error;

/// Result codes. `HSLAB_STATUS_OK` is zero; everything else is a failure.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HslabStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Validation = 4,
    Numerical = 5,
    Io = 6,
    OutOfRange = 7,
    Panic = 8,
}

/// Opaque scenario handle.
pub struct HslabScenario {
    inner: Scenario,
}

/// Opaque handle to a finished run.
pub struct HslabTrajectory {
    inner: Trajectory,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(e: &Error) -> HslabStatus {
    match e {
        Error::Parse { .. } | Error::Json(_) => HslabStatus::Parse,
        Error::Validation(_) | Error::InvalidConfig(_) | Error::InvalidGrid(_) => HslabStatus::Validation,
        Error::Io(_) => HslabStatus::Io,
        _ => HslabStatus::Numerical,
    }
}

fn fail(status: HslabStatus, msg: impl Into<String>) -> HslabStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> HslabStatus) -> HslabStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(HslabStatus::Panic, "internal panic"),
    }
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length in bytes excluding
/// the terminator, or 0 when there is none.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes of writes.
#[no_mangle]
pub unsafe extern "C" fn hslab_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            // SAFETY: caller guarantees `len` writable bytes at `buf`.
            unsafe {
                ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
                *buf.add(n) = 0;
            }
        }
        bytes.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hslab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Loads a builtin scenario by name or a scenario file by path.
///
/// # Safety
/// `name` must be a valid NUL-terminated string; `out` must be valid for a
/// pointer write.
#[no_mangle]
pub unsafe extern "C" fn hslab_scenario_load(name: *const c_char, out: *mut *mut HslabScenario) -> HslabStatus {
    guard(|| {
        if name.is_null() || out.is_null() {
            return fail(HslabStatus::NullPointer, "null argument to hslab_scenario_load");
        }
        // SAFETY: checked non-null; caller guarantees NUL termination.
        let name = match unsafe { CStr::from_ptr(name) }.to_str() {
            Ok(s) => s,
            Err(_) => return fail(HslabStatus::InvalidArgument, "scenario name is not UTF-8"),
        };
        match load_scenario(name) {
            Ok(s) => {
                // SAFETY: checked non-null.
                unsafe { *out = Box::into_raw(Box::new(HslabScenario { inner: s })) };
                HslabStatus::Ok
            }
            Err(e) => fail(status_of(&e), e.to_string()),
        }
    })
}

/// Releases a scenario. Null is ignored.
///
/// # Safety
/// `s` must be null or a handle from [`hslab_scenario_load`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hslab_scenario_free(s: *mut HslabScenario) {
    if !s.is_null() {
        // SAFETY: handle came from Box::into_raw.
        drop(unsafe { Box::from_raw(s) });
    }
}

/// Parameters that may be overridden on a loaded scenario.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HslabParam {
    K = 0,
    TEnd = 1,
    Cells = 2,
    Outputs = 3,
}

/// Sets a scenario parameter and revalidates; on failure the scenario is
/// left unchanged.
///
/// # Safety
/// `s` must be a live scenario handle.
#[no_mangle]
pub unsafe extern "C" fn hslab_scenario_set(s: *mut HslabScenario, param: HslabParam, value: f64) -> HslabStatus {
    guard(|| {
        // SAFETY: caller guarantees a live handle or null.
        let Some(s) = (unsafe { s.as_mut() }) else { return fail(HslabStatus::NullPointer, "null scenario") };
        let mut next = s.inner.clone();
        let count = |v: f64| if v >= 1.0 && v.fract() == 0.0 && v < 1e9 { Some(v as usize) } else { None };
        match param {
            HslabParam::K => next.solver.k = value,
            HslabParam::TEnd => next.solver.t_end = value,
            HslabParam::Cells | HslabParam::Outputs => {
                let Some(n) = count(value) else { return fail(HslabStatus::InvalidArgument, format!("{value} is not a positive integer")) };
                if param == HslabParam::Cells {
                    next.grid.cells = n;
                } else {
                    next.solver.outputs = n;
                }
            }
        }
        match next.validate() {
            Ok(_) => {
                s.inner = next;
                HslabStatus::Ok
            }
            Err(e) => fail(status_of(&e), e.to_string()),
        }
    })
}

/// Number of grid cells of the scenario, or 0 for a null handle.
///
/// # Safety
/// `s` must be null or a live scenario handle.
#[no_mangle]
pub unsafe extern "C" fn hslab_scenario_cells(s: *const HslabScenario) -> usize {
    // SAFETY: caller guarantees a live handle or null.
    unsafe { s.as_ref() }.map_or(0, |s| s.inner.grid.cells)
}

/// Runs the scenario with its current solver settings.
///
/// # Safety
/// `s` must be a live scenario handle; `out` must be valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn hslab_simulate(s: *const HslabScenario, out: *mut *mut HslabTrajectory) -> HslabStatus {
    guard(|| {
        // SAFETY: caller guarantees a live handle or null.
        let Some(s) = (unsafe { s.as_ref() }) else { return fail(HslabStatus::NullPointer, "null scenario") };
        if out.is_null() {
            return fail(HslabStatus::NullPointer, "null output pointer");
        }
        let run = || -> hslab::Result<Trajectory> {
            let provider = s.inner.provider()?;
            run_with(&provider, &s.inner.initial_density()?, &s.inner.solver_config())
        };
        match run() {
            Ok(t) => {
                // SAFETY: checked non-null.
                unsafe { *out = Box::into_raw(Box::new(HslabTrajectory { inner: t })) };
                HslabStatus::Ok
            }
            Err(e) => fail(status_of(&e), e.to_string()),
        }
    })
}

/// Releases a trajectory. Null is ignored.
///
/// # Safety
/// `t` must be null or a handle from [`hslab_simulate`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hslab_trajectory_free(t: *mut HslabTrajectory) {
    if !t.is_null() {
        // SAFETY: handle came from Box::into_raw.
        drop(unsafe { Box::from_raw(t) });
    }
}

/// Number of stored snapshots, or 0 for a null handle.
///
/// # Safety
/// `t` must be null or a live trajectory handle.
#[no_mangle]
pub unsafe extern "C" fn hslab_trajectory_len(t: *const HslabTrajectory) -> usize {
    // SAFETY: caller guarantees a live handle or null.
    unsafe { t.as_ref() }.map_or(0, |t| t.inner.snapshots.len())
}

/// Fields that can be copied out of a snapshot.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HslabField {
    Density = 0,
    Normalized = 1,
    Pressure = 2,
}

/// Copies one field of snapshot `index` into `buf`, which must hold exactly
/// the number of grid cells; also writes the snapshot time to `time` when
/// non-null.
///
/// # Safety
/// `t` must be a live trajectory handle, `buf` valid for `len` `double`
/// writes and `time` null or valid for one write.
#[no_mangle]
pub unsafe extern "C" fn hslab_trajectory_field(t: *const HslabTrajectory, index: usize, field: HslabField, buf: *mut f64, len: usize, time: *mut f64) -> HslabStatus {
    guard(|| {
        // SAFETY: caller guarantees a live handle or null.
        let Some(t) = (unsafe { t.as_ref() }) else { return fail(HslabStatus::NullPointer, "null trajectory") };
        if buf.is_null() {
            return fail(HslabStatus::NullPointer, "null buffer");
        }
        let Some(s) = t.inner.snapshots.get(index) else {
            return fail(HslabStatus::OutOfRange, format!("snapshot {index} of {}", t.inner.snapshots.len()));
        };
        let values = match field {
            HslabField::Density => &s.rho.values,
            HslabField::Normalized => &s.v.values,
            HslabField::Pressure => &s.p.values,
        };
        if len != values.len() {
            return fail(HslabStatus::InvalidArgument, format!("buffer holds {len} values, grid has {}", values.len()));
        }
        // SAFETY: caller guarantees `len` writable doubles; length checked above.
        unsafe { ptr::copy_nonoverlapping(values.as_ptr(), buf, len) };
        if !time.is_null() {
            // SAFETY: checked non-null.
            unsafe { *time = s.t };
        }
        HslabStatus::Ok
    })
}

/// Mass-balance defect `|M(T) - M(0) - int f rho| - clamped` of the run.
///
/// # Safety
/// `t` must be a live trajectory handle and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn hslab_trajectory_mass_defect(t: *const HslabTrajectory, out: *mut f64) -> HslabStatus {
    guard(|| {
        // SAFETY: caller guarantees a live handle or null.
        let Some(t) = (unsafe { t.as_ref() }) else { return fail(HslabStatus::NullPointer, "null trajectory") };
        if out.is_null() {
            return fail(HslabStatus::NullPointer, "null output pointer");
        }
        // SAFETY: checked non-null.
        unsafe { *out = t.inner.ledger.balance_defect() };
        HslabStatus::Ok
    })
}

/// Scalar bound `((k-1)/k)^(k-1) / (k-1)` on `p (1 - v)`; NaN for `k <= 1`.
#[no_mangle]
pub extern "C" fn hslab_complementarity_bound(k: f64) -> f64 {
    if k > 1.0 {
        complementarity_scalar_bound(k)
    } else {
        f64::NAN
    }
}
