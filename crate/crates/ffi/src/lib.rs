//! C ABI for the eqlab equilibrium laboratory.
//!
//! Economies and solved equilibria cross the boundary as opaque handles.
//! Every fallible call returns an [`EqlabStatus`]; on failure the message is
//! available from [`eqlab_last_error`] on the same thread. Strings handed
//! out by the library must be released with [`eqlab_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use eqlab::analysis::aggregate_jacobian;
use eqlab::diversification::diversification_report;
use eqlab::scenarios::{generate, ScenarioFamily, ScenarioSpec};
use eqlab::stability::equilibrium_stability;
use eqlab::{solve_equilibrium, Economy, EquilibriumResult, LabError, SolveOptions};

/// Result codes shared by every entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EqlabStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// Bad input: malformed JSON, out-of-range parameters, constraint violations.
    Validation = 3,
    /// The numerics failed: no convergence, singular Jacobian, degenerate functional.
    Numerical = 4,
    /// A caller-provided buffer is shorter than required.
    BufferTooSmall = 5,
    /// Internal panic caught at the boundary.
    Panic = 6,
}

/// Opaque economy handle.
pub struct EqlabEconomy {
    inner: Economy,
}

/// Opaque handle to a solved equilibrium.
pub struct EqlabEquilibrium {
    inner: EquilibriumResult,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(msg));
}

fn fail(status: EqlabStatus, msg: impl Into<String>) -> EqlabStatus {
    set_error(msg);
    status
}

fn from_lab(err: LabError) -> EqlabStatus {
    let status = if err.is_validation() {
        EqlabStatus::Validation
    } else {
        EqlabStatus::Numerical
    };
    fail(status, err.to_string())
}

fn guard(f: impl FnOnce() -> EqlabStatus) -> EqlabStatus {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(EqlabStatus::Panic, msg)
        }
    }
}

unsafe fn read_str<'a>(s: *const c_char) -> Result<&'a str, EqlabStatus> {
    if s.is_null() {
        return Err(fail(EqlabStatus::NullPointer, "string argument is null"));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|e| fail(EqlabStatus::InvalidUtf8, e.to_string()))
}

unsafe fn write_string(text: String, out: *mut *mut c_char) -> EqlabStatus {
    match CString::new(text) {
        Ok(s) => {
            *out = s.into_raw();
            EqlabStatus::Ok
        }
        Err(e) => fail(EqlabStatus::Panic, e.to_string()),
    }
}

unsafe fn write_json<T: serde::Serialize>(value: &T, out: *mut *mut c_char) -> EqlabStatus {
    match serde_json::to_string(value) {
        Ok(text) => write_string(text, out),
        Err(e) => fail(EqlabStatus::Panic, e.to_string()),
    }
}

macro_rules! non_null {
    ($($p:ident),+) => {
        $(if $p.is_null() {
            return fail(EqlabStatus::NullPointer, concat!("`", stringify!($p), "` is null"));
        })+
    };
}

/// Message for the most recent failure on this thread, or null. The pointer
/// stays valid until the next eqlab call on the same thread.
#[no_mangle]
pub extern "C" fn eqlab_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn eqlab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. Null is a no-op.
///
/// # Safety
/// `s` must come from this library and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn eqlab_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Builds an economy from an economy spec JSON document.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn eqlab_economy_from_json(json: *const c_char, out: *mut *mut EqlabEconomy) -> EqlabStatus {
    guard(|| {
        non_null!(out);
        let text = match read_str(json) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match Economy::from_json(text) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(EqlabEconomy { inner }));
                EqlabStatus::Ok
            }
            Err(e) => from_lab(e),
        }
    })
}

/// Generates a scenario economy. `family_json` is either a bare family name
/// (`"dispersed"`) or a JSON object such as `{"family":"sparse","width":3,...}`.
///
/// # Safety
/// `family_json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn eqlab_scenario_generate(
    family_json: *const c_char,
    seed: u64,
    horizon: usize,
    beta: f64,
    agents: usize,
    out: *mut *mut EqlabEconomy,
) -> EqlabStatus {
    guard(|| {
        non_null!(out);
        let text = match read_str(family_json) {
            Ok(t) => t.trim(),
            Err(s) => return s,
        };
        let family = if text.starts_with('{') {
            serde_json::from_str::<ScenarioFamily>(text).map_err(LabError::from)
        } else {
            ScenarioFamily::by_name(text)
        };
        let economy = family.and_then(|f| generate(&ScenarioSpec::new(f, seed), horizon, beta, agents));
        match economy {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(EqlabEconomy { inner }));
                EqlabStatus::Ok
            }
            Err(e) => from_lab(e),
        }
    })
}

/// # Safety
/// `economy` must come from this library and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn eqlab_economy_free(economy: *mut EqlabEconomy) {
    if !economy.is_null() {
        drop(Box::from_raw(economy));
    }
}

/// Number of future dates `N`; 0 for a null handle.
///
/// # Safety
/// `economy` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn eqlab_economy_horizon(economy: *const EqlabEconomy) -> usize {
    economy.as_ref().map_or(0, |e| e.inner.horizon())
}

/// Number of agents; 0 for a null handle.
///
/// # Safety
/// `economy` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn eqlab_economy_agent_count(economy: *const EqlabEconomy) -> usize {
    economy.as_ref().map_or(0, |e| e.inner.agent_count())
}

/// Serializes the economy back to spec JSON.
///
/// # Safety
/// `economy` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn eqlab_economy_to_json(economy: *const EqlabEconomy, out: *mut *mut c_char) -> EqlabStatus {
    guard(|| {
        non_null!(economy, out);
        write_json(&(*economy).inner.to_spec(), out)
    })
}

/// Solves for an equilibrium. `tol <= 0` selects the default tolerance
/// `1e-10 * I`; `starts` is clamped to at least 1.
///
/// # Safety
/// `economy` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn eqlab_solve(
    economy: *const EqlabEconomy,
    tol: f64,
    starts: usize,
    seed: u64,
    out: *mut *mut EqlabEquilibrium,
) -> EqlabStatus {
    guard(|| {
        non_null!(economy, out);
        let opts = SolveOptions {
            tol: (tol > 0.0).then_some(tol),
            starts: starts.max(1),
            seed,
            ..Default::default()
        };
        match solve_equilibrium(&(*economy).inner, &opts) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(EqlabEquilibrium { inner }));
                EqlabStatus::Ok
            }
            Err(e) => from_lab(e),
        }
    })
}

/// # Safety
/// `eq` must come from this library and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn eqlab_equilibrium_free(eq: *mut EqlabEquilibrium) {
    if !eq.is_null() {
        drop(Box::from_raw(eq));
    }
}

/// Sup-norm excess-demand residual at the solution; NaN for a null handle.
///
/// # Safety
/// `eq` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn eqlab_equilibrium_residual(eq: *const EqlabEquilibrium) -> f64 {
    eq.as_ref().map_or(f64::NAN, |e| e.inner.residual_sup)
}

/// Copies the future prices `p_1..p_N` into `buf`, which must hold `N`
/// values.
///
/// # Safety
/// `eq` must be a live handle; `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn eqlab_equilibrium_prices(
    eq: *const EqlabEquilibrium,
    buf: *mut f64,
    len: usize,
) -> EqlabStatus {
    guard(|| {
        non_null!(eq, buf);
        let prices = &(*eq).inner.prices;
        if len < prices.len() {
            return fail(
                EqlabStatus::BufferTooSmall,
                format!("need {} values, got {len}", prices.len()),
            );
        }
        ptr::copy_nonoverlapping(prices.as_ptr(), buf, prices.len());
        EqlabStatus::Ok
    })
}

/// Full equilibrium record (prices, allocation, shadow values, diagnostics)
/// as JSON.
///
/// # Safety
/// `eq` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn eqlab_equilibrium_to_json(eq: *const EqlabEquilibrium, out: *mut *mut c_char) -> EqlabStatus {
    guard(|| {
        non_null!(eq, out);
        write_json(&(*eq).inner, out)
    })
}

/// Aggregate excess-demand Jacobian, row-major `N x N` with entry
/// `[m * N + n] = dz_(n+1) / dp_(m+1)`.
///
/// # Safety
/// Handles must be live and belong together; `buf` must point to `len`
/// writable doubles.
#[no_mangle]
pub unsafe extern "C" fn eqlab_jacobian(
    economy: *const EqlabEconomy,
    eq: *const EqlabEquilibrium,
    buf: *mut f64,
    len: usize,
) -> EqlabStatus {
    guard(|| {
        non_null!(economy, eq, buf);
        let jac = match aggregate_jacobian(&(*economy).inner, &(*eq).inner) {
            Ok(j) => j,
            Err(e) => return from_lab(e),
        };
        let n = jac.nrows();
        if len < n * n {
            return fail(EqlabStatus::BufferTooSmall, format!("need {} values, got {len}", n * n));
        }
        let out = std::slice::from_raw_parts_mut(buf, n * n);
        for m in 0..n {
            for k in 0..n {
                out[m * n + k] = jac[(m, k)];
            }
        }
        EqlabStatus::Ok
    })
}

/// Definiteness verdict at the equilibrium as JSON.
///
/// # Safety
/// Handles must be live and belong together; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn eqlab_stability_json(
    economy: *const EqlabEconomy,
    eq: *const EqlabEquilibrium,
    out: *mut *mut c_char,
) -> EqlabStatus {
    guard(|| {
        non_null!(economy, eq, out);
        match equilibrium_stability(&(*economy).inner, &(*eq).inner) {
            Ok(r) => write_json(&r, out),
            Err(e) => from_lab(e),
        }
    })
}

/// Marginal-share alignment report as JSON.
///
/// # Safety
/// Handles must be live and belong together; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn eqlab_diversify_json(
    economy: *const EqlabEconomy,
    eq: *const EqlabEquilibrium,
    out: *mut *mut c_char,
) -> EqlabStatus {
    guard(|| {
        non_null!(economy, eq, out);
        match diversification_report(&(*economy).inner, &(*eq).inner) {
            Ok(r) => write_json(&r, out),
            Err(e) => from_lab(e),
        }
    })
}
