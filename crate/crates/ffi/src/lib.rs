//! C ABI for the gsdag solver.
//!
//! Models and strategies are opaque heap handles owned by the caller and
//! released with their `_free` function. Every fallible call returns a
//! [`GsdagStatus`]; on failure a message is available from
//! [`gsdag_last_error`] until the next call on the same thread. Strings
//! handed out by the library are released with [`gsdag_string_free`].

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use libc::c_char;

use gsdag::bundle::{Meta, StrategyBundle};
use gsdag::{oracle, solve_uid, validate, Error, SolveOptions, Strategy, Uid};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GsdagStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Syntax = 3,
    InvalidModel = 4,
    SolveFailed = 5,
    StrategyMismatch = 6,
    TooLarge = 7,
    Internal = 8,
}

/// A parsed model. It may still violate structural rules; see
/// [`gsdag_model_violation_count`].
pub struct GsdagModel {
    uid: Uid,
}

/// A solved strategy together with the model it belongs to.
pub struct GsdagStrategy {
    uid: Uid,
    strategy: Strategy,
    trim_relevance: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> GsdagStatus {
    match e {
        Error::Syntax { .. } | Error::Json(_) => GsdagStatus::Syntax,
        Error::DanglingReference { .. } | Error::DuplicateId(_) | Error::TableLength { .. } | Error::Invalid(_) => {
            GsdagStatus::InvalidModel
        }
        Error::StrategyMismatch(_) => GsdagStatus::StrategyMismatch,
        Error::ScaleGuard(_) => GsdagStatus::TooLarge,
        Error::NotInDomain(_)
        | Error::InconsistentPotential
        | Error::DecisionInProbabilityScope(_)
        | Error::BranchProbabilityMismatch { .. }
        | Error::InvalidQuery(_) => GsdagStatus::SolveFailed,
        Error::Internal(_) | Error::Io(_) => GsdagStatus::Internal,
    }
}

/// Run `f`, turning errors and panics into a status plus last-error text.
fn guard(f: impl FnOnce() -> Result<(), (GsdagStatus, String)>) -> GsdagStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GsdagStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside gsdag".into());
            GsdagStatus::Internal
        }
    }
}

fn fail(e: Error) -> (GsdagStatus, String) {
    (status_of(&e), e.to_string())
}

fn null() -> (GsdagStatus, String) {
    (GsdagStatus::NullArgument, "null argument".into())
}

unsafe fn read_str<'a>(s: *const c_char) -> Result<&'a str, (GsdagStatus, String)> {
    if s.is_null() {
        return Err(null());
    }
    CStr::from_ptr(s).to_str().map_err(|e| (GsdagStatus::InvalidUtf8, e.to_string()))
}

unsafe fn deref<'a, T>(p: *const T) -> Result<&'a T, (GsdagStatus, String)> {
    p.as_ref().ok_or_else(null)
}

unsafe fn write<T>(out: *mut T, v: T) -> Result<(), (GsdagStatus, String)> {
    if out.is_null() {
        return Err(null());
    }
    out.write(v);
    Ok(())
}

fn validated(uid: &Uid) -> Result<(), (GsdagStatus, String)> {
    let v = validate(uid);
    if v.is_empty() {
        Ok(())
    } else {
        Err(fail(Error::Invalid(v)))
    }
}

/// The message of the last failed call on this thread, or NULL. The
/// pointer stays valid until the next gsdag call on the same thread.
#[no_mangle]
pub extern "C" fn gsdag_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Parse a model document.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gsdag_model_parse(json: *const c_char, out: *mut *mut GsdagModel) -> GsdagStatus {
    guard(|| {
        let text = read_str(json)?;
        let doc = gsdag::model::parse_document(text).map_err(fail)?;
        let uid = Uid::from_document(doc).map_err(fail)?;
        write(out, Box::into_raw(Box::new(GsdagModel { uid })))
    })
}

/// # Safety
/// `model` must come from [`gsdag_model_parse`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn gsdag_model_free(model: *mut GsdagModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of structural violations; zero means the model can be solved.
///
/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gsdag_model_violation_count(model: *const GsdagModel, out: *mut usize) -> GsdagStatus {
    guard(|| write(out, validate(&deref(model)?.uid).len()))
}

/// Exhaustive maximum expected utility.
///
/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gsdag_model_brute_meu(model: *const GsdagModel, out: *mut f64) -> GsdagStatus {
    guard(|| {
        let uid = &deref(model)?.uid;
        validated(uid)?;
        write(out, oracle::brute_meu(uid).map_err(fail)?)
    })
}

/// Solve a model.
///
/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gsdag_solve(model: *const GsdagModel, trim_relevance: bool, out: *mut *mut GsdagStrategy) -> GsdagStatus {
    guard(|| {
        let uid = &deref(model)?.uid;
        validated(uid)?;
        let strategy = solve_uid(uid, SolveOptions { trim_relevance }).map_err(fail)?;
        let handle = GsdagStrategy { uid: uid.clone(), strategy, trim_relevance };
        write(out, Box::into_raw(Box::new(handle)))
    })
}

/// Load a strategy from a bundle document.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gsdag_strategy_from_bundle(json: *const c_char, out: *mut *mut GsdagStrategy) -> GsdagStatus {
    guard(|| {
        let bundle = StrategyBundle::from_json(read_str(json)?).map_err(fail)?;
        let trim_relevance = bundle.meta.flags.get("trim_relevance").copied().unwrap_or(false);
        let (uid, strategy) = bundle.to_strategy().map_err(fail)?;
        write(out, Box::into_raw(Box::new(GsdagStrategy { uid, strategy, trim_relevance })))
    })
}

/// # Safety
/// `strategy` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn gsdag_strategy_free(strategy: *mut GsdagStrategy) {
    if !strategy.is_null() {
        drop(Box::from_raw(strategy));
    }
}

/// The MEU reported by the solver (or stored in the bundle).
///
/// # Safety
/// `strategy` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gsdag_strategy_meu(strategy: *const GsdagStrategy, out: *mut f64) -> GsdagStatus {
    guard(|| write(out, deref(strategy)?.strategy.meu))
}

/// Exact expected utility of the strategy.
///
/// # Safety
/// `strategy` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gsdag_strategy_eu(strategy: *const GsdagStrategy, out: *mut f64) -> GsdagStatus {
    guard(|| {
        let s = deref(strategy)?;
        write(out, oracle::strategy_eu(&s.uid, &s.strategy).map_err(fail)?)
    })
}

/// Monte Carlo estimate of the strategy's expected utility.
///
/// # Safety
/// `strategy` must be a live handle; `mean` and `std_err` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn gsdag_strategy_simulate(
    strategy: *const GsdagStrategy,
    n: u64,
    seed: u64,
    mean: *mut f64,
    std_err: *mut f64,
) -> GsdagStatus {
    guard(|| {
        let s = deref(strategy)?;
        if n == 0 || mean.is_null() || std_err.is_null() {
            return Err((GsdagStatus::NullArgument, "n must be positive and outputs non-null".into()));
        }
        let (m, e) = oracle::simulate(&s.uid, &s.strategy, n as usize, seed).map_err(fail)?;
        write(mean, m)?;
        write(std_err, e)
    })
}

/// Serialise the strategy as a bundle document. Free the result with
/// [`gsdag_string_free`].
///
/// # Safety
/// `strategy` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gsdag_strategy_bundle_json(strategy: *const GsdagStrategy, out: *mut *mut c_char) -> GsdagStatus {
    guard(|| {
        let s = deref(strategy)?;
        let flags = [("trim_relevance".to_string(), s.trim_relevance)].into();
        let json = StrategyBundle::from_strategy(&s.uid, &s.strategy, Meta::now(flags)).to_json();
        let c = CString::new(json).map_err(|e| (GsdagStatus::Internal, e.to_string()))?;
        write(out, c.into_raw())
    })
}

/// # Safety
/// `s` must be a string returned by this library, or NULL.
#[no_mangle]
pub unsafe extern "C" fn gsdag_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
