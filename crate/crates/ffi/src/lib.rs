//! C interface to the iptree engine.
//!
//! Models and gambles are opaque handles created and freed through this
//! interface. Every fallible call returns an [`IptreeStatus`]; on failure
//! [`iptree_last_error`] describes the error for the calling thread. Panics
//! never cross the boundary: they are caught and reported as
//! `IPTREE_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use iptree::gambles::expr::{compile, parse_gamble};
use iptree::gambles::DEFAULT_TABLE_CAP;
use iptree::query::{self, RunOptions};
use iptree::{
    finitary_lower, finitary_upper, io, limit_lower, limit_upper, ApproxPolicy, ApproxResult, Error,
    FinitaryGamble, ImpreciseTree, LimitVariable, Situation,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IptreeStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// Malformed JSON or expression syntax.
    Parse = 3,
    InvalidInput = 4,
    ResourceLimit = 5,
    Io = 6,
    Panic = 7,
}

/// An imprecise probability tree.
pub struct IptreeModel {
    tree: ImpreciseTree,
}

/// A compiled finitary gamble, tied to the state space it was compiled for.
pub struct IptreeGamble {
    gamble: FinitaryGamble,
}

/// Result of a limit query. `value` may be `±INFINITY`; `converged_at` is
/// zero when the iterates did not stabilize.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct IptreeApprox {
    pub value: f64,
    pub converged: bool,
    pub converged_at: usize,
    /// Number of iterates computed.
    pub iterations: usize,
    /// Horizon of the last iterate.
    pub last_horizon: usize,
}

impl From<&ApproxResult> for IptreeApprox {
    fn from(r: &ApproxResult) -> Self {
        IptreeApprox {
            value: r.value.to_f64(),
            converged: r.converged,
            converged_at: r.converged_at.unwrap_or(0),
            iterations: r.iterates.len(),
            last_horizon: r.iterates.last().map_or(0, |&(m, _)| m),
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

struct Failure(IptreeStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::InvalidInput(_) => IptreeStatus::InvalidInput,
            Error::ResourceLimit { .. } => IptreeStatus::ResourceLimit,
            Error::Syntax { .. } | Error::Json { .. } => IptreeStatus::Parse,
            Error::Io { .. } => IptreeStatus::Io,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(IptreeStatus::NullPointer, format!("{what} is null"))
}

/// Runs `body`, translating errors and panics into a status code.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> IptreeStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => IptreeStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            set_error(format!("internal panic: {message}"));
            IptreeStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Failure(IptreeStatus::InvalidUtf8, format!("{what}: {e}")))
}

unsafe fn slice_arg<'a>(p: *const usize, len: usize, what: &str) -> Result<&'a [usize], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn situation_arg(model: &IptreeModel, states: *const usize, len: usize) -> Result<Situation, Failure> {
    let s = Situation::new(slice_arg(states, len, "situation")?.to_vec());
    s.validate(model.tree.space())?;
    Ok(s)
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn iptree_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Parses a model from its JSON text. On success `*out` owns a new handle
/// that must be released with [`iptree_model_free`].
///
/// # Safety
/// `json` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn iptree_model_from_json(json: *const c_char, out: *mut *mut IptreeModel) -> IptreeStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = str_arg(json, "json")?;
        let tree = io::model_from_str(text)?;
        *out = Box::into_raw(Box::new(IptreeModel { tree }));
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle from [`iptree_model_from_json`] that has
/// not been freed.
#[no_mangle]
pub unsafe extern "C" fn iptree_model_free(model: *mut IptreeModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of states, or zero for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn iptree_model_state_count(model: *const IptreeModel) -> usize {
    model.as_ref().map_or(0, |m| m.tree.k())
}

/// Compiles a gamble expression against the model's state labels.
///
/// # Safety
/// `model` must be a live handle, `expr` a nul-terminated string and `out`
/// a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn iptree_gamble_compile(
    model: *const IptreeModel,
    expr: *const c_char,
    out: *mut *mut IptreeGamble,
) -> IptreeStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let model = ref_arg(model, "model")?;
        let source = str_arg(expr, "expr")?;
        let parsed = parse_gamble(source, model.tree.space())?;
        let gamble = compile(&parsed, model.tree.k(), None, DEFAULT_TABLE_CAP)?;
        *out = Box::into_raw(Box::new(IptreeGamble { gamble }));
        Ok(())
    })
}

/// # Safety
/// `gamble` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn iptree_gamble_free(gamble: *mut IptreeGamble) {
    if !gamble.is_null() {
        drop(Box::from_raw(gamble));
    }
}

/// Number of states the gamble depends on, or zero for a null handle.
///
/// # Safety
/// `gamble` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn iptree_gamble_depth(gamble: *const IptreeGamble) -> usize {
    gamble.as_ref().map_or(0, |g| g.gamble.depth())
}

unsafe fn finitary(
    model: *const IptreeModel,
    gamble: *const IptreeGamble,
    situation: *const usize,
    len: usize,
    out: *mut f64,
    eval: fn(&ImpreciseTree, &FinitaryGamble, &Situation) -> iptree::Result<f64>,
) -> IptreeStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let model = ref_arg(model, "model")?;
        let gamble = ref_arg(gamble, "gamble")?;
        if gamble.gamble.k() != model.tree.k() {
            return Err(Failure(
                IptreeStatus::InvalidInput,
                "gamble was compiled for a different state space".into(),
            ));
        }
        let s = situation_arg(model, situation, len)?;
        *out = eval(&model.tree, &gamble.gamble, &s)?;
        Ok(())
    })
}

/// Conditional upper expectation of a gamble given the situation
/// `situation[0..len]` (state indices).
///
/// # Safety
/// Handles must be live; `situation` must point to `len` values (or be null
/// when `len` is zero); `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn iptree_upper(
    model: *const IptreeModel,
    gamble: *const IptreeGamble,
    situation: *const usize,
    len: usize,
    out: *mut f64,
) -> IptreeStatus {
    finitary(model, gamble, situation, len, out, finitary_upper)
}

/// Conditional lower expectation; see [`iptree_upper`].
///
/// # Safety
/// As for [`iptree_upper`].
#[no_mangle]
pub unsafe extern "C" fn iptree_lower(
    model: *const IptreeModel,
    gamble: *const IptreeGamble,
    situation: *const usize,
    len: usize,
    out: *mut f64,
) -> IptreeStatus {
    finitary(model, gamble, situation, len, out, finitary_lower)
}

#[allow(clippy::too_many_arguments)]
unsafe fn hitting(
    model: *const IptreeModel,
    targets: *const usize,
    n_targets: usize,
    situation: *const usize,
    len: usize,
    tol: f64,
    max_horizon: usize,
    upper: *mut IptreeApprox,
    lower: *mut IptreeApprox,
    make: fn(usize, &[usize]) -> iptree::Result<LimitVariable>,
) -> IptreeStatus {
    guard(|| {
        if upper.is_null() || lower.is_null() {
            return Err(null("output"));
        }
        let model = ref_arg(model, "model")?;
        let targets = slice_arg(targets, n_targets, "targets")?;
        let s = situation_arg(model, situation, len)?;
        let policy = ApproxPolicy {
            tol,
            max_horizon,
            ..ApproxPolicy::default()
        };
        policy.validate()?;
        let v = make(model.tree.k(), targets)?;
        *upper = IptreeApprox::from(&limit_upper(&model.tree, &v, &s, &policy)?);
        *lower = IptreeApprox::from(&limit_lower(&model.tree, &v, &s, &policy)?);
        Ok(())
    })
}

/// Upper and lower expected time to reach one of `targets`.
///
/// # Safety
/// `model` must be live; `targets` and `situation` must point to
/// `n_targets` and `len` values; `upper` and `lower` must be valid.
#[no_mangle]
pub unsafe extern "C" fn iptree_hitting_time(
    model: *const IptreeModel,
    targets: *const usize,
    n_targets: usize,
    situation: *const usize,
    len: usize,
    tol: f64,
    max_horizon: usize,
    upper: *mut IptreeApprox,
    lower: *mut IptreeApprox,
) -> IptreeStatus {
    hitting(
        model,
        targets,
        n_targets,
        situation,
        len,
        tol,
        max_horizon,
        upper,
        lower,
        LimitVariable::hitting_time,
    )
}

/// Upper and lower probability of ever reaching one of `targets`.
///
/// # Safety
/// As for [`iptree_hitting_time`].
#[no_mangle]
pub unsafe extern "C" fn iptree_hitting_probability(
    model: *const IptreeModel,
    targets: *const usize,
    n_targets: usize,
    situation: *const usize,
    len: usize,
    tol: f64,
    max_horizon: usize,
    upper: *mut IptreeApprox,
    lower: *mut IptreeApprox,
) -> IptreeStatus {
    hitting(
        model,
        targets,
        n_targets,
        situation,
        len,
        tol,
        max_horizon,
        upper,
        lower,
        LimitVariable::hitting_indicator,
    )
}

/// Runs a query file given as JSON text and returns the JSON report in
/// `*out`, to be released with [`iptree_string_free`]. `model` may be null
/// when the query file embeds its model. Query-level errors are reported
/// inside the report and still return `IPTREE_STATUS_OK`.
///
/// # Safety
/// `model` must be null or live; `query_json` must be a nul-terminated
/// string; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn iptree_eval_query_json(
    model: *const IptreeModel,
    query_json: *const c_char,
    out: *mut *mut c_char,
) -> IptreeStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = str_arg(query_json, "query_json")?;
        let tree = model.as_ref().map(|m| m.tree.clone());
        let (report, _) = query::eval_query_text(tree, text, &RunOptions::default())?;
        *out = CString::new(report.to_string()).expect("json has no nul").into_raw();
        Ok(())
    })
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must be null or a string from [`iptree_eval_query_json`] that has
/// not been freed.
#[no_mangle]
pub unsafe extern "C" fn iptree_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
