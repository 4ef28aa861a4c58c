//! C ABI over `moral-mech`.
//!
//! Objects are opaque handles created by `mm_*_new`/`mm_*_from_json`-style
//! functions and released with the matching `mm_*_free`. Every fallible
//! call returns an [`MmStatus`]; on failure `mm_last_error()` describes the
//! problem for the calling thread. Rationals cross the boundary as strings
//! such as `"3/4"`. Strings returned through `char **` out-parameters are
//! owned by the caller and released with `mm_string_free`. Player indices
//! are 1-based in JSON, as in the library's file formats.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use moral_mech::distributions::{product_joint, DiscreteDistribution, JointDistribution};
use moral_mech::io::{parse_json, GridFile};
use moral_mech::mechanism::{check_alpha_moral, expected_revenue, is_truthful, ProfitMaximizer};
use moral_mech::myerson::{lift, myerson_grid};
use moral_mech::search::{brute_force_optimal, Mode, SearchOptions, SearchSpace};
use moral_mech::{Error, Rational};

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// Malformed JSON or rational text.
    Parse = 3,
    /// Well-formed input that the operation does not accept.
    InvalidInput = 4,
    /// A mathematical precondition does not hold (not regular, not
    /// truthful, hypothesis fails, ...).
    Precondition = 5,
    /// The search space exceeds the work cap.
    TooLarge = 6,
    /// An internal invariant failed.
    Internal = 7,
    Panic = 8,
}

/// A discrete value distribution on an evenly spaced grid.
pub struct MmDistribution(DiscreteDistribution);

/// A joint distribution over value profiles.
pub struct MmJoint(JointDistribution);

/// A payment grid run as a profit maximizer.
pub struct MmMechanism(ProfitMaximizer);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(e: &Error) -> MmStatus {
    match e {
        Error::Parse { .. } => MmStatus::Parse,
        Error::SpaceTooLarge { .. } | Error::TooManyAtoms { .. } => MmStatus::TooLarge,
        Error::Defect(_) | Error::NonTermination { .. } => MmStatus::Internal,
        _ if e.exit_code() == 2 => MmStatus::InvalidInput,
        _ => MmStatus::Precondition,
    }
}

enum Failure {
    Status(MmStatus, String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

type Outcome = std::result::Result<(), Failure>;

fn guard(f: impl FnOnce() -> Outcome) -> MmStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MmStatus::Ok,
        Ok(Err(Failure::Status(s, msg))) => {
            set_error(msg);
            s
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(format!("{}: {e}", e.reason()));
            status_of(&e)
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            MmStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure::Status(MmStatus::NullPointer, format!("{what} is null"))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> std::result::Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::Status(MmStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn rational(p: *const c_char, what: &str) -> std::result::Result<Rational, Failure> {
    let s = text(p, what)?;
    s.parse().map_err(|e| {
        Failure::Lib(Error::Parse {
            path: what.into(),
            message: format!("{e}"),
        })
    })
}

unsafe fn get<'a, T>(p: *const T, what: &str) -> std::result::Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut *mut T, value: T, what: &str) -> Outcome {
    if out.is_null() {
        return Err(null(what));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn put_string(out: *mut *mut c_char, s: String, what: &str) -> Outcome {
    if out.is_null() {
        return Err(null(what));
    }
    *out = CString::new(s).expect("no interior nul").into_raw();
    Ok(())
}

unsafe fn distributions(
    ds: *const *const MmDistribution,
    n: usize,
) -> std::result::Result<Vec<DiscreteDistribution>, Failure> {
    if n == 0 {
        return Ok(vec![]);
    }
    if ds.is_null() {
        return Err(null("distribution array"));
    }
    std::slice::from_raw_parts(ds, n)
        .iter()
        .map(|&d| get(d, "distribution").map(|d| d.0.clone()))
        .collect()
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn mm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn mm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn mm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Uniform distribution on `points` values `0, 1/(points-1), ..., 1`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mm_distribution_uniform(points: usize, out: *mut *mut MmDistribution) -> MmStatus {
    guard(|| put(out, MmDistribution(DiscreteDistribution::uniform(points)?), "out"))
}

/// Parses `{"eps": ..., "mass": [...]}`.
///
/// # Safety
/// `json` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mm_distribution_from_json(json: *const c_char, out: *mut *mut MmDistribution) -> MmStatus {
    guard(|| {
        let d: DiscreteDistribution = parse_json(text(json, "json")?, "distribution")?;
        put(out, MmDistribution(d), "out")
    })
}

/// # Safety
/// `d` must come from this library and not be freed twice. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn mm_distribution_free(d: *mut MmDistribution) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// Parses `{"n": ..., "atoms": [{"profile": [...], "weight": ...}]}`.
///
/// # Safety
/// `json` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mm_joint_from_json(json: *const c_char, out: *mut *mut MmJoint) -> MmStatus {
    guard(|| {
        let j: JointDistribution = parse_json(text(json, "json")?, "joint")?;
        put(out, MmJoint(j), "out")
    })
}

/// Independent joint of `n` distributions.
///
/// # Safety
/// `ds` must point to `n` valid distribution handles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn mm_joint_product(
    ds: *const *const MmDistribution,
    n: usize,
    out: *mut *mut MmJoint,
) -> MmStatus {
    guard(|| put(out, MmJoint(product_joint(&distributions(ds, n)?)?), "out"))
}

/// # Safety
/// `j` must come from this library and not be freed twice. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn mm_joint_free(j: *mut MmJoint) {
    if !j.is_null() {
        drop(Box::from_raw(j));
    }
}

/// Parses a payment grid file.
///
/// # Safety
/// `json` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mm_mechanism_from_json(json: *const c_char, out: *mut *mut MmMechanism) -> MmStatus {
    guard(|| {
        let f: GridFile = parse_json(text(json, "json")?, "grid")?;
        put(out, MmMechanism(f.to_mechanism()?), "out")
    })
}

/// Serializes a mechanism as a payment grid file.
///
/// # Safety
/// `m` must be a valid handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mm_mechanism_to_json(m: *const MmMechanism, out: *mut *mut c_char) -> MmStatus {
    guard(|| {
        let m = get(m, "mechanism")?;
        let s = serde_json::to_string(&GridFile::from_mechanism(&m.0)).expect("serializable");
        put_string(out, s, "out")
    })
}

/// # Safety
/// `m` must come from this library and not be freed twice. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn mm_mechanism_free(m: *mut MmMechanism) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Whether `m` is `alpha`-moral. With `report_json` non-null, the full
/// report (1-based deviators) is returned there.
///
/// # Safety
/// Pointers must be valid; `alpha` nul-terminated.
#[no_mangle]
pub unsafe extern "C" fn mm_check_alpha_moral(
    m: *const MmMechanism,
    alpha: *const c_char,
    moral: *mut bool,
    report_json: *mut *mut c_char,
) -> MmStatus {
    guard(|| {
        let m = get(m, "mechanism")?;
        let a = rational(alpha, "alpha")?;
        if moral.is_null() {
            return Err(null("moral"));
        }
        let r = check_alpha_moral(&m.0, &a);
        *moral = r.moral;
        if !report_json.is_null() {
            let doc = moral_mech::io::MoralityReportFile::from(&r);
            put_string(report_json, serde_json::to_string(&doc).expect("serializable"), "report_json")?;
        }
        Ok(())
    })
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn mm_is_truthful(m: *const MmMechanism, truthful: *mut bool) -> MmStatus {
    guard(|| {
        let m = get(m, "mechanism")?;
        if truthful.is_null() {
            return Err(null("truthful"));
        }
        *truthful = is_truthful(&m.0).holds();
        Ok(())
    })
}

/// Expected revenue as a rational string.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn mm_expected_revenue(
    m: *const MmMechanism,
    j: *const MmJoint,
    out: *mut *mut c_char,
) -> MmStatus {
    guard(|| {
        let r = expected_revenue(&get(m, "mechanism")?.0, &get(j, "joint")?.0)?;
        put_string(out, r.to_string(), "out")
    })
}

/// Revenue-maximizing grid over the joint's supports. `truthful` selects
/// the truthful space; otherwise the `alpha`-moral space is searched.
/// `cap` bounds the search work (0 for the default). The optimal revenue
/// goes to `revenue` when it is non-null.
///
/// # Safety
/// Pointers must be valid; `alpha` nul-terminated.
#[no_mangle]
pub unsafe extern "C" fn mm_search_optimal(
    j: *const MmJoint,
    truthful: bool,
    alpha: *const c_char,
    cap: u64,
    out: *mut *mut MmMechanism,
    revenue: *mut *mut c_char,
) -> MmStatus {
    guard(|| {
        let j = &get(j, "joint")?.0;
        let (mode, a) = if truthful {
            (Mode::Truthful, Rational::zero())
        } else {
            (Mode::Moral, rational(alpha, "alpha")?)
        };
        let space = SearchSpace::new(j.supports(), mode, a)?;
        let mut opts = SearchOptions::default();
        if cap != 0 {
            opts.cap = cap as u128;
        }
        let r = brute_force_optimal(&space, j, &opts)?;
        if !revenue.is_null() {
            put_string(revenue, r.best_revenue.to_string(), "revenue")?;
        }
        put(out, MmMechanism(ProfitMaximizer::new(r.best_grid, r.alpha)), "out")
    })
}

/// Closed-form optimal truthful grid for `n` independent regular players.
///
/// # Safety
/// `ds` must point to `n` valid handles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn mm_myerson_grid(
    ds: *const *const MmDistribution,
    n: usize,
    out: *mut *mut MmMechanism,
) -> MmStatus {
    guard(|| put(out, MmMechanism(myerson_grid(&distributions(ds, n)?)?.mechanism), "out"))
}

/// Lifts a 1-moral grid over iid values from `d` to a truthful grid. The
/// step trace is returned as JSON when `trace_json` is non-null.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn mm_lift(
    m: *const MmMechanism,
    d: *const MmDistribution,
    out: *mut *mut MmMechanism,
    trace_json: *mut *mut c_char,
) -> MmStatus {
    guard(|| {
        let (lifted, trace) = lift(&get(m, "mechanism")?.0, &get(d, "distribution")?.0)?;
        if !trace_json.is_null() {
            put_string(trace_json, serde_json::to_string(&trace).expect("serializable"), "trace_json")?;
        }
        put(out, MmMechanism(lifted), "out")
    })
}
