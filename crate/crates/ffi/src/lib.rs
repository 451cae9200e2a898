//! C ABI for `minmetric`.
//!
//! Every fallible function returns an `int32_t` status: `MM_OK` on success,
//! otherwise a library error code (10 and above) or one of the `MM_ERR_*`
//! codes below. The message of the last failure on the calling thread is
//! available from `mm_last_error_message`. Strings returned by this library
//! must be released with `mm_string_free`, domains with `mm_domain_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use minmetric::bounds::{best_lower, Toolbox};
use minmetric::classify::{classify_general, Status};
use minmetric::distance::{chain_distance_upper, distance_lower, ChainConfig};
use minmetric::domain::DomainSpec;
use minmetric::extremal::{maximize_g, SolverConfig};
use minmetric::geometry::Point;
use minmetric::models::bck_metric;
use minmetric::Error;

pub const MM_OK: i32 = 0;
pub const MM_ERR_NULL_POINTER: i32 = 1;
pub const MM_ERR_UTF8: i32 = 2;
pub const MM_ERR_PANIC: i32 = 3;
pub const MM_ERR_ZERO_DIRECTION: i32 = 10;
pub const MM_ERR_DIMENSION_MISMATCH: i32 = 11;
pub const MM_ERR_INVALID_INPUT: i32 = 12;
pub const MM_ERR_POINT_OUTSIDE: i32 = 20;
pub const MM_ERR_OUTSIDE_BOX: i32 = 21;
pub const MM_ERR_OUTSIDE_DISC: i32 = 22;
pub const MM_ERR_AT_PUNCTURE: i32 = 23;
pub const MM_ERR_OUTSIDE_BALL: i32 = 24;
pub const MM_ERR_SYNTAX: i32 = 30;
pub const MM_ERR_UNKNOWN_VARIABLE: i32 = 31;
pub const MM_ERR_DOMAIN: i32 = 32;
pub const MM_ERR_NON_FINITE: i32 = 33;
pub const MM_ERR_INFEASIBLE: i32 = 40;
pub const MM_ERR_NO_CONVERGENCE: i32 = 41;
pub const MM_ERR_CANDIDATE_INVALID: i32 = 50;
pub const MM_ERR_HYPOTHESIS_FAILED: i32 = 51;
pub const MM_ERR_RANK_DEFICIENT: i32 = 52;
pub const MM_ERR_NOT_CONTAINED: i32 = 53;
pub const MM_ERR_CHAIN_FAILED: i32 = 60;
pub const MM_ERR_EMPTY_DOMAIN: i32 = 61;
pub const MM_ERR_CONSTRUCTION_FAILED: i32 = 62;
pub const MM_ERR_IO: i32 = 70;

/// Opaque domain handle.
pub struct MmDomain {
    inner: DomainSpec,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct MmSolverConfig {
    pub degree: usize,
    pub multistarts: usize,
    pub seed: u64,
    pub margin: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MmStatus {
    CompleteHyperbolic = 0,
    Hyperbolic = 1,
    NonHyperbolic = 2,
    Unknown = 3,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

enum Fail {
    Lib(Error),
    Null,
    Utf8,
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> i32 {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MM_OK,
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            e.code()
        }
        Ok(Err(Fail::Null)) => {
            set_error("null pointer argument".into());
            MM_ERR_NULL_POINTER
        }
        Ok(Err(Fail::Utf8)) => {
            set_error("string is not valid UTF-8".into());
            MM_ERR_UTF8
        }
        Err(_) => {
            set_error("internal panic".into());
            MM_ERR_PANIC
        }
    }
}

unsafe fn domain<'a>(d: *const MmDomain) -> Result<&'a DomainSpec, Fail> {
    d.as_ref().map(|d| &d.inner).ok_or(Fail::Null)
}

unsafe fn vector(p: *const f64, n: usize) -> Result<Point, Fail> {
    if p.is_null() {
        return Err(Fail::Null);
    }
    Ok(Point::from_column_slice(std::slice::from_raw_parts(p, n)))
}

unsafe fn write<T>(out: *mut T, v: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail::Null);
    }
    out.write(v);
    Ok(())
}

fn string_out(s: String) -> *mut c_char {
    CString::new(s).map(CString::into_raw).unwrap_or(ptr::null_mut())
}

/// Message of the last failure on this thread, or NULL. Free with `mm_string_free`.
#[no_mangle]
pub extern "C" fn mm_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map(|c| c.clone().into_raw()).unwrap_or(ptr::null_mut()))
}

/// # Safety
/// `s` must be NULL or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn mm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn mm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[no_mangle]
pub extern "C" fn mm_solver_config_default() -> MmSolverConfig {
    let d = SolverConfig::default();
    MmSolverConfig { degree: d.degree, multistarts: d.multistarts, seed: d.seed, margin: d.margin }
}

/// Parses a JSON domain description.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mm_domain_from_json(json: *const c_char, out: *mut *mut MmDomain) -> i32 {
    guard(|| {
        if json.is_null() {
            return Err(Fail::Null);
        }
        let text = CStr::from_ptr(json).to_str().map_err(|_| Fail::Utf8)?;
        let inner = DomainSpec::from_json(text)?;
        write(out, Box::into_raw(Box::new(MmDomain { inner })))
    })
}

/// # Safety
/// `d` must be NULL or a handle from `mm_domain_from_json`, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mm_domain_free(d: *mut MmDomain) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// Ambient dimension, or 0 for NULL.
///
/// # Safety
/// `d` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mm_domain_dim(d: *const MmDomain) -> usize {
    d.as_ref().map_or(0, |d| d.inner.dim())
}

/// # Safety
/// `p` must point to `n` doubles; `d` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn mm_domain_contains(
    d: *const MmDomain,
    p: *const f64,
    n: usize,
    margin: f64,
    out: *mut bool,
) -> i32 {
    guard(|| {
        let v = domain(d)?.contains(&vector(p, n)?, margin)?;
        write(out, v)
    })
}

/// Exact metric of the unit ball at `x` in direction `u`.
///
/// # Safety
/// `x` and `u` must point to `n` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn mm_bck_metric(x: *const f64, u: *const f64, n: usize, out: *mut f64) -> i32 {
    guard(|| write(out, bck_metric(&vector(x, n)?, &vector(u, n)?)?))
}

/// Best certified lower bound on g(x, v).
///
/// # Safety
/// `x` and `v` must point to `n` doubles; `d` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn mm_lower_bound(
    d: *const MmDomain,
    x: *const f64,
    v: *const f64,
    n: usize,
    out: *mut f64,
) -> i32 {
    guard(|| write(out, best_lower(domain(d)?, &vector(x, n)?, &vector(v, n)?, &Toolbox::default())?.value))
}

/// Solver upper bound on g(x, v). `cfg` may be NULL for defaults.
///
/// # Safety
/// `x` and `v` must point to `n` doubles; `d` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn mm_upper_bound(
    d: *const MmDomain,
    x: *const f64,
    v: *const f64,
    n: usize,
    cfg: *const MmSolverConfig,
    out: *mut f64,
) -> i32 {
    guard(|| {
        let c = cfg.as_ref().copied().unwrap_or_else(|| mm_solver_config_default());
        let cfg = SolverConfig {
            degree: c.degree,
            multistarts: c.multistarts,
            seed: c.seed,
            margin: c.margin,
            ..SolverConfig::default()
        };
        cfg.validate()?;
        write(out, maximize_g(domain(d)?, &vector(x, n)?, &vector(v, n)?, &cfg)?.bound)
    })
}

/// Certified lower bound and chain upper bound on the distance.
///
/// # Safety
/// `x` and `y` must point to `n` doubles; the other pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn mm_distance(
    d: *const MmDomain,
    x: *const f64,
    y: *const f64,
    n: usize,
    lower: *mut f64,
    upper: *mut f64,
) -> i32 {
    guard(|| {
        let dom = domain(d)?;
        let (x, y) = (vector(x, n)?, vector(y, n)?);
        let lo = distance_lower(dom, &x, &y)?.value;
        let up = chain_distance_upper(dom, &x, &y, &ChainConfig::default())?.total;
        write(lower, lo)?;
        write(upper, up)
    })
}

/// Hyperbolicity verdict. `certificate_json` may be NULL; otherwise it
/// receives the verdict as JSON, to be freed with `mm_string_free`.
///
/// # Safety
/// `d` and `status` must be valid.
#[no_mangle]
pub unsafe extern "C" fn mm_classify(
    d: *const MmDomain,
    status: *mut MmStatus,
    certificate_json: *mut *mut c_char,
) -> i32 {
    guard(|| {
        let v = classify_general(domain(d)?, None);
        let s = match v.status {
            Status::CompleteHyperbolic => MmStatus::CompleteHyperbolic,
            Status::Hyperbolic => MmStatus::Hyperbolic,
            Status::NonHyperbolic => MmStatus::NonHyperbolic,
            Status::Unknown => MmStatus::Unknown,
        };
        write(status, s)?;
        if !certificate_json.is_null() {
            let text = serde_json::to_string(&v).map_err(|e| Error::Io(e.to_string()))?;
            certificate_json.write(string_out(text));
        }
        Ok(())
    })
}
