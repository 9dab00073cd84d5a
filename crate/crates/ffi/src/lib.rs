//! C ABI over `mixclass`.
//!
//! Objects are opaque heap handles created by `*_new`/`*_read` functions and
//! released with the matching `*_free`. Every fallible call returns a
//! [`MixclassStatus`]; the message of the last failure on the calling thread
//! is available from [`mixclass_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::fs::File;
use std::io::BufReader;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use mixclass::oracle::{CountOracle, ExactOracle, MixtureInstance, Phase, Simulator, SparseVector};
use mixclass::params::AlgoConfig;
use mixclass::recovery::{self, RecoveryOptions, RecoveryResult};
use mixclass::{support, Error};

/// Status codes; the nonzero values shared with the CLI match its exit codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MixclassStatus {
    Ok = 0,
    Error = 1,
    InvalidArgument = 2,
    AssumptionViolated = 3,
    EstimationFailure = 4,
    NullPointer = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct MixclassCounts {
    pub pos: usize,
    pub neg: usize,
    pub zero: usize,
    pub nonzero: usize,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MixclassAlgorithm {
    TwoStage = 0,
    OneStage = 1,
}

/// A mixture instance (the hidden components).
pub struct MixclassInstance(MixtureInstance);

/// A count oracle over an instance, with its query ledger.
pub struct MixclassOracle(Box<dyn CountOracle + Send>);

/// Output of a recovery run.
pub struct MixclassResult(RecoveryResult);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> MixclassStatus {
    match e.exit_code() {
        2 => MixclassStatus::InvalidArgument,
        3 => MixclassStatus::AssumptionViolated,
        4 => MixclassStatus::EstimationFailure,
        _ => MixclassStatus::Error,
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> MixclassStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MixclassStatus::Ok,
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            MixclassStatus::NullPointer
        }
        Err(_) => {
            set_error("internal panic".into());
            MixclassStatus::Panic
        }
    }
}

enum Failure {
    Lib(Error),
    Null(&'static str),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn deref_mut<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Null(what))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &'static str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn store<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn mixclass_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mixclass_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Read an instance file (`n ell delta`, then `k idx:val ...` per component).
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mixclass_instance_read(path: *const c_char, out: *mut *mut MixclassInstance) -> MixclassStatus {
    guard(|| {
        if path.is_null() {
            return Err(Failure::Null("path"));
        }
        let path = CStr::from_ptr(path).to_string_lossy().into_owned();
        let file = File::open(&path).map_err(Error::from)?;
        store(out, MixclassInstance(MixtureInstance::read_from(BufReader::new(file))?))
    })
}

/// Build an instance from `ell` sparse components laid out back to back:
/// component `t` owns `nnz[t]` consecutive entries of `idx`/`val`.
/// Components are normalized.
///
/// # Safety
/// `nnz` must hold `ell` entries and `idx`/`val` their sum; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn mixclass_instance_new(
    n: usize,
    ell: usize,
    nnz: *const usize,
    idx: *const usize,
    val: *const f64,
    delta: f64,
    out: *mut *mut MixclassInstance,
) -> MixclassStatus {
    guard(|| {
        let nnz = slice(nnz, ell, "nnz")?;
        let total = nnz.iter().sum();
        let (idx, val) = (slice(idx, total, "idx")?, slice(val, total, "val")?);
        let mut at = 0;
        let mut comps = Vec::with_capacity(ell);
        for &c in nnz {
            comps.push(SparseVector::new(n, idx[at..at + c].iter().copied().zip(val[at..at + c].iter().copied()))?);
            at += c;
        }
        store(out, MixclassInstance(MixtureInstance::new(comps, delta)?))
    })
}

/// # Safety
/// `inst` must come from this library or be NULL.
#[no_mangle]
pub unsafe extern "C" fn mixclass_instance_free(inst: *mut MixclassInstance) {
    if !inst.is_null() {
        drop(Box::from_raw(inst));
    }
}

/// # Safety
/// `inst` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn mixclass_instance_dim(inst: *const MixclassInstance) -> usize {
    inst.as_ref().map_or(0, |i| i.0.n())
}

/// # Safety
/// `inst` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn mixclass_instance_components(inst: *const MixclassInstance) -> usize {
    inst.as_ref().map_or(0, |i| i.0.ell())
}

/// Oracle over a copy of `inst`: simulated with `seed`, or exact counts when
/// `exact` is true.
///
/// # Safety
/// `inst` must be a valid handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mixclass_oracle_new(
    inst: *const MixclassInstance,
    seed: u64,
    exact: bool,
    out: *mut *mut MixclassOracle,
) -> MixclassStatus {
    guard(|| {
        let inst = deref(inst, "inst")?.0.clone();
        let o: Box<dyn CountOracle + Send> =
            if exact { Box::new(ExactOracle::new(inst)) } else { Box::new(Simulator::new(inst, seed)) };
        store(out, MixclassOracle(o))
    })
}

/// # Safety
/// `oracle` must come from this library or be NULL.
#[no_mangle]
pub unsafe extern "C" fn mixclass_oracle_free(oracle: *mut MixclassOracle) {
    if !oracle.is_null() {
        drop(Box::from_raw(oracle));
    }
}

/// Estimate the sign counts of the dense query `v` (length `n`) from `batch`
/// query pairs.
///
/// # Safety
/// `v` must hold `n` doubles; `oracle` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn mixclass_oracle_counts(
    oracle: *mut MixclassOracle,
    v: *const f64,
    n: usize,
    batch: usize,
    out: *mut MixclassCounts,
) -> MixclassStatus {
    guard(|| {
        let o = deref_mut(oracle, "oracle")?;
        let v = slice(v, n, "v")?;
        let c = o.0.counts(v, batch, Phase::Recovery)?;
        *deref_mut(out, "out")? = MixclassCounts { pos: c.pos, neg: c.neg, zero: c.z, nonzero: c.nz };
        Ok(())
    })
}

/// Oracle calls issued so far.
///
/// # Safety
/// `oracle` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn mixclass_oracle_calls(oracle: *const MixclassOracle) -> u64 {
    oracle.as_ref().map_or(0, |o| o.0.ledger().total())
}

/// Recover the support matrix into `bits`, row-major `n x ell`, columns
/// ordered by representative coordinate.
///
/// # Safety
/// `bits` must hold `n * ell` bytes; `oracle` must be valid.
#[no_mangle]
pub unsafe extern "C" fn mixclass_support_recover(
    oracle: *mut MixclassOracle,
    k: usize,
    mu_min: f64,
    seed: u64,
    bits: *mut u8,
    len: usize,
) -> MixclassStatus {
    guard(|| {
        let o = deref_mut(oracle, "oracle")?;
        let (n, ell) = (o.0.n(), o.0.ell());
        if len != n * ell {
            return Err(Error::DimensionMismatch { expected: n * ell, got: len }.into());
        }
        if bits.is_null() {
            return Err(Failure::Null("bits"));
        }
        let p = mixclass::oracle::Problem { n, ell, k, mu_min, delta: 0.0 };
        let x = support::recover_support(o.0.as_mut(), &p, &AlgoConfig::default(), seed)?.x.canonical();
        let out = std::slice::from_raw_parts_mut(bits, len);
        for (i, row) in x.rows().iter().enumerate() {
            out[i * ell..(i + 1) * ell].copy_from_slice(row);
        }
        Ok(())
    })
}

/// Recover all components to accuracy `epsilon`. `mu_min` is the smallest
/// nonzero magnitude of any component entry.
///
/// # Safety
/// `oracle` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn mixclass_recover(
    oracle: *mut MixclassOracle,
    algorithm: MixclassAlgorithm,
    k: usize,
    mu_min: f64,
    epsilon: f64,
    seed: u64,
    out: *mut *mut MixclassResult,
) -> MixclassStatus {
    guard(|| {
        let o = deref_mut(oracle, "oracle")?;
        let p = mixclass::oracle::Problem { n: o.0.n(), ell: o.0.ell(), k, mu_min, delta: 0.0 };
        let cfg = AlgoConfig::default();
        let r = match algorithm {
            MixclassAlgorithm::TwoStage => {
                recovery::two_stage_recover(o.0.as_mut(), &p, &cfg, epsilon, seed, &RecoveryOptions::default())?
            }
            MixclassAlgorithm::OneStage => recovery::one_stage_recover(o.0.as_mut(), &p, &cfg, epsilon, seed, None)?,
        };
        store(out, MixclassResult(r))
    })
}

/// # Safety
/// `result` must come from this library or be NULL.
#[no_mangle]
pub unsafe extern "C" fn mixclass_result_free(result: *mut MixclassResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// # Safety
/// `result` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn mixclass_result_components(result: *const MixclassResult) -> usize {
    result.as_ref().map_or(0, |r| r.0.estimates.len())
}

/// Oracle calls spent by the run.
///
/// # Safety
/// `result` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn mixclass_result_queries(result: *const MixclassResult) -> u64 {
    result.as_ref().map_or(0, |r| r.0.ledger.total())
}

/// Copy estimate `t` densely into `out` (length `n`) and its representative
/// coordinate into `rep` (may be NULL).
///
/// # Safety
/// `out` must hold `n` doubles; `result` must be valid.
#[no_mangle]
pub unsafe extern "C" fn mixclass_result_estimate(
    result: *const MixclassResult,
    t: usize,
    out: *mut f64,
    n: usize,
    rep: *mut usize,
) -> MixclassStatus {
    guard(|| {
        let r = &deref(result, "result")?.0;
        let est = r
            .estimates
            .get(t)
            .ok_or_else(|| Error::InvalidParameter(format!("component {t} out of {}", r.estimates.len())))?;
        if n != est.n() {
            return Err(Error::DimensionMismatch { expected: est.n(), got: n }.into());
        }
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        std::slice::from_raw_parts_mut(out, n).copy_from_slice(&est.to_dense());
        if let (Some(x), false) = (r.reps.get(t), rep.is_null()) {
            *rep = *x;
        }
        Ok(())
    })
}
