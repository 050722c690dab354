//! C ABI for `censreg`.
//!
//! Samples and fits are opaque heap handles created by `censreg_*_new` /
//! `censreg_fit` and released with the matching `_free`. Every fallible call
//! returns a [`CensregStatus`]; on failure a description is available from
//! [`censreg_last_error_message`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use censreg::breakdown::breakdown_bound;
use censreg::estimators::{fit, AnKind, Estimator, EstimatorOptions};
use censreg::{kaplan_meier, residuals, CensoredSample, Error, FitResult};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CensregStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    DimensionMismatch = 3,
    RankDeficient = 4,
    AllCensored = 5,
    TooFewObservations = 6,
    Numerical = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CensregEstimator {
    Ls = 0,
    L1 = 1,
    Lms = 2,
    S = 3,
    Mm = 4,
    Tau = 5,
    M = 6,
    Gm = 7,
}

impl From<CensregEstimator> for Estimator {
    fn from(e: CensregEstimator) -> Self {
        match e {
            CensregEstimator::Ls => Estimator::Ls,
            CensregEstimator::L1 => Estimator::L1,
            CensregEstimator::Lms => Estimator::Lms,
            CensregEstimator::S => Estimator::S,
            CensregEstimator::Mm => Estimator::Mm,
            CensregEstimator::Tau => Estimator::Tau,
            CensregEstimator::M => Estimator::M,
            CensregEstimator::Gm => Estimator::Gm,
        }
    }
}

/// Tuning; start from `censreg_options_default()`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CensregOptions {
    pub n_candidates: usize,
    pub seed: u64,
    pub b_over_a: f64,
    pub c1: f64,
    pub c2: f64,
    pub c_tau: f64,
    pub refine: bool,
    pub prune: bool,
    /// Use the diagonal MAD scatter instead of the identity in the outer
    /// criterion.
    pub mad_scatter: bool,
}

impl From<&CensregOptions> for EstimatorOptions {
    fn from(o: &CensregOptions) -> Self {
        let mut opts = EstimatorOptions { b_over_a: o.b_over_a, c1: o.c1, c2: o.c2, c_tau: o.c_tau, ..Default::default() };
        opts.search.n_candidates = o.n_candidates;
        opts.search.seed = o.seed;
        opts.search.refine = o.refine;
        opts.search.prune = o.prune;
        opts.search.a_n = if o.mad_scatter { AnKind::MadDiagonal } else { AnKind::Identity };
        opts
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct CensregBreakdown {
    pub q: usize,
    pub m: usize,
    pub k0: f64,
    pub gamma_bound: f64,
    pub optimal_bound: f64,
    pub q_exact: bool,
}

/// Opaque sample handle.
pub struct CensregSample(CensoredSample);

/// Opaque fit handle.
pub struct CensregFit(FitResult);

thread_local! {
    static LAST_ERROR: RefCell<Vec<u8>> = const { RefCell::new(Vec::new()) };
}

fn set_error(msg: &str) {
    LAST_ERROR.with(|e| {
        let mut e = e.borrow_mut();
        e.clear();
        e.extend(msg.bytes().filter(|b| *b != 0));
    });
}

fn status_of(err: &Error) -> CensregStatus {
    match err {
        Error::DimensionMismatch { .. } => CensregStatus::DimensionMismatch,
        Error::RankDeficient { .. } => CensregStatus::RankDeficient,
        Error::AllCensored => CensregStatus::AllCensored,
        Error::TooFewObservations { .. } => CensregStatus::TooFewObservations,
        Error::Probe { source, .. } => status_of(source),
        e if e.is_usage() => CensregStatus::InvalidInput,
        Error::NonFinite(_) => CensregStatus::InvalidInput,
        _ => CensregStatus::Numerical,
    }
}

/// Runs `f`, converting errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), (CensregStatus, String)>) -> CensregStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CensregStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            CensregStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (CensregStatus, String) {
    (status_of(&e), e.to_string())
}

fn null() -> (CensregStatus, String) {
    (CensregStatus::NullPointer, "null pointer argument".into())
}

#[no_mangle]
pub extern "C" fn censreg_options_default() -> CensregOptions {
    let d = EstimatorOptions::default();
    CensregOptions {
        n_candidates: d.search.n_candidates,
        seed: d.search.seed,
        b_over_a: d.b_over_a,
        c1: d.c1,
        c2: d.c2,
        c_tau: d.c_tau,
        refine: d.search.refine,
        prune: d.search.prune,
        mad_scatter: false,
    }
}

/// NUL-terminated library version; static storage.
#[no_mangle]
pub extern "C" fn censreg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates a sample from `n` responses, a row-major `n × p` design and `n`
/// status bytes (nonzero = observed). With `has_intercept` the first design
/// column must be all ones.
///
/// # Safety
/// `y` and `delta` must point to `n` readable elements, `x` to `n·p`, and
/// `out` to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn censreg_sample_new(
    y: *const f64,
    x: *const f64,
    delta: *const u8,
    n: usize,
    p: usize,
    has_intercept: bool,
    out: *mut *mut CensregSample,
) -> CensregStatus {
    guard(|| {
        if y.is_null() || x.is_null() || delta.is_null() || out.is_null() {
            return Err(null());
        }
        let len = n.checked_mul(p).ok_or((CensregStatus::InvalidInput, "n·p overflows".into()))?;
        // SAFETY: lengths are guaranteed by the caller.
        let (y, x, d) = unsafe { (slice::from_raw_parts(y, n), slice::from_raw_parts(x, len), slice::from_raw_parts(delta, n)) };
        let sample =
            CensoredSample::new(y.to_vec(), x.to_vec(), d.iter().map(|v| *v != 0).collect(), p, has_intercept)
                .map_err(lib_err)?;
        // SAFETY: `out` is non-null and writable.
        unsafe { *out = Box::into_raw(Box::new(CensregSample(sample))) };
        Ok(())
    })
}

/// # Safety
/// `sample` must come from `censreg_sample_new` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn censreg_sample_free(sample: *mut CensregSample) {
    if !sample.is_null() {
        // SAFETY: created by Box::into_raw in censreg_sample_new.
        drop(unsafe { Box::from_raw(sample) });
    }
}

/// # Safety
/// `sample` must be a live handle or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn censreg_sample_n(sample: *const CensregSample) -> usize {
    unsafe { sample.as_ref() }.map_or(0, |s| s.0.n())
}

/// # Safety
/// `sample` must be a live handle or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn censreg_sample_p(sample: *const CensregSample) -> usize {
    unsafe { sample.as_ref() }.map_or(0, |s| s.0.p())
}

/// # Safety
/// `sample` must be a live handle or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn censreg_sample_censored(sample: *const CensregSample) -> usize {
    unsafe { sample.as_ref() }.map_or(0, |s| s.0.censored_count())
}

/// Validates the sample (rank, not all censored) and fits `estimator`.
/// `options` may be null for the defaults.
///
/// # Safety
/// `sample` must be a live handle, `options` null or readable, `out`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn censreg_fit(
    sample: *const CensregSample,
    estimator: CensregEstimator,
    options: *const CensregOptions,
    out: *mut *mut CensregFit,
) -> CensregStatus {
    guard(|| {
        let s = unsafe { sample.as_ref() }.ok_or_else(null)?;
        if out.is_null() {
            return Err(null());
        }
        let opts = match unsafe { options.as_ref() } {
            Some(o) => EstimatorOptions::from(o),
            None => EstimatorOptions::default(),
        };
        censreg::validate(&s.0).map_err(lib_err)?;
        let f = fit(&s.0, estimator.into(), &opts).map_err(lib_err)?;
        unsafe { *out = Box::into_raw(Box::new(CensregFit(f))) };
        Ok(())
    })
}

/// # Safety
/// `fit` must come from `censreg_fit` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn censreg_fit_free(fit: *mut CensregFit) {
    if !fit.is_null() {
        // SAFETY: created by Box::into_raw in censreg_fit.
        drop(unsafe { Box::from_raw(fit) });
    }
}

/// Number of coefficients, 0 for null.
///
/// # Safety
/// `fit` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn censreg_fit_p(fit: *const CensregFit) -> usize {
    unsafe { fit.as_ref() }.map_or(0, |f| f.0.beta.len())
}

/// Copies the coefficients into `out[0..len]`; `len` must be at least
/// `censreg_fit_p(fit)`.
///
/// # Safety
/// `fit` must be a live handle and `out` writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn censreg_fit_beta(fit: *const CensregFit, out: *mut f64, len: usize) -> CensregStatus {
    guard(|| {
        let f = unsafe { fit.as_ref() }.ok_or_else(null)?;
        if out.is_null() {
            return Err(null());
        }
        let beta = &f.0.beta;
        if len < beta.len() {
            return Err((CensregStatus::BufferTooSmall, format!("need {} doubles, got {len}", beta.len())));
        }
        unsafe { ptr::copy_nonoverlapping(beta.as_ptr(), out, beta.len()) };
        Ok(())
    })
}

/// Residual scale; NaN for null.
///
/// # Safety
/// `fit` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn censreg_fit_scale(fit: *const CensregFit) -> f64 {
    unsafe { fit.as_ref() }.map_or(f64::NAN, |f| f.0.scale)
}

/// Estimator criterion at the fit; NaN for null.
///
/// # Safety
/// `fit` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn censreg_fit_objective(fit: *const CensregFit) -> f64 {
    unsafe { fit.as_ref() }.map_or(f64::NAN, |f| f.0.objective)
}

/// # Safety
/// `fit` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn censreg_fit_converged(fit: *const CensregFit) -> bool {
    unsafe { fit.as_ref() }.is_some_and(|f| f.0.converged)
}

/// # Safety
/// `fit` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn censreg_fit_exact(fit: *const CensregFit) -> bool {
    unsafe { fit.as_ref() }.is_some_and(|f| f.0.exact_fit)
}

/// # Safety
/// `fit` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn censreg_fit_evaluations(fit: *const CensregFit) -> usize {
    unsafe { fit.as_ref() }.map_or(0, |f| f.0.n_candidates_evaluated)
}

/// Breakdown lower bound for the sample at scale ratio `b_over_a`.
///
/// # Safety
/// `sample` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn censreg_breakdown_bound(
    sample: *const CensregSample,
    b_over_a: f64,
    out: *mut CensregBreakdown,
) -> CensregStatus {
    guard(|| {
        let s = unsafe { sample.as_ref() }.ok_or_else(null)?;
        let out = unsafe { out.as_mut() }.ok_or_else(null)?;
        let r = breakdown_bound(&s.0, b_over_a).map_err(lib_err)?;
        *out = CensregBreakdown {
            q: r.q,
            m: r.m,
            k0: r.k0,
            gamma_bound: r.gamma_bound,
            optimal_bound: r.optimal_bound,
            q_exact: r.q_exact,
        };
        Ok(())
    })
}

/// Kaplan–Meier masses `π_i` of the residuals `y* − Xβ`, written to
/// `out_pi[0..n]` in observation order (zero for censored residuals).
///
/// # Safety
/// `sample` must be a live handle, `beta` readable for `p` doubles and
/// `out_pi` writable for `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn censreg_km_weights(
    sample: *const CensregSample,
    beta: *const f64,
    p: usize,
    out_pi: *mut f64,
    n: usize,
) -> CensregStatus {
    guard(|| {
        let s = unsafe { sample.as_ref() }.ok_or_else(null)?;
        if beta.is_null() || out_pi.is_null() {
            return Err(null());
        }
        if n < s.0.n() {
            return Err((CensregStatus::BufferTooSmall, format!("need {} doubles, got {n}", s.0.n())));
        }
        let beta = unsafe { slice::from_raw_parts(beta, p) };
        let w = kaplan_meier(&residuals(&s.0, beta).map_err(lib_err)?).map_err(lib_err)?;
        let pi = w.pi();
        unsafe { ptr::copy_nonoverlapping(pi.as_ptr(), out_pi, pi.len()) };
        Ok(())
    })
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len − 1` bytes) and returns the full message length
/// excluding the terminator. With a null `buf` only the length is returned.
///
/// # Safety
/// `buf` must be null or writable for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn censreg_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        if !buf.is_null() && len > 0 {
            let k = e.len().min(len - 1);
            unsafe {
                ptr::copy_nonoverlapping(e.as_ptr().cast::<c_char>(), buf, k);
                *buf.add(k) = 0;
            }
        }
        e.len()
    })
}

/// Name of an estimator as accepted by the command line; static storage.
#[no_mangle]
pub extern "C" fn censreg_estimator_name(estimator: CensregEstimator) -> *const c_char {
    let s: &'static CStr = match Estimator::from(estimator) {
        Estimator::Ls => c"ls",
        Estimator::L1 => c"l1",
        Estimator::Lms => c"lms",
        Estimator::S => c"s",
        Estimator::Mm => c"mm",
        Estimator::Tau => c"tau",
        Estimator::M => c"m",
        Estimator::Gm => c"gm",
    };
    s.as_ptr()
}
