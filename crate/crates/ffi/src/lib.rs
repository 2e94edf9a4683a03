//! C interface to the enpgf filter.
//!
//! Functions return an [`EnpgfStatus`]; on failure the message is available
//! from [`enpgf_last_error`] on the same thread. Filters are opaque handles
//! created by [`enpgf_filter_new`] and released with [`enpgf_filter_free`].
//! Matrices are row-major, `alpha[i * m + j]` being the effect of node `j`
//! on node `i`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use enpgf::filter::{self, FilterConfig, FilterState, GammaSpec, PerturbationLaw, Priors};
use enpgf::hawkes::{self, HawkesParams, IntensityVector};
use enpgf::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnpgfStatus {
    Ok = 0,
    InvalidArgument = 1,
    NullPointer = 2,
    NonFinite = 3,
    /// A panic or other unexpected failure inside the library.
    Internal = 4,
}

/// Mean and variance of a gamma prior.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct EnpgfGamma {
    pub mean: f64,
    pub variance: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct EnpgfPriors {
    pub baseline: EnpgfGamma,
    pub decay: EnpgfGamma,
    pub excitation: EnpgfGamma,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnpgfPerturbation {
    /// Gamma(shape = count, rate = 1) draws.
    PoissonMatched = 0,
    /// Draws with mean count and unit variance.
    UnitVariance = 1,
}

/// Filter settings. Obtain defaults from [`enpgf_filter_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct EnpgfFilterOptions {
    pub ensemble_size: usize,
    pub dt: f64,
    pub seed: u64,
    pub positivity_floor: f64,
    pub perturbation: EnpgfPerturbation,
}

/// Opaque filter handle.
pub struct EnpgfFilter {
    cfg: FilterConfig,
    state: FilterState,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> EnpgfStatus {
    match e {
        Error::NonFinite { .. } => EnpgfStatus::NonFinite,
        e if e.is_validation() => EnpgfStatus::InvalidArgument,
        _ => EnpgfStatus::Internal,
    }
}

struct Fail(EnpgfStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(EnpgfStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Fail {
    Fail(EnpgfStatus::InvalidArgument, msg.into())
}

/// Runs `f`, records any failure and converts panics to `Internal`.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> EnpgfStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => EnpgfStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal error: {msg}"));
            EnpgfStatus::Internal
        }
    }
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn handle<'a>(f: *const EnpgfFilter) -> Result<&'a EnpgfFilter, Fail> {
    f.as_ref().ok_or_else(|| null("filter"))
}

unsafe fn params_from(
    m: usize,
    mu: *const f64,
    beta: *const f64,
    alpha: *const f64,
) -> Result<HawkesParams, Fail> {
    if m == 0 {
        return Err(invalid("m must be >= 1"));
    }
    let mu = slice(mu, m, "mu")?.to_vec();
    let beta = slice(beta, m, "beta")?.to_vec();
    let alpha = slice(alpha, m * m, "alpha")?
        .chunks_exact(m)
        .map(<[f64]>::to_vec)
        .collect();
    Ok(HawkesParams::new(mu, beta, alpha)?)
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next call into the library from this thread.
#[no_mangle]
pub extern "C" fn enpgf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn enpgf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[no_mangle]
pub extern "C" fn enpgf_filter_options_default() -> EnpgfFilterOptions {
    let d = FilterConfig::new(500, 0.1, 0);
    EnpgfFilterOptions {
        ensemble_size: d.ensemble_size,
        dt: d.dt,
        seed: d.seed,
        positivity_floor: d.positivity_floor,
        perturbation: EnpgfPerturbation::PoissonMatched,
    }
}

/// Draws an initial ensemble over `m` nodes from `priors` and stores a new
/// filter in `*out`.
///
/// # Safety
/// `priors` and `options` must point to valid structs and `out` to writable
/// storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn enpgf_filter_new(
    m: usize,
    priors: *const EnpgfPriors,
    options: *const EnpgfFilterOptions,
    out: *mut *mut EnpgfFilter,
) -> EnpgfStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = ptr::null_mut();
        let p = priors.as_ref().ok_or_else(|| null("priors"))?;
        let o = options.as_ref().ok_or_else(|| null("options"))?;
        let g = |x: EnpgfGamma| GammaSpec::new(x.mean, x.variance);
        let priors = Priors {
            baseline: g(p.baseline)?,
            decay: g(p.decay)?,
            excitation: g(p.excitation)?,
        };
        let mut cfg = FilterConfig::new(o.ensemble_size, o.dt, o.seed);
        cfg.positivity_floor = o.positivity_floor;
        cfg.perturbation = match o.perturbation {
            EnpgfPerturbation::PoissonMatched => PerturbationLaw::PoissonMatched,
            EnpgfPerturbation::UnitVariance => PerturbationLaw::UnitVariance,
        };
        cfg.validate()?;
        let ensembles = filter::init_ensemble(m, cfg.ensemble_size, &priors, cfg.seed)?;
        let state = FilterState::new(ensembles)?;
        *out = Box::into_raw(Box::new(EnpgfFilter { cfg, state }));
        Ok(())
    })
}

/// Releases a filter. Null is ignored.
///
/// # Safety
/// `f` must come from [`enpgf_filter_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn enpgf_filter_free(f: *mut EnpgfFilter) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

/// Number of nodes.
///
/// # Safety
/// `f` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn enpgf_filter_nodes(f: *const EnpgfFilter) -> usize {
    f.as_ref().map_or(0, |f| f.state.m())
}

/// Number of bins assimilated so far.
///
/// # Safety
/// `f` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn enpgf_filter_step(f: *const EnpgfFilter) -> usize {
    f.as_ref().map_or(0, |f| f.state.step)
}

/// Assimilates `n_steps` consecutive count vectors of length `m`, stored
/// row-major in `counts`. On failure the filter keeps the state reached
/// after the last successful bin.
///
/// # Safety
/// `f` must be a live handle and `counts` must hold `n_steps * m` values.
#[no_mangle]
pub unsafe extern "C" fn enpgf_filter_assimilate(
    f: *mut EnpgfFilter,
    counts: *const u64,
    n_steps: usize,
    m: usize,
) -> EnpgfStatus {
    guard(|| {
        let f = f.as_mut().ok_or_else(|| null("filter"))?;
        if m != f.state.m() {
            return Err(invalid(format!("m = {m} but the filter has {} nodes", f.state.m())));
        }
        let counts = slice(counts, n_steps * m, "counts")?;
        for row in counts.chunks_exact(m) {
            filter::assimilate_step(&mut f.state, row, &f.cfg)?;
        }
        Ok(())
    })
}

/// Ensemble mean of node `node`'s parameters: baseline, decay, then the `m`
/// excitations of that node. `out` must hold `m + 2` values.
///
/// # Safety
/// `f` must be a live handle and `out` writable for `len` values.
#[no_mangle]
pub unsafe extern "C" fn enpgf_filter_param_mean(
    f: *const EnpgfFilter,
    node: usize,
    out: *mut f64,
    len: usize,
) -> EnpgfStatus {
    guard(|| {
        let f = handle(f)?;
        let m = f.state.m();
        if node >= m {
            return Err(invalid(format!("node {node} out of range (m = {m})")));
        }
        if len != m + filter::ALPHA {
            return Err(invalid(format!("len = {len}, need {}", m + filter::ALPHA)));
        }
        let out = slice_mut(out, len, "out")?;
        out.copy_from_slice(&f.state.ensembles[node].param_means());
        Ok(())
    })
}

/// Ensemble-mean excitation matrix, `m * m` values row-major.
///
/// # Safety
/// `f` must be a live handle and `out` writable for `len` values.
#[no_mangle]
pub unsafe extern "C" fn enpgf_filter_alpha_mean(
    f: *const EnpgfFilter,
    out: *mut f64,
    len: usize,
) -> EnpgfStatus {
    guard(|| {
        let f = handle(f)?;
        let m = f.state.m();
        if len != m * m {
            return Err(invalid(format!("len = {len}, need {}", m * m)));
        }
        let out = slice_mut(out, len, "out")?;
        for (row, ens) in out.chunks_exact_mut(m).zip(&f.state.ensembles) {
            row.copy_from_slice(&ens.param_means()[filter::ALPHA..]);
        }
        Ok(())
    })
}

/// Ensemble-mean intensity of every node, `m` values.
///
/// # Safety
/// `f` must be a live handle and `out` writable for `len` values.
#[no_mangle]
pub unsafe extern "C" fn enpgf_filter_intensity_mean(
    f: *const EnpgfFilter,
    out: *mut f64,
    len: usize,
) -> EnpgfStatus {
    guard(|| {
        let f = handle(f)?;
        let m = f.state.m();
        if len != m {
            return Err(invalid(format!("len = {len}, need {m}")));
        }
        let out = slice_mut(out, len, "out")?;
        for (o, ens) in out.iter_mut().zip(&f.state.ensembles) {
            *o = ens.lambda.iter().sum::<f64>() / ens.size() as f64;
        }
        Ok(())
    })
}

/// Gamma-conjugate posterior of an intensity with prior `mean` and relative
/// variance `rel_var` after `dn` events in a bin of length `dt`.
///
/// # Safety
/// `out_mean` and `out_rel_var` must be writable.
#[no_mangle]
pub unsafe extern "C" fn enpgf_analytic_posterior(
    mean: f64,
    rel_var: f64,
    dn: u64,
    dt: f64,
    out_mean: *mut f64,
    out_rel_var: *mut f64,
) -> EnpgfStatus {
    guard(|| {
        let om = out_mean.as_mut().ok_or_else(|| null("out_mean"))?;
        let ov = out_rel_var.as_mut().ok_or_else(|| null("out_rel_var"))?;
        let (pm, pv) = filter::analytic_posterior(mean, rel_var, dn, dt)?;
        *om = pm;
        *ov = pv;
        Ok(())
    })
}

/// One deterministic intensity step: `out` receives the intensities of bin
/// `k + 1` given `lambda` and the counts of bin `k`.
///
/// # Safety
/// `mu`, `beta`, `lambda`, `counts` and `out` must hold `m` values and
/// `alpha` `m * m`.
#[no_mangle]
pub unsafe extern "C" fn enpgf_step_intensity(
    m: usize,
    mu: *const f64,
    beta: *const f64,
    alpha: *const f64,
    lambda: *const f64,
    counts: *const u64,
    dt: f64,
    out: *mut f64,
) -> EnpgfStatus {
    guard(|| {
        let params = params_from(m, mu, beta, alpha)?;
        let lambda = IntensityVector {
            lambda: slice(lambda, m, "lambda")?.to_vec(),
            k: 0,
        };
        let counts = slice(counts, m, "counts")?;
        let out = slice_mut(out, m, "out")?;
        let step = hawkes::step_intensity(&lambda, &params, counts, dt)?;
        out.copy_from_slice(&step.next.lambda);
        Ok(())
    })
}

/// Simulates `n_steps` bins of the Hawkes process; `out` receives the counts
/// row-major, `n_steps * m` values.
///
/// # Safety
/// `mu` and `beta` must hold `m` values, `alpha` `m * m` and `out`
/// `n_steps * m`.
#[no_mangle]
pub unsafe extern "C" fn enpgf_simulate(
    m: usize,
    mu: *const f64,
    beta: *const f64,
    alpha: *const f64,
    dt: f64,
    n_steps: usize,
    seed: u64,
    out: *mut u64,
) -> EnpgfStatus {
    guard(|| {
        let params = params_from(m, mu, beta, alpha)?;
        let out = slice_mut(out, n_steps * m, "out")?;
        let series = hawkes::simulate(&params, dt, n_steps, seed)?;
        for (dst, row) in out.chunks_exact_mut(m).zip(series.rows()) {
            dst.copy_from_slice(row);
        }
        Ok(())
    })
}
