//! C ABI for the restoration toolkit.
//!
//! Every function returns an [`IndiStatus`]; on failure a message describing
//! the error is available from [`indi_last_error_message`] on the same
//! thread. Estimators are opaque handles created by one of the
//! `indi_*_new` / `indi_estimator_load_checkpoint` functions and released with
//! [`indi_estimator_free`]. Vectors are passed as `(pointer, length)` pairs of
//! `double`; matrices are row-major.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::slice;

use indi_core::oracles::SquareMatrix;
use indi_core::regressor::checkpoint;
use indi_core::samplers::restore;
use indi_core::{
    Estimator, GaussianMixturePrior, GaussianOracle, GaussianPrior, IndiError, LinearDegradation,
    MixtureOracle, NoiseSchedule, SamplerConfig, SamplerKind, State, TimeStep,
};

/// Result code of every call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IndiStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    Domain = 4,
    NonFinite = 5,
    Checkpoint = 6,
    Io = 7,
    Internal = 8,
    Panic = 9,
}

/// Noise added along the restoration path.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IndiScheduleKind {
    /// `eps_t = epsilon`; `epsilon = 0` is noiseless.
    Constant = 0,
    /// `eps_t = epsilon / sqrt(t)`.
    Brownian = 1,
}

#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct IndiSchedule {
    pub kind: IndiScheduleKind,
    pub epsilon: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IndiSampler {
    Indi = 0,
    Naive = 1,
    ColdDiffusion = 2,
}

/// Opaque estimator handle.
pub struct IndiEstimator {
    inner: Box<dyn Estimator>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("interior nul bytes were replaced");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(IndiStatus, String);

impl From<IndiError> for Failure {
    fn from(e: IndiError) -> Self {
        let status = match &e {
            IndiError::DimensionMismatch { .. } => IndiStatus::DimensionMismatch,
            IndiError::InvalidInput(_) | IndiError::Config { .. } => IndiStatus::InvalidArgument,
            IndiError::Domain(_) => IndiStatus::Domain,
            IndiError::NonFinite { .. } | IndiError::TrainingDiverged { .. } => {
                IndiStatus::NonFinite
            }
            IndiError::Checkpoint(_) => IndiStatus::Checkpoint,
            IndiError::Io { .. } => IndiStatus::Io,
            _ => IndiStatus::Internal,
        };
        Failure(status, e.to_string())
    }
}

type Outcome = Result<(), Failure>;

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Outcome) -> IndiStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => IndiStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {message}"));
            IndiStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(IndiStatus::NullPointer, format!("`{what}` is null"))
}

/// Borrows `len` doubles; a null pointer is accepted only when `len == 0`.
unsafe fn slice_in<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn slice_out<'a>(p: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

unsafe fn estimator<'a>(handle: *const IndiEstimator) -> Result<&'a dyn Estimator, Failure> {
    handle
        .as_ref()
        .map(|h| h.inner.as_ref())
        .ok_or_else(|| null("estimator"))
}

fn schedule(s: IndiSchedule) -> Result<NoiseSchedule, Failure> {
    Ok(match s.kind {
        IndiScheduleKind::Constant => NoiseSchedule::constant(s.epsilon)?,
        IndiScheduleKind::Brownian => NoiseSchedule::brownian(s.epsilon)?,
    })
}

unsafe fn publish(out: *mut *mut IndiEstimator, inner: Box<dyn Estimator>) -> Outcome {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(IndiEstimator { inner }));
    Ok(())
}

fn rows(data: &[f64], n_rows: usize, dim: usize) -> Result<Vec<State>, Failure> {
    (0..n_rows)
        .map(|i| State::new(data[i * dim..(i + 1) * dim].to_vec()).map_err(Failure::from))
        .collect()
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn indi_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the most recent failure on this thread, or null if none.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn indi_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Ideal estimator for a Gaussian prior `N(c, sigma_c^2 I)` observed through
/// additive noise of std `sigma_n`.
///
/// # Safety
/// `c` must point to `dim` doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn indi_gaussian_oracle_new(
    c: *const f64,
    dim: usize,
    sigma_c: f64,
    sigma_n: f64,
    noise: IndiSchedule,
    out: *mut *mut IndiEstimator,
) -> IndiStatus {
    guard(|| {
        let c = State::new(slice_in(c, dim, "c")?.to_vec())?;
        let oracle = GaussianOracle::new(GaussianPrior::new(c, sigma_c)?, sigma_n)?
            .with_schedule(schedule(noise)?);
        publish(out, Box::new(oracle))
    })
}

/// Ideal estimator for a discrete prior on `n_modes` points with weights
/// `weights`, observed as `y = H x + sigma n`.
///
/// # Safety
/// `modes` must hold `n_modes * dim` doubles (one mode per row), `weights`
/// `n_modes` doubles, `h` `dim * dim` doubles, and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn indi_mixture_oracle_new(
    modes: *const f64,
    n_modes: usize,
    dim: usize,
    weights: *const f64,
    h: *const f64,
    sigma: f64,
    noise: IndiSchedule,
    out: *mut *mut IndiEstimator,
) -> IndiStatus {
    guard(|| {
        let total = n_modes.checked_mul(dim).ok_or_else(|| {
            Failure(
                IndiStatus::InvalidArgument,
                "n_modes * dim overflows".into(),
            )
        })?;
        let h_len = dim
            .checked_mul(dim)
            .ok_or_else(|| Failure(IndiStatus::InvalidArgument, "dim * dim overflows".into()))?;
        let modes = rows(slice_in(modes, total, "modes")?, n_modes, dim)?;
        let weights = slice_in(weights, n_modes, "weights")?.to_vec();
        let h_rows = slice_in(h, h_len, "h")?
            .chunks(dim.max(1))
            .map(<[f64]>::to_vec)
            .collect();
        let prior = GaussianMixturePrior::new(modes, weights)?;
        let deg = LinearDegradation::new(SquareMatrix::from_rows(h_rows)?, sigma)?;
        let oracle = MixtureOracle::new(prior, deg)?.with_schedule(schedule(noise)?);
        publish(out, Box::new(oracle))
    })
}

/// Loads a trained regressor from a checkpoint file.
///
/// # Safety
/// `path` must be a nul-terminated UTF-8 string and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn indi_estimator_load_checkpoint(
    path: *const c_char,
    out: *mut *mut IndiEstimator,
) -> IndiStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        let path = CStr::from_ptr(path).to_str().map_err(|_| {
            Failure(
                IndiStatus::InvalidArgument,
                "path is not valid UTF-8".into(),
            )
        })?;
        let model = checkpoint::load(Path::new(path))?;
        publish(out, Box::new(model))
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `handle` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn indi_estimator_free(handle: *mut IndiEstimator) {
    if !handle.is_null() {
        let _ = catch_unwind(AssertUnwindSafe(|| drop(Box::from_raw(handle))));
    }
}

/// Writes the state dimension of `handle` to `out`.
///
/// # Safety
/// `handle` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn indi_estimator_dim(
    handle: *const IndiEstimator,
    out: *mut usize,
) -> IndiStatus {
    guard(|| {
        let e = estimator(handle)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = e.dim();
        Ok(())
    })
}

/// Evaluates `F(x_t, t)` into `out`; both buffers hold `len` doubles.
///
/// # Safety
/// `handle` must be live and both buffers must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn indi_estimator_predict(
    handle: *const IndiEstimator,
    x_t: *const f64,
    len: usize,
    t: f64,
    out: *mut f64,
) -> IndiStatus {
    guard(|| {
        let e = estimator(handle)?;
        let x = State::new(slice_in(x_t, len, "x_t")?.to_vec())?;
        let f = e.estimate(&x, TimeStep::new(t)?)?;
        slice_out(out, len, "out")?.copy_from_slice(f.as_slice());
        Ok(())
    })
}

/// Restores observation `y` with `steps` steps of the chosen sampler and
/// writes the result to `out`. `seed` drives the schedule noise.
///
/// # Safety
/// `handle` must be live and both buffers must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn indi_restore(
    handle: *const IndiEstimator,
    sampler: IndiSampler,
    y: *const f64,
    len: usize,
    steps: usize,
    noise: IndiSchedule,
    seed: u64,
    out: *mut f64,
) -> IndiStatus {
    guard(|| {
        let e = estimator(handle)?;
        let y = State::new(slice_in(y, len, "y")?.to_vec())?;
        let kind = match sampler {
            IndiSampler::Indi => SamplerKind::Indi,
            IndiSampler::Naive => SamplerKind::Naive,
            IndiSampler::ColdDiffusion => SamplerKind::ColdDiffusion,
        };
        let run = restore(
            kind,
            e,
            &y,
            &SamplerConfig::new(steps, schedule(noise)?, seed),
        )?;
        slice_out(out, len, "out")?.copy_from_slice(run.output.as_slice());
        Ok(())
    })
}

/// Writes `x_t = (1 - t) x + t y` to `out`.
///
/// # Safety
/// All three buffers must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn indi_forward_interpolate(
    x: *const f64,
    y: *const f64,
    len: usize,
    t: f64,
    out: *mut f64,
) -> IndiStatus {
    guard(|| {
        let x = State::new(slice_in(x, len, "x")?.to_vec())?;
        let y = State::new(slice_in(y, len, "y")?.to_vec())?;
        let x_t = indi_core::forward_interpolate(&x, &y, TimeStep::new(t)?)?;
        slice_out(out, len, "out")?.copy_from_slice(x_t.as_slice());
        Ok(())
    })
}
