//! Closed-form posterior means for the two analytically solvable worlds:
//! a discrete (atomic) prior observed through a linear operator with Gaussian
//! noise, and a Gaussian prior under pure denoising.
//!
//! Both worlds provide an ideal [`Estimator`] that the samplers can drive, and
//! both are used throughout the test suite as ground truth.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::degradation::NoiseSchedule;
use crate::error::{IndiError, Result};
use crate::rng::standard_normal_vec;
use crate::state::{ensure_dim, State, TimeStep};

/// Anything that maps an intermediate state `x_t` at time `t` to an estimate
/// of the clean signal `x_0`.
pub trait Estimator: Send + Sync {
    /// Dimension of the states this estimator accepts and returns.
    fn dim(&self) -> usize;

    fn estimate(&self, x_t: &State, t: TimeStep) -> Result<State>;
}

impl<E: Estimator + ?Sized> Estimator for &E {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn estimate(&self, x_t: &State, t: TimeStep) -> Result<State> {
        (**self).estimate(x_t, t)
    }
}

impl<E: Estimator + ?Sized> Estimator for Box<E> {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn estimate(&self, x_t: &State, t: TimeStep) -> Result<State> {
        (**self).estimate(x_t, t)
    }
}

/// Adapts a closure `(x_t, t) -> estimate` into an [`Estimator`].
pub struct FnEstimator<F> {
    dim: usize,
    f: F,
}

impl<F> FnEstimator<F>
where
    F: Fn(&[f64], f64) -> Vec<f64> + Send + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        FnEstimator { dim, f }
    }
}

impl<F> Estimator for FnEstimator<F>
where
    F: Fn(&[f64], f64) -> Vec<f64> + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn estimate(&self, x_t: &State, t: TimeStep) -> Result<State> {
        ensure_dim(self.dim, x_t.dim())?;
        let out = (self.f)(x_t.as_slice(), t.get());
        ensure_dim(self.dim, out.len())?;
        State::checked(out, 0, "closure estimator output")
    }
}

/// Row-major square matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct SquareMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        SquareMatrix { n, data }
    }

    pub fn zeros(n: usize) -> Self {
        SquareMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(IndiError::InvalidInput("matrix must be non-empty".into()));
        }
        let mut data = Vec::with_capacity(n * n);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != n {
                return Err(IndiError::InvalidInput(format!(
                    "operator must be square: row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            data.extend(row);
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(IndiError::InvalidInput(
                "operator entries must be finite".into(),
            ));
        }
        Ok(SquareMatrix { n, data })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.n).map(<[f64]>::to_vec).collect()
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.data
            .chunks(self.n)
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `((1 - t) I + t H) v`.
    pub fn apply_interpolated(&self, t: f64, v: &[f64]) -> Vec<f64> {
        self.apply(v)
            .into_iter()
            .zip(v)
            .map(|(hv, vi)| (1.0 - t) * vi + t * hv)
            .collect()
    }
}

impl TryFrom<Vec<Vec<f64>>> for SquareMatrix {
    type Error = IndiError;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        SquareMatrix::from_rows(rows)
    }
}

impl From<SquareMatrix> for Vec<Vec<f64>> {
    fn from(m: SquareMatrix) -> Self {
        m.rows()
    }
}

/// Discrete prior `sum_i w_i delta(x - c_i)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MixtureSpec", into = "MixtureSpec")]
pub struct GaussianMixturePrior {
    modes: Vec<State>,
    weights: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureSpec {
    pub modes: Vec<State>,
    pub weights: Vec<f64>,
}

impl GaussianMixturePrior {
    pub fn new(modes: Vec<State>, weights: Vec<f64>) -> Result<Self> {
        if modes.is_empty() {
            return Err(IndiError::InvalidInput(
                "prior needs at least one mode".into(),
            ));
        }
        ensure_dim(modes.len(), weights.len())?;
        let dim = modes[0].dim();
        for m in &modes {
            ensure_dim(dim, m.dim())?;
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(IndiError::InvalidInput(
                "mode weights must be finite and >= 0".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(IndiError::InvalidInput(format!(
                "mode weights sum to {total}, expected 1"
            )));
        }
        Ok(GaussianMixturePrior { modes, weights })
    }

    pub fn uniform(modes: Vec<State>) -> Result<Self> {
        let w = 1.0 / modes.len().max(1) as f64;
        let weights = vec![w; modes.len()];
        // Equal weights can miss 1 by a few ulps; renormalize the last one.
        let mut weights = weights;
        if let Some(last) = weights.last_mut() {
            *last = 1.0 - w * (modes.len() - 1) as f64;
        }
        Self::new(modes, weights)
    }

    /// The four corners `(+-1, +-1)` of the unit square, equally weighted.
    pub fn unit_square_corners() -> Self {
        let modes = [[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]]
            .into_iter()
            .map(|c| State::from_trusted(c.to_vec()))
            .collect();
        Self::uniform(modes).expect("corner prior is valid")
    }

    pub fn dim(&self) -> usize {
        self.modes[0].dim()
    }

    pub fn modes(&self) -> &[State] {
        &self.modes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Draws a mode index and the corresponding atom.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, State) {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut idx = self.modes.len() - 1;
        for (i, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                idx = i;
                break;
            }
        }
        (idx, self.modes[idx].clone())
    }
}

impl TryFrom<MixtureSpec> for GaussianMixturePrior {
    type Error = IndiError;

    fn try_from(spec: MixtureSpec) -> Result<Self> {
        GaussianMixturePrior::new(spec.modes, spec.weights)
    }
}

impl From<GaussianMixturePrior> for MixtureSpec {
    fn from(p: GaussianMixturePrior) -> Self {
        MixtureSpec {
            modes: p.modes,
            weights: p.weights,
        }
    }
}

/// Observation model `y = H x + n`, `n ~ N(0, sigma^2 I)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DegradationSpec", into = "DegradationSpec")]
pub struct LinearDegradation {
    h: SquareMatrix,
    sigma: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DegradationSpec {
    pub h: SquareMatrix,
    pub sigma: f64,
}

impl LinearDegradation {
    pub fn new(h: SquareMatrix, sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(IndiError::InvalidInput(format!(
                "noise level must be >= 0, got {sigma}"
            )));
        }
        Ok(LinearDegradation { h, sigma })
    }

    pub fn denoising(dim: usize, sigma: f64) -> Result<Self> {
        Self::new(SquareMatrix::identity(dim), sigma)
    }

    pub fn h(&self) -> &SquareMatrix {
        &self.h
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Draws `H x + sigma n`.
    pub fn observe<R: Rng + ?Sized>(&self, x: &State, rng: &mut R) -> Result<State> {
        ensure_dim(self.h.dim(), x.dim())?;
        let noise = standard_normal_vec(rng, x.dim());
        let y = self
            .h
            .apply(x.as_slice())
            .into_iter()
            .zip(noise)
            .map(|(hx, n)| hx + self.sigma * n)
            .collect();
        Ok(State::from_trusted(y))
    }
}

impl TryFrom<DegradationSpec> for LinearDegradation {
    type Error = IndiError;

    fn try_from(spec: DegradationSpec) -> Result<Self> {
        LinearDegradation::new(spec.h, spec.sigma)
    }
}

impl From<LinearDegradation> for DegradationSpec {
    fn from(d: LinearDegradation) -> Self {
        DegradationSpec {
            h: d.h,
            sigma: d.sigma,
        }
    }
}

/// Isotropic Gaussian prior `N(c, sigma_c^2 I)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GaussianPriorSpec", into = "GaussianPriorSpec")]
pub struct GaussianPrior {
    c: State,
    sigma_c: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianPriorSpec {
    pub c: State,
    pub sigma_c: f64,
}

impl GaussianPrior {
    pub fn new(c: State, sigma_c: f64) -> Result<Self> {
        if !(sigma_c.is_finite() && sigma_c > 0.0) {
            return Err(IndiError::InvalidInput(format!(
                "sigma_c must be > 0, got {sigma_c}"
            )));
        }
        Ok(GaussianPrior { c, sigma_c })
    }

    pub fn c(&self) -> &State {
        &self.c
    }

    pub fn sigma_c(&self) -> f64 {
        self.sigma_c
    }

    pub fn dim(&self) -> usize {
        self.c.dim()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> State {
        let n = standard_normal_vec(rng, self.dim());
        State::from_trusted(
            self.c
                .as_slice()
                .iter()
                .zip(n)
                .map(|(c, z)| c + self.sigma_c * z)
                .collect(),
        )
    }
}

impl TryFrom<GaussianPriorSpec> for GaussianPrior {
    type Error = IndiError;

    fn try_from(spec: GaussianPriorSpec) -> Result<Self> {
        GaussianPrior::new(spec.c, spec.sigma_c)
    }
}

impl From<GaussianPrior> for GaussianPriorSpec {
    fn from(p: GaussianPrior) -> Self {
        GaussianPriorSpec {
            c: p.c,
            sigma_c: p.sigma_c,
        }
    }
}

fn check_mixture_inputs(
    prior: &GaussianMixturePrior,
    deg: &LinearDegradation,
    x_t: &State,
    t: TimeStep,
) -> Result<f64> {
    ensure_dim(prior.dim(), deg.h().dim())?;
    ensure_dim(prior.dim(), x_t.dim())?;
    let sigma_t = t.get() * deg.sigma();
    if sigma_t <= 0.0 {
        return Err(IndiError::Domain(format!(
            "posterior degenerates to a point mass (t = {}, sigma = {})",
            t.get(),
            deg.sigma()
        )));
    }
    Ok(sigma_t)
}

/// Log-weights `ln w_i - |x_t - H_t c_i|^2 / (2 sigma_t^2)`; zero-weight modes
/// get `-inf`.
fn mixture_log_kernels(
    prior: &GaussianMixturePrior,
    h: &SquareMatrix,
    x_t: &[f64],
    t: f64,
    sigma_t: f64,
) -> Vec<f64> {
    let inv_two_var = 0.5 / (sigma_t * sigma_t);
    prior
        .modes()
        .iter()
        .zip(prior.weights())
        .map(|(c, &w)| {
            if w == 0.0 {
                return f64::NEG_INFINITY;
            }
            let hc = h.apply_interpolated(t, c.as_slice());
            let sq: f64 = x_t.iter().zip(&hc).map(|(a, b)| (a - b) * (a - b)).sum();
            w.ln() - sq * inv_two_var
        })
        .collect()
}

fn softmax_in_place(logits: &mut [f64]) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for l in logits.iter_mut() {
        *l = (*l - max).exp();
        total += *l;
    }
    for l in logits.iter_mut() {
        *l /= total;
    }
    max + total.ln()
}

/// Posterior probabilities of each mode given `x_t`, noise std `sigma_t`.
pub(crate) fn mixture_responsibilities(
    prior: &GaussianMixturePrior,
    h: &SquareMatrix,
    x_t: &[f64],
    t: f64,
    sigma_t: f64,
) -> Vec<f64> {
    let mut logits = mixture_log_kernels(prior, h, x_t, t, sigma_t);
    softmax_in_place(&mut logits);
    logits
}

fn weighted_modes(prior: &GaussianMixturePrior, resp: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; prior.dim()];
    for (c, r) in prior.modes().iter().zip(resp) {
        for (o, ci) in out.iter_mut().zip(c.as_slice()) {
            *o += r * ci;
        }
    }
    out
}

/// `E[x_0 | x_t]` for the discrete prior observed through `H` with noise
/// `sigma`, where `x_t = H_t x + sigma_t n`, `H_t = (1 - t) I + t H` and
/// `sigma_t = t sigma`.
///
/// Kernel ratios are evaluated in log space with max-subtraction, so far from
/// every mode the result falls back to the nearest (kernel-dominant) mode.
pub fn mixture_posterior_mean(
    prior: &GaussianMixturePrior,
    deg: &LinearDegradation,
    x_t: &State,
    t: TimeStep,
) -> Result<State> {
    let sigma_t = check_mixture_inputs(prior, deg, x_t, t)?;
    let resp = mixture_responsibilities(prior, deg.h(), x_t.as_slice(), t.get(), sigma_t);
    Ok(State::from_trusted(weighted_modes(prior, &resp)))
}

/// Natural log of the normalized marginal density
/// `p(x_t) = sum_i w_i N(x_t; H_t c_i, sigma_t^2 I)`. Finite wherever some
/// weight is positive, even where the density itself underflows.
pub fn mixture_log_marginal_density(
    prior: &GaussianMixturePrior,
    deg: &LinearDegradation,
    x_t: &State,
    t: TimeStep,
) -> Result<f64> {
    let sigma_t = check_mixture_inputs(prior, deg, x_t, t)?;
    let mut logits = mixture_log_kernels(prior, deg.h(), x_t.as_slice(), t.get(), sigma_t);
    let log_sum = softmax_in_place(&mut logits);
    let n = x_t.dim() as f64;
    Ok(log_sum - 0.5 * n * (2.0 * PI * sigma_t * sigma_t).ln())
}

/// The normalized marginal density of `x_t`. Underflows to exactly `0.0`
/// far (tens of `sigma_t`) from every mode; use
/// [`mixture_log_marginal_density`] when a strictly positive value is needed.
pub fn mixture_marginal_density(
    prior: &GaussianMixturePrior,
    deg: &LinearDegradation,
    x_t: &State,
    t: TimeStep,
) -> Result<f64> {
    mixture_log_marginal_density(prior, deg, x_t, t).map(f64::exp)
}

/// `E[x_s | x_t] = (1 - s/t) E[x_0 | x_t] + (s/t) x_t` for `0 <= s <= t`.
pub fn posterior_mean_at_s(
    x0_estimate: &State,
    x_t: &State,
    s: TimeStep,
    t: TimeStep,
) -> Result<State> {
    x0_estimate.ensure_same_dim(x_t)?;
    let (s, t) = (s.get(), t.get());
    if t == 0.0 || s > t {
        return Err(IndiError::Domain(format!(
            "need 0 <= s <= t and t > 0 (s = {s}, t = {t})"
        )));
    }
    let r = s / t;
    Ok(State::from_trusted(
        x0_estimate
            .as_slice()
            .iter()
            .zip(x_t.as_slice())
            .map(|(e, x)| (1.0 - r) * e + r * x)
            .collect(),
    ))
}

fn check_sigma_n(sigma_n: f64) -> Result<()> {
    if sigma_n.is_finite() && sigma_n > 0.0 {
        Ok(())
    } else {
        Err(IndiError::Domain(format!(
            "noise std must be > 0, got {sigma_n}"
        )))
    }
}

/// MMSE (= MAP) denoiser for a Gaussian prior:
/// `(sigma_c^2 y + sigma_N^2 c) / (sigma_c^2 + sigma_N^2)`.
pub fn gaussian_mmse(prior: &GaussianPrior, sigma_n: f64, y: &State) -> Result<State> {
    check_sigma_n(sigma_n)?;
    ensure_dim(prior.dim(), y.dim())?;
    Ok(State::from_trusted(gaussian_shrink(
        prior,
        sigma_n * sigma_n,
        y.as_slice(),
    )))
}

fn gaussian_shrink(prior: &GaussianPrior, noise_var: f64, y: &[f64]) -> Vec<f64> {
    let vc = prior.sigma_c() * prior.sigma_c();
    let denom = vc + noise_var;
    y.iter()
        .zip(prior.c().as_slice())
        .map(|(yi, ci)| (vc * yi + noise_var * ci) / denom)
        .collect()
}

/// Exact solution of the residual flow for Gaussian-prior denoising:
/// `x_t = c + (y - c) sqrt((t^2 + a^2) / (1 + a^2))`, `a = sigma_c / sigma_N`.
pub fn gaussian_indi_trajectory(
    prior: &GaussianPrior,
    sigma_n: f64,
    y: &State,
    t: TimeStep,
) -> Result<State> {
    check_sigma_n(sigma_n)?;
    ensure_dim(prior.dim(), y.dim())?;
    let a2 = (prior.sigma_c() / sigma_n).powi(2);
    let t = t.get();
    let gain = ((t * t + a2) / (1.0 + a2)).sqrt();
    Ok(State::from_trusted(
        y.as_slice()
            .iter()
            .zip(prior.c().as_slice())
            .map(|(yi, ci)| ci + (yi - ci) * gain)
            .collect(),
    ))
}

/// Score `grad log p_t(x_t) = (E[x_0 | x_t] - x_t) / sigma_t^2` from a
/// denoiser output (Tweedie's formula).
pub fn score_from_denoiser(estimate: &State, x_t: &State, sigma_t: f64) -> Result<State> {
    estimate.ensure_same_dim(x_t)?;
    if !(sigma_t.is_finite() && sigma_t > 0.0) {
        return Err(IndiError::Domain(format!(
            "sigma_t must be > 0, got {sigma_t}"
        )));
    }
    let inv = 1.0 / (sigma_t * sigma_t);
    State::checked(
        estimate
            .as_slice()
            .iter()
            .zip(x_t.as_slice())
            .map(|(e, x)| (e - x) * inv)
            .collect(),
        0,
        "score",
    )
}

/// Total noise variance carried by `x_t`: the observation noise `t sigma`
/// plus the schedule perturbation `t eps_t`, treated as independent.
fn effective_noise_var(sigma: f64, schedule: Option<&NoiseSchedule>, t: TimeStep) -> Result<f64> {
    let eps = match schedule {
        Some(s) => s.epsilon(t)?,
        None => 0.0,
    };
    let tt = t.get();
    Ok(tt * tt * (sigma * sigma + eps * eps))
}

/// Ideal estimator for the discrete-prior world.
#[derive(Clone, Debug)]
pub struct MixtureOracle {
    prior: GaussianMixturePrior,
    deg: LinearDegradation,
    schedule: Option<NoiseSchedule>,
}

impl MixtureOracle {
    pub fn new(prior: GaussianMixturePrior, deg: LinearDegradation) -> Result<Self> {
        ensure_dim(prior.dim(), deg.h().dim())?;
        Ok(MixtureOracle {
            prior,
            deg,
            schedule: None,
        })
    }

    /// Accounts for extra schedule noise: the kernel width becomes
    /// `t sqrt(sigma^2 + eps_t^2)`.
    pub fn with_schedule(mut self, schedule: NoiseSchedule) -> Self {
        self.schedule = (!schedule.is_noiseless()).then_some(schedule);
        self
    }

    pub fn prior(&self) -> &GaussianMixturePrior {
        &self.prior
    }

    pub fn degradation(&self) -> &LinearDegradation {
        &self.deg
    }
}

impl Estimator for MixtureOracle {
    fn dim(&self) -> usize {
        self.prior.dim()
    }

    fn estimate(&self, x_t: &State, t: TimeStep) -> Result<State> {
        ensure_dim(self.dim(), x_t.dim())?;
        let var = effective_noise_var(self.deg.sigma(), self.schedule.as_ref(), t)?;
        if var <= 0.0 {
            return Err(IndiError::Domain(format!(
                "mixture posterior degenerates at t = {} with zero noise",
                t.get()
            )));
        }
        let resp = mixture_responsibilities(
            &self.prior,
            self.deg.h(),
            x_t.as_slice(),
            t.get(),
            var.sqrt(),
        );
        Ok(State::from_trusted(weighted_modes(&self.prior, &resp)))
    }
}

/// Ideal estimator for Gaussian-prior denoising:
/// `E[x | x_t] = (sigma_c^2 x_t + t^2 sigma_N^2 c) / (sigma_c^2 + t^2 sigma_N^2)`.
#[derive(Clone, Debug)]
pub struct GaussianOracle {
    prior: GaussianPrior,
    sigma_n: f64,
    schedule: Option<NoiseSchedule>,
}

impl GaussianOracle {
    pub fn new(prior: GaussianPrior, sigma_n: f64) -> Result<Self> {
        check_sigma_n(sigma_n)?;
        Ok(GaussianOracle {
            prior,
            sigma_n,
            schedule: None,
        })
    }

    pub fn with_schedule(mut self, schedule: NoiseSchedule) -> Self {
        self.schedule = (!schedule.is_noiseless()).then_some(schedule);
        self
    }

    pub fn prior(&self) -> &GaussianPrior {
        &self.prior
    }

    pub fn sigma_n(&self) -> f64 {
        self.sigma_n
    }

    /// Noise std carried by `x_t`.
    pub fn sigma_t(&self, t: TimeStep) -> Result<f64> {
        effective_noise_var(self.sigma_n, self.schedule.as_ref(), t).map(f64::sqrt)
    }
}

impl Estimator for GaussianOracle {
    fn dim(&self) -> usize {
        self.prior.dim()
    }

    fn estimate(&self, x_t: &State, t: TimeStep) -> Result<State> {
        ensure_dim(self.dim(), x_t.dim())?;
        let var = effective_noise_var(self.sigma_n, self.schedule.as_ref(), t)?;
        Ok(State::from_trusted(gaussian_shrink(
            &self.prior,
            var,
            x_t.as_slice(),
        )))
    }
}
