//! Inference: the iterative restoration sampler, two alternative discrete
//! update rules used for comparison, and explicit integrators for the
//! residual-flow ODE `dx_t/dt = (x_t - F(x_t, t)) / t`.
//!
//! All samplers use the constant grid `t_k = k / N`, walk `k = N, ..., 1` and
//! evaluate the estimator once per step at `t_k`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::degradation::NoiseSchedule;
use crate::error::{IndiError, Result};
use crate::oracles::Estimator;
use crate::rng::{seeded, standard_normal_vec};
use crate::state::{ensure_dim, State, TimeStep};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    /// Number of steps `N`; the step size is `1 / N`.
    pub steps: usize,
    #[serde(default)]
    pub schedule: NoiseSchedule,
    pub seed: u64,
    #[serde(default)]
    pub record_trajectory: bool,
}

impl SamplerConfig {
    pub fn new(steps: usize, schedule: NoiseSchedule, seed: u64) -> Self {
        SamplerConfig {
            steps,
            schedule,
            seed,
            record_trajectory: false,
        }
    }

    pub fn noiseless(steps: usize) -> Self {
        Self::new(steps, NoiseSchedule::noiseless(), 0)
    }

    pub fn recording(mut self) -> Self {
        self.record_trajectory = true;
        self
    }

    pub fn delta(&self) -> f64 {
        1.0 / self.steps as f64
    }

    fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(IndiError::InvalidInput(
                "sampler needs at least one step".into(),
            ));
        }
        Ok(())
    }
}

/// Iterates of one inference run, ordered from `t = 1` down to `t = 0`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub points: Vec<(f64, State)>,
}

impl Trajectory {
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|(t, _)| *t)
    }

    pub fn first(&self) -> Option<&(f64, State)> {
        self.points.first()
    }

    pub fn last(&self) -> Option<&(f64, State)> {
        self.points.last()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    Indi,
    Naive,
    ColdDiffusion,
}

impl SamplerKind {
    pub const ALL: [SamplerKind; 3] = [
        SamplerKind::Indi,
        SamplerKind::Naive,
        SamplerKind::ColdDiffusion,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SamplerKind::Indi => "indi",
            SamplerKind::Naive => "naive",
            SamplerKind::ColdDiffusion => "cold_diffusion",
        }
    }
}

/// Result of one restoration.
#[derive(Clone, Debug, PartialEq)]
pub struct Restoration {
    pub output: State,
    pub trajectory: Option<Trajectory>,
    /// Norm of the initial iterate `x_1`.
    pub initial_norm: f64,
    /// Largest iterate norm seen along the run.
    pub peak_norm: f64,
}

impl Restoration {
    /// True when some iterate grew past `factor` times the initial norm.
    pub fn exceeded(&self, factor: f64) -> bool {
        // A zero start can only "diverge" if it leaves a tiny neighbourhood.
        let base = self.initial_norm.max(f64::MIN_POSITIVE);
        self.peak_norm > factor * base
    }
}

struct Recorder {
    trajectory: Option<Trajectory>,
    initial_norm: f64,
    peak_norm: f64,
}

impl Recorder {
    fn start(record: bool, x1: &State) -> Self {
        let norm = x1.norm();
        let trajectory = record.then(|| Trajectory {
            points: vec![(1.0, x1.clone())],
        });
        Recorder {
            trajectory,
            initial_norm: norm,
            peak_norm: norm,
        }
    }

    fn push(&mut self, t: f64, x: &State) {
        self.peak_norm = self.peak_norm.max(x.norm());
        if let Some(tr) = &mut self.trajectory {
            tr.points.push((t, x.clone()));
        }
    }

    fn finish(self, output: State) -> Restoration {
        Restoration {
            output,
            trajectory: self.trajectory,
            initial_norm: self.initial_norm,
            peak_norm: self.peak_norm,
        }
    }
}

fn grid_time(k: usize, n: usize) -> f64 {
    k as f64 / n as f64
}

/// `x_1 = y + eps_1 n`.
fn initial_iterate<R: Rng + ?Sized>(
    y: &State,
    schedule: &NoiseSchedule,
    rng: &mut R,
) -> Result<State> {
    let eps1 = schedule.epsilon(TimeStep::ONE)?;
    if eps1 == 0.0 {
        return Ok(y.clone());
    }
    let noise = standard_normal_vec(rng, y.dim());
    State::checked(
        y.as_slice()
            .iter()
            .zip(noise)
            .map(|(v, n)| v + eps1 * n)
            .collect(),
        0,
        "initial iterate",
    )
}

fn call_estimator<E: Estimator + ?Sized>(
    estimator: &E,
    x: &State,
    t: f64,
    step: usize,
) -> Result<State> {
    let out = estimator
        .estimate(x, TimeStep::new(t)?)
        .map_err(|e| match e {
            IndiError::NonFinite { what, .. } => IndiError::NonFinite { step, what },
            other => other,
        })?;
    ensure_dim(x.dim(), out.dim())?;
    if out.as_slice().iter().all(|v| v.is_finite()) {
        Ok(out)
    } else {
        Err(IndiError::NonFinite {
            step,
            what: "estimator output".into(),
        })
    }
}

/// One explicit Euler step of the residual flow, `x - h (x - F) / t`.
fn euler_update(x: &[f64], f: &[f64], t: f64, h: f64) -> Vec<f64> {
    x.iter()
        .zip(f)
        .map(|(xi, fi)| xi - h * ((xi - fi) / t))
        .collect()
}

/// Iterative restoration:
///
/// ```text
/// x_1 = y + eps_1 n
/// x_{t-d} = (d/t) F(x_t, t) + (1 - d/t) x_t + (t-d) sqrt(eps_{t-d}^2 - eps_t^2) z
/// ```
///
/// with a fresh `z` drawn after each estimator call. The deterministic part
/// is evaluated as the Euler step `x - d (x - F) / t`, and the last step
/// (weight `d/t = 1`) returns the estimate itself.
pub fn indi_restore<E: Estimator + ?Sized>(
    estimator: &E,
    y: &State,
    config: &SamplerConfig,
) -> Result<Restoration> {
    config.validate()?;
    ensure_dim(estimator.dim(), y.dim())?;
    let n = config.steps;
    let delta = config.delta();
    let mut rng = seeded(config.seed);
    let mut x = initial_iterate(y, &config.schedule, &mut rng)?;
    let mut rec = Recorder::start(config.record_trajectory, &x);
    for k in (1..=n).rev() {
        let step = n - k;
        let t = grid_time(k, n);
        let t_prev = grid_time(k - 1, n);
        let f = call_estimator(estimator, &x, t, step)?;
        let mut next = if k == 1 {
            f.into_vec()
        } else {
            euler_update(x.as_slice(), f.as_slice(), t, delta)
        };
        let std = config.schedule.increment_std(t_prev, t)?;
        if std > 0.0 {
            for (v, z) in next.iter_mut().zip(standard_normal_vec(&mut rng, y.dim())) {
                *v += std * z;
            }
        }
        x = State::checked(next, step, "iterate")?;
        rec.push(t_prev, &x);
    }
    Ok(rec.finish(x))
}

/// Restoration that re-degrades the current estimate along the straight
/// path: `x_{t-d} = (1 - t + d) F(x_t, t) + (t - d) y`.
pub fn naive_restore<E: Estimator + ?Sized>(
    estimator: &E,
    y: &State,
    config: &SamplerConfig,
) -> Result<Restoration> {
    run_anchored(estimator, y, config, |_x, f, y, t, d| {
        f.iter()
            .zip(y)
            .map(|(fi, yi)| (1.0 - t + d) * fi + (t - d) * yi)
            .collect()
    })
}

/// Improved cold-diffusion sampling adapted to the straight degradation
/// path: `x_{t-d} = x_t + d (F(x_t, t) - y)`.
pub fn cold_diffusion_restore<E: Estimator + ?Sized>(
    estimator: &E,
    y: &State,
    config: &SamplerConfig,
) -> Result<Restoration> {
    run_anchored(estimator, y, config, |x, f, y, _t, d| {
        x.iter()
            .zip(f)
            .zip(y)
            .map(|((xi, fi), yi)| xi + d * (fi - yi))
            .collect()
    })
}

/// Dispatches on [`SamplerKind`].
pub fn restore<E: Estimator + ?Sized>(
    kind: SamplerKind,
    estimator: &E,
    y: &State,
    config: &SamplerConfig,
) -> Result<Restoration> {
    match kind {
        SamplerKind::Indi => indi_restore(estimator, y, config),
        SamplerKind::Naive => naive_restore(estimator, y, config),
        SamplerKind::ColdDiffusion => cold_diffusion_restore(estimator, y, config),
    }
}

/// Shared loop for the noise-free comparison samplers: only the initial
/// iterate is perturbed, by `eps_1`.
fn run_anchored<E, U>(
    estimator: &E,
    y: &State,
    config: &SamplerConfig,
    update: U,
) -> Result<Restoration>
where
    E: Estimator + ?Sized,
    U: Fn(&[f64], &[f64], &[f64], f64, f64) -> Vec<f64>,
{
    config.validate()?;
    ensure_dim(estimator.dim(), y.dim())?;
    let n = config.steps;
    let delta = config.delta();
    let mut rng = seeded(config.seed);
    let mut x = initial_iterate(y, &config.schedule, &mut rng)?;
    let mut rec = Recorder::start(config.record_trajectory, &x);
    for k in (1..=n).rev() {
        let step = n - k;
        let t = grid_time(k, n);
        let f = call_estimator(estimator, &x, t, step)?;
        let next = update(x.as_slice(), f.as_slice(), y.as_slice(), t, delta);
        x = State::checked(next, step, "iterate")?;
        rec.push(grid_time(k - 1, n), &x);
    }
    Ok(rec.finish(x))
}

/// The residual-flow vector field `(x_t - F(x_t, t)) / t`.
pub fn residual_flow_rhs<E: Estimator + ?Sized>(
    estimator: &E,
    x_t: &State,
    t: TimeStep,
) -> Result<State> {
    if t.get() == 0.0 {
        return Err(IndiError::Domain(
            "residual flow is singular at t = 0".into(),
        ));
    }
    let f = call_estimator(estimator, x_t, t.get(), 0)?;
    State::checked(
        x_t.as_slice()
            .iter()
            .zip(f.as_slice())
            .map(|(x, fi)| (x - fi) / t.get())
            .collect(),
        0,
        "residual flow",
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OdeMethod {
    Euler,
    Heun,
}

/// Integrates the residual flow backward from `x_1 = y` to `t_min` with
/// step `1 / N` (the last step is shortened to land on `t_min`), then applies
/// the terminal map `x_0 = F(x_{t_min}, t_min)`.
///
/// With `t_min = 1 / N` and the Euler method this reproduces the noiseless
/// [`indi_restore`] bit for bit.
pub fn ode_restore<E: Estimator + ?Sized>(
    estimator: &E,
    y: &State,
    method: OdeMethod,
    steps: usize,
    t_min: f64,
) -> Result<State> {
    if steps == 0 {
        return Err(IndiError::InvalidInput(
            "ODE integration needs at least one step".into(),
        ));
    }
    if !(t_min > 0.0 && t_min <= 1.0) {
        return Err(IndiError::InvalidInput(format!(
            "t_min must lie in (0, 1], got {t_min}"
        )));
    }
    ensure_dim(estimator.dim(), y.dim())?;
    let h = 1.0 / steps as f64;
    let mut x = y.clone();
    let mut k = steps;
    let mut step = 0;
    loop {
        let t = grid_time(k, steps);
        if t <= t_min {
            break;
        }
        // Land exactly on t_min when the next grid point would overshoot it.
        let next_on_grid = grid_time(k - 1, steps);
        let (t_next, dt) = if next_on_grid < t_min {
            (t_min, t - t_min)
        } else {
            (next_on_grid, h)
        };
        let f = call_estimator(estimator, &x, t, step)?;
        let next = match method {
            OdeMethod::Euler => euler_update(x.as_slice(), f.as_slice(), t, dt),
            OdeMethod::Heun => {
                let slope1: Vec<f64> = x
                    .as_slice()
                    .iter()
                    .zip(f.as_slice())
                    .map(|(xi, fi)| (xi - fi) / t)
                    .collect();
                let pred = State::checked(
                    x.as_slice()
                        .iter()
                        .zip(&slope1)
                        .map(|(xi, s)| xi - dt * s)
                        .collect(),
                    step,
                    "Heun predictor",
                )?;
                let f2 = call_estimator(estimator, &pred, t_next, step)?;
                x.as_slice()
                    .iter()
                    .zip(&slope1)
                    .zip(pred.as_slice().iter().zip(f2.as_slice()))
                    .map(|((xi, s1), (pi, fi))| xi - 0.5 * dt * (s1 + (pi - fi) / t_next))
                    .collect()
            }
        };
        x = State::checked(next, step, "ODE iterate")?;
        step += 1;
        if t_next == t_min {
            break;
        }
        k -= 1;
    }
    call_estimator(estimator, &x, t_min, step)
}
