//! Forward degradation: the straight-line path from a clean signal `x` to its
//! degraded observation `y`, optionally perturbed by schedule noise.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{IndiError, Result};
use crate::rng::standard_normal_vec;
use crate::state::{State, TimeStep};

/// Governs the stochastic perturbation `eps_t` along the degradation path.
///
/// `eps_t` is non-negative and non-increasing in `t`; both properties are
/// checked when the schedule is built, so the noise increments injected by
/// the samplers always have a non-negative variance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScheduleSpec", into = "ScheduleSpec")]
pub struct NoiseSchedule {
    kind: ScheduleKind,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ScheduleKind {
    /// `eps_t = eps`: noise enters once, at the start of inference.
    Constant(f64),
    /// `eps_t = eps / sqrt(t)`: the perturbation is a Brownian motion.
    Brownian(f64),
    /// Piecewise-linear through `(t, eps_t)` knots sorted by `t`.
    Table(Vec<(f64, f64)>),
}

/// Serialized form of a [`NoiseSchedule`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleSpec {
    Constant { epsilon: f64 },
    Brownian { epsilon: f64 },
    Table { points: Vec<(f64, f64)> },
}

impl NoiseSchedule {
    pub fn constant(epsilon: f64) -> Result<Self> {
        check_epsilon(epsilon)?;
        Ok(NoiseSchedule {
            kind: ScheduleKind::Constant(epsilon),
        })
    }

    pub fn brownian(epsilon: f64) -> Result<Self> {
        check_epsilon(epsilon)?;
        Ok(NoiseSchedule {
            kind: ScheduleKind::Brownian(epsilon),
        })
    }

    /// The noiseless schedule, `Constant(0)`.
    pub fn noiseless() -> Self {
        NoiseSchedule {
            kind: ScheduleKind::Constant(0.0),
        }
    }

    pub fn table(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(IndiError::InvalidInput(
                "table schedule needs at least one knot".into(),
            ));
        }
        for &(t, eps) in &points {
            if !(0.0..=1.0).contains(&t) {
                return Err(IndiError::InvalidInput(format!(
                    "table knot time {t} outside [0, 1]"
                )));
            }
            check_epsilon(eps)?;
        }
        for pair in points.windows(2) {
            let ((t0, e0), (t1, e1)) = (pair[0], pair[1]);
            if t1 <= t0 {
                return Err(IndiError::InvalidInput(format!(
                    "table knot times must strictly increase ({t0} then {t1})"
                )));
            }
            if e1 > e0 {
                return Err(IndiError::InvalidInput(format!(
                    "eps_t must be non-increasing in t (eps({t0}) = {e0} < eps({t1}) = {e1})"
                )));
            }
        }
        Ok(NoiseSchedule {
            kind: ScheduleKind::Table(points),
        })
    }

    pub fn kind(&self) -> &ScheduleKind {
        &self.kind
    }

    pub fn is_noiseless(&self) -> bool {
        match &self.kind {
            ScheduleKind::Constant(e) | ScheduleKind::Brownian(e) => *e == 0.0,
            ScheduleKind::Table(points) => points.iter().all(|&(_, e)| e == 0.0),
        }
    }

    /// Evaluates `eps_t`.
    pub fn epsilon(&self, t: TimeStep) -> Result<f64> {
        let t = t.get();
        match &self.kind {
            ScheduleKind::Constant(e) => Ok(*e),
            ScheduleKind::Brownian(e) => {
                if t == 0.0 {
                    Err(IndiError::Domain(
                        "Brownian schedule eps/sqrt(t) is undefined at t = 0".into(),
                    ))
                } else {
                    Ok(e / t.sqrt())
                }
            }
            ScheduleKind::Table(points) => interpolate_table(points, t),
        }
    }

    /// Standard deviation of the fresh noise added when stepping from `t` to
    /// `t_prev < t`, i.e. `t_prev * sqrt(eps_{t_prev}^2 - eps_t^2)`.
    pub(crate) fn increment_std(&self, t_prev: f64, t: f64) -> Result<f64> {
        if t_prev == 0.0 {
            return Ok(0.0);
        }
        let e_prev = self.epsilon(TimeStep::new(t_prev)?)?;
        let e_t = self.epsilon(TimeStep::new(t)?)?;
        let radicand = e_prev * e_prev - e_t * e_t;
        if radicand < 0.0 {
            return Err(IndiError::Invariant(format!(
                "noise schedule increased between t = {t_prev} and t = {t} (radicand {radicand})"
            )));
        }
        Ok(t_prev * radicand.sqrt())
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon.is_finite() && epsilon >= 0.0 {
        Ok(())
    } else {
        Err(IndiError::InvalidInput(format!(
            "noise level must be finite and >= 0, got {epsilon}"
        )))
    }
}

fn interpolate_table(points: &[(f64, f64)], t: f64) -> Result<f64> {
    let (first, last) = (points[0], points[points.len() - 1]);
    if t < first.0 || t > last.0 {
        return Err(IndiError::Domain(format!(
            "t = {t} outside table range [{}, {}]",
            first.0, last.0
        )));
    }
    // First knot with time >= t.
    let hi = points.partition_point(|&(tk, _)| tk < t);
    let (t1, e1) = points[hi];
    if t1 == t || hi == 0 {
        return Ok(e1);
    }
    let (t0, e0) = points[hi - 1];
    let w = (t - t0) / (t1 - t0);
    Ok(e0 + w * (e1 - e0))
}

impl TryFrom<ScheduleSpec> for NoiseSchedule {
    type Error = IndiError;

    fn try_from(spec: ScheduleSpec) -> Result<Self> {
        match spec {
            ScheduleSpec::Constant { epsilon } => NoiseSchedule::constant(epsilon),
            ScheduleSpec::Brownian { epsilon } => NoiseSchedule::brownian(epsilon),
            ScheduleSpec::Table { points } => NoiseSchedule::table(points),
        }
    }
}

impl From<NoiseSchedule> for ScheduleSpec {
    fn from(s: NoiseSchedule) -> Self {
        match s.kind {
            ScheduleKind::Constant(epsilon) => ScheduleSpec::Constant { epsilon },
            ScheduleKind::Brownian(epsilon) => ScheduleSpec::Brownian { epsilon },
            ScheduleKind::Table(points) => ScheduleSpec::Table { points },
        }
    }
}

impl Default for NoiseSchedule {
    fn default() -> Self {
        NoiseSchedule::noiseless()
    }
}

/// `(1 - t) x + t y`, elementwise.
pub fn forward_interpolate(x: &State, y: &State, t: TimeStep) -> Result<State> {
    x.ensure_same_dim(y)?;
    Ok(State::from_trusted(interpolate(
        x.as_slice(),
        y.as_slice(),
        t.get(),
    )))
}

pub(crate) fn interpolate(x: &[f64], y: &[f64], t: f64) -> Vec<f64> {
    x.iter()
        .zip(y)
        .map(|(a, b)| (1.0 - t) * a + t * b)
        .collect()
}

/// `(1 - t) x + t y + t eps_t n` with `n` standard normal per coordinate, so
/// the injected noise has per-coordinate standard deviation `t eps_t`.
///
/// At `t = 0` the noise term vanishes for every schedule (for the Brownian
/// schedule `t eps_t = sqrt(t) eps -> 0`), and no random numbers are drawn.
pub fn forward_degrade_noisy<R: Rng + ?Sized>(
    x: &State,
    y: &State,
    t: TimeStep,
    schedule: &NoiseSchedule,
    rng: &mut R,
) -> Result<State> {
    x.ensure_same_dim(y)?;
    let mut out = interpolate(x.as_slice(), y.as_slice(), t.get());
    let std = path_noise_std(schedule, t)?;
    if std > 0.0 {
        let noise = standard_normal_vec(rng, out.len());
        for (o, n) in out.iter_mut().zip(noise) {
            *o += std * n;
        }
    }
    Ok(State::from_trusted(out))
}

/// Per-coordinate std of the path noise at `t`: `t * eps_t`.
pub(crate) fn path_noise_std(schedule: &NoiseSchedule, t: TimeStep) -> Result<f64> {
    if t.get() == 0.0 {
        return Ok(0.0);
    }
    Ok(t.get() * schedule.epsilon(t)?)
}

/// Evaluates `eps_t` for the given schedule.
pub fn schedule_epsilon(schedule: &NoiseSchedule, t: TimeStep) -> Result<f64> {
    schedule.epsilon(t)
}

/// Standard deviation `(t - delta) sqrt(eps_{t-delta}^2 - eps_t^2)` of the
/// fresh noise injected by one inference step of size `delta` from `t`.
pub fn injected_noise_std(schedule: &NoiseSchedule, t: TimeStep, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta <= t.get()) {
        return Err(IndiError::InvalidInput(format!(
            "step size {delta} must satisfy 0 < delta <= t = {}",
            t.get()
        )));
    }
    schedule.increment_std((t.get() - delta).max(0.0), t.get())
}
