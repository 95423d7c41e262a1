use std::f64::consts::FRAC_PI_2;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{IndiError, Result};
use crate::state::TimeStep;

/// Training distributions `p(t)` over the interpolation time.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TimeDistribution {
    /// `U[0, 1]`.
    #[default]
    #[serde(rename = "linear_0")]
    Linear0,
    /// `U[0, 1]` with weight `1 / (1 + a)` plus an atom at `t = 1` with
    /// weight `a / (1 + a)`.
    LinearA { a: f64 },
    /// `sin(s pi / 2)`, biased toward `t = 1`.
    #[serde(rename = "bias_t1")]
    BiasT1,
    /// `sin((s - 1) pi / 2) + 1`, biased toward `t = 0`.
    #[serde(rename = "bias_t0")]
    BiasT0,
    /// `sin(s pi / 2)^2`, mass piled at both ends.
    #[serde(rename = "bias_t0_t1")]
    BiasT0T1,
}

impl TimeDistribution {
    pub fn linear_a(a: f64) -> Result<Self> {
        if a.is_finite() && a >= 0.0 {
            Ok(TimeDistribution::LinearA { a })
        } else {
            Err(IndiError::InvalidInput(format!(
                "linear_a needs a >= 0, got {a}"
            )))
        }
    }

    /// The five kinds with `linear_a` at `a = 1`.
    pub fn all_kinds() -> [TimeDistribution; 5] {
        [
            TimeDistribution::Linear0,
            TimeDistribution::LinearA { a: 1.0 },
            TimeDistribution::BiasT1,
            TimeDistribution::BiasT0,
            TimeDistribution::BiasT0T1,
        ]
    }

    /// Short key used in reports.
    pub fn key(&self) -> &'static str {
        match self {
            TimeDistribution::Linear0 => "linear_0",
            TimeDistribution::LinearA { .. } => "linear_a",
            TimeDistribution::BiasT1 => "bias_t1",
            TimeDistribution::BiasT0 => "bias_t0",
            TimeDistribution::BiasT0T1 => "bias_t0_t1",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            TimeDistribution::LinearA { a } => Self::linear_a(*a).map(|_| ()),
            _ => Ok(()),
        }
    }

    /// Maps a uniform `s` in `[0, 1]` through the continuous part of the
    /// distribution (identity for the linear kinds).
    pub fn warp(&self, s: f64) -> f64 {
        let t = match self {
            TimeDistribution::Linear0 | TimeDistribution::LinearA { .. } => s,
            TimeDistribution::BiasT1 => (s * FRAC_PI_2).sin(),
            TimeDistribution::BiasT0 => ((s - 1.0) * FRAC_PI_2).sin() + 1.0,
            TimeDistribution::BiasT0T1 => (s * FRAC_PI_2).sin().powi(2),
        };
        t.clamp(0.0, 1.0)
    }
}

/// Draws one training time. For `linear_a` the atom at 1 is selected by a
/// Bernoulli draw first; otherwise a single uniform `s` is warped.
pub fn sample_time<R: Rng + ?Sized>(dist: &TimeDistribution, rng: &mut R) -> TimeStep {
    if let TimeDistribution::LinearA { a } = dist {
        let atom = a / (1.0 + a);
        if rng.random::<f64>() < atom {
            return TimeStep::ONE;
        }
    }
    let s: f64 = rng.random();
    TimeStep::new(dist.warp(s)).expect("warp output is clamped to [0, 1]")
}
