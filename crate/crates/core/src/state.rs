//! Signal vectors and interpolation times.

use serde::{Deserialize, Serialize};

use crate::error::{IndiError, Result};

/// A finite real vector of dimension `d >= 1`.
///
/// Used for clean signals, degraded observations and every intermediate
/// iterate. Construction rejects empty vectors and non-finite entries, so any
/// `State` in hand is safe to feed to an estimator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct State(Vec<f64>);

impl State {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(IndiError::InvalidInput(
                "state must have dimension >= 1".into(),
            ));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(IndiError::InvalidInput(format!(
                "state entry {i} is not finite ({})",
                values[i]
            )));
        }
        Ok(State(values))
    }

    pub fn zeros(dim: usize) -> Result<Self> {
        Self::new(vec![0.0; dim])
    }

    /// Wraps values already known to be finite and non-empty.
    pub(crate) fn from_trusted(values: Vec<f64>) -> Self {
        debug_assert!(!values.is_empty() && values.iter().all(|v| v.is_finite()));
        State(values)
    }

    /// Wraps freshly computed values, reporting the step at which a
    /// non-finite entry appeared.
    pub(crate) fn checked(values: Vec<f64>, step: usize, what: &str) -> Result<Self> {
        if values.iter().all(|v| v.is_finite()) {
            Ok(State(values))
        } else {
            Err(IndiError::NonFinite {
                step,
                what: what.to_string(),
            })
        }
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn distance(&self, other: &State) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub(crate) fn ensure_same_dim(&self, other: &State) -> Result<()> {
        ensure_dim(self.dim(), other.dim())
    }
}

impl TryFrom<Vec<f64>> for State {
    type Error = IndiError;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        State::new(values)
    }
}

impl From<State> for Vec<f64> {
    fn from(s: State) -> Self {
        s.0
    }
}

pub(crate) fn ensure_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(IndiError::DimensionMismatch { expected, got })
    }
}

/// An interpolation time in `[0, 1]`: 0 is clean, 1 is fully degraded.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct TimeStep(f64);

impl TimeStep {
    pub const ZERO: TimeStep = TimeStep(0.0);
    pub const ONE: TimeStep = TimeStep(1.0);

    pub fn new(t: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&t) {
            Ok(TimeStep(t))
        } else {
            Err(IndiError::InvalidInput(format!(
                "time step {t} outside [0, 1]"
            )))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for TimeStep {
    type Error = IndiError;

    fn try_from(t: f64) -> Result<Self> {
        TimeStep::new(t)
    }
}

impl From<TimeStep> for f64 {
    fn from(t: TimeStep) -> Self {
        t.0
    }
}

/// A (clean target, degraded observation) training pair.
#[derive(Clone, Debug, PartialEq)]
pub struct PairedSample {
    x: State,
    y: State,
}

impl PairedSample {
    pub fn new(x: State, y: State) -> Result<Self> {
        x.ensure_same_dim(&y)?;
        Ok(PairedSample { x, y })
    }

    pub fn x(&self) -> &State {
        &self.x
    }

    pub fn y(&self) -> &State {
        &self.y
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_empty_and_non_finite() {
        assert!(State::new(vec![]).is_err());
        assert!(State::new(vec![1.0, f64::NAN]).is_err());
        assert!(State::new(vec![f64::INFINITY]).is_err());
        assert!(State::new(vec![0.0]).is_ok());
    }

    #[test]
    fn time_step_bounds() {
        assert!(TimeStep::new(-1e-12).is_err());
        assert!(TimeStep::new(1.0 + 1e-12).is_err());
        assert!(TimeStep::new(f64::NAN).is_err());
        assert_eq!(TimeStep::new(0.5).unwrap().get(), 0.5);
    }

    #[test]
    fn paired_sample_dims_must_match() {
        let x = State::new(vec![1.0, 2.0]).unwrap();
        let y = State::new(vec![1.0]).unwrap();
        assert!(matches!(
            PairedSample::new(x, y),
            Err(IndiError::DimensionMismatch {
                expected: 2,
                got: 1
            })
        ));
    }

    #[test]
    fn serde_rejects_nan_state() {
        let err = serde_json::from_str::<State>("[]");
        assert!(err.is_err());
        let ok: State = serde_json::from_str("[1.5, -2]").unwrap();
        assert_eq!(ok.as_slice(), &[1.5, -2.0]);
    }
}
