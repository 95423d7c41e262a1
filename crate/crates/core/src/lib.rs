//! Iterative restoration by inverting a straight-line degradation path.
//!
//! A clean signal `x` and its degraded observation `y` are joined by
//! `x_t = (1 - t) x + t y`. Restoration starts at `x_1 = y` and repeatedly
//! takes a small step toward an estimate of `x_0`:
//!
//! ```text
//! x_{t-d} = (d/t) F(x_t, t) + (1 - d/t) x_t
//! ```
//!
//! where `F` approximates `E[x_0 | x_t]`. The crate provides
//!
//! - [`degradation`]: the forward path and its noise schedules,
//! - [`oracles`]: closed-form posterior means for two toy worlds,
//! - [`regressor`]: a small trainable `F` with hand-written backprop,
//! - [`samplers`]: the restoration loop, two comparison samplers and
//!   ODE integrators for the continuous-time limit,
//! - [`metrics`]: distortion and distribution statistics,
//! - [`harness`]: configurable experiments with CSV/JSON reports.

pub mod degradation;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod oracles;
pub mod regressor;
pub mod rng;
pub mod samplers;
pub mod state;

pub use degradation::{
    forward_degrade_noisy, forward_interpolate, injected_noise_std, schedule_epsilon, NoiseSchedule,
};
pub use error::{IndiError, Result};
pub use oracles::{
    Estimator, GaussianMixturePrior, GaussianOracle, GaussianPrior, LinearDegradation,
    MixtureOracle,
};
pub use samplers::{
    cold_diffusion_restore, indi_restore, naive_restore, ode_restore, SamplerConfig, SamplerKind,
};
pub use state::{PairedSample, State, TimeStep};
