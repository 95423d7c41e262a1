//! Time-conditioned regressor `F(x_t, t) ~ x_0`, its training loop and the
//! training-time distributions.

pub mod checkpoint;
mod mlp;
mod time_dist;
mod train;

pub use mlp::{predict, Activation, MlpRegressor, PNorm};
pub use time_dist::{sample_time, TimeDistribution};
pub use train::{draw_batch, smoothed, train, Adam, PairGenerator, TrainConfig, TrainOutcome};
