use serde::{Deserialize, Serialize};

use crate::degradation::{forward_degrade_noisy, NoiseSchedule};
use crate::error::{IndiError, Result};
use crate::rng::{derive_seed, seeded, SimRng};
use crate::state::{ensure_dim, PairedSample};

use super::mlp::{MlpRegressor, PNorm};
use super::time_dist::{sample_time, TimeDistribution};

/// Source of `(x, y)` training pairs.
pub trait PairGenerator: Sync {
    fn dim(&self) -> usize;

    fn generate(&self, rng: &mut SimRng) -> Result<PairedSample>;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default = "default_p_norm")]
    pub p_norm: PNorm,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub steps: usize,
    #[serde(default)]
    pub time_dist: TimeDistribution,
    #[serde(default)]
    pub schedule: NoiseSchedule,
    pub seed: u64,
}

fn default_p_norm() -> PNorm {
    PNorm::L1
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(IndiError::config("train.learning_rate", "must be > 0"));
        }
        if self.batch_size == 0 {
            return Err(IndiError::config("train.batch_size", "must be >= 1"));
        }
        self.time_dist
            .validate()
            .map_err(|e| IndiError::config("train.time_dist", e.to_string()))
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: MlpRegressor,
    /// Mean batch loss at every step, before that step's update.
    pub loss_curve: Vec<f64>,
}

/// Adaptive-moment first-order optimizer with a fixed learning rate.
#[derive(Clone, Debug)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
}

impl Adam {
    pub fn new(lr: f64, n_params: usize) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            step: 0,
        }
    }

    pub fn update(&mut self, params: &mut [f64], grad: &[f64]) {
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step);
        let bc2 = 1.0 - self.beta2.powi(self.step);
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grad)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

/// Draws one training batch: `x_t = (1 - t) x + t y + t eps_t n` with `t`
/// from the configured distribution, paired with the target `x`.
pub fn draw_batch<G: PairGenerator + ?Sized>(
    data: &G,
    config: &TrainConfig,
    rng: &mut SimRng,
) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    let mut batch = Vec::with_capacity(config.batch_size);
    for _ in 0..config.batch_size {
        let pair = data.generate(rng)?;
        ensure_dim(data.dim(), pair.x().dim())?;
        let t = sample_time(&config.time_dist, rng);
        let x_t = forward_degrade_noisy(pair.x(), pair.y(), t, &config.schedule, rng)?;
        let mut input = x_t.into_vec();
        input.push(t.get());
        batch.push((input, pair.x().as_slice().to_vec()));
    }
    Ok(batch)
}

/// Minimizes the empirical loss `E |F((1-t) x + t y + t eps_t n; t) - x|_p`
/// with Adam. Step `k` draws its batch from the stream
/// `derive_seed(config.seed, "train-batch", k)`.
pub fn train<G: PairGenerator + ?Sized>(
    model: MlpRegressor,
    data: &G,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    ensure_dim(model.state_dim(), data.dim())?;
    let mut model = model;
    if config.steps == 0 {
        return Ok(TrainOutcome {
            model,
            loss_curve: Vec::new(),
        });
    }
    let mut adam = Adam::new(config.learning_rate, model.params().len());
    let mut loss_curve = Vec::with_capacity(config.steps);
    for step in 0..config.steps {
        let batch_seed = derive_seed(config.seed, "train-batch", step as u64);
        let mut rng = seeded(batch_seed);
        let batch = draw_batch(data, config, &mut rng)?;
        let (loss, grad) = model.batch_loss_and_gradient(&batch, config.p_norm);
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(IndiError::TrainingDiverged { step, batch_seed });
        }
        loss_curve.push(loss);
        adam.update(model.params_mut(), &grad);
    }
    model.set_seed(config.seed);
    Ok(TrainOutcome { model, loss_curve })
}

/// Trailing moving average with the given window (shorter at the start).
pub fn smoothed(curve: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    let mut out = Vec::with_capacity(curve.len());
    let mut acc = 0.0;
    for (i, v) in curve.iter().enumerate() {
        acc += v;
        if i >= window {
            acc -= curve[i - window];
        }
        out.push(acc / (i + 1).min(window) as f64);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regressor::mlp::Activation;
    use crate::state::State;

    struct ConstantWorld;

    impl PairGenerator for ConstantWorld {
        fn dim(&self) -> usize {
            2
        }

        fn generate(&self, rng: &mut SimRng) -> Result<PairedSample> {
            use rand::Rng;
            let y = State::new(vec![
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
            ])?;
            PairedSample::new(State::new(vec![0.5, -0.3])?, y)
        }
    }

    fn cfg(steps: usize) -> TrainConfig {
        TrainConfig {
            p_norm: PNorm::L2,
            learning_rate: 3e-3,
            batch_size: 32,
            steps,
            time_dist: TimeDistribution::Linear0,
            schedule: NoiseSchedule::noiseless(),
            seed: 5,
        }
    }

    #[test]
    fn zero_steps_is_a_no_op() {
        let m = MlpRegressor::for_dim(2, &[8], Activation::Tanh, 1).unwrap();
        let out = train(m.clone(), &ConstantWorld, &cfg(0)).unwrap();
        assert_eq!(out.model, m);
        assert!(out.loss_curve.is_empty());
    }

    #[test]
    fn constant_world_is_learned() {
        let m = MlpRegressor::for_dim(2, &[16], Activation::Tanh, 1).unwrap();
        let out = train(m, &ConstantWorld, &cfg(1500)).unwrap();
        let tail = smoothed(&out.loss_curve, 100);
        assert!(
            *tail.last().unwrap() < 1e-2,
            "final {}",
            tail.last().unwrap()
        );
        assert!(tail.last().unwrap() < &tail[99]);
        assert_eq!(out.model.seed(), 5);
    }

    #[test]
    fn training_is_deterministic() {
        let m = MlpRegressor::for_dim(2, &[8], Activation::Tanh, 1).unwrap();
        let a = train(m.clone(), &ConstantWorld, &cfg(50)).unwrap();
        let b = train(m, &ConstantWorld, &cfg(50)).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.loss_curve, b.loss_curve);
    }

    #[test]
    fn diverging_training_reports_step_and_seed() {
        let m = MlpRegressor::for_dim(2, &[8], Activation::Relu, 1).unwrap();
        let mut c = cfg(200);
        c.learning_rate = 1e300;
        match train(m, &ConstantWorld, &c) {
            Err(IndiError::TrainingDiverged { step, batch_seed }) => {
                assert_eq!(batch_seed, derive_seed(5, "train-batch", step as u64));
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn invalid_config_rejected() {
        let m = MlpRegressor::for_dim(2, &[8], Activation::Tanh, 1).unwrap();
        let mut c = cfg(10);
        c.batch_size = 0;
        assert!(train(m.clone(), &ConstantWorld, &c).is_err());
        let mut c = cfg(10);
        c.learning_rate = 0.0;
        assert!(train(m, &ConstantWorld, &c).is_err());
    }

    #[test]
    fn smoothing_window() {
        assert_eq!(smoothed(&[1.0, 3.0, 5.0, 7.0], 2), vec![1.0, 2.0, 4.0, 6.0]);
    }
}
