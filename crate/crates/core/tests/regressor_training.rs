use indi_core::harness::{run_experiment, ExperimentConfig, ExperimentKind, World, WorldConfig};
use indi_core::oracles::{Estimator, GaussianOracle, GaussianPrior};
use indi_core::regressor::{
    checkpoint, predict, smoothed, train, Activation, MlpRegressor, PNorm, PairGenerator,
    TimeDistribution, TrainConfig,
};
use indi_core::rng::{seeded, SimRng};
use indi_core::{NoiseSchedule, PairedSample, Result, State, TimeStep};
use rand::Rng;

fn ts(t: f64) -> TimeStep {
    TimeStep::new(t).unwrap()
}

/// No degradation at all: `y = x`.
struct IdentityWorld;

impl PairGenerator for IdentityWorld {
    fn dim(&self) -> usize {
        2
    }

    fn generate(&self, rng: &mut SimRng) -> Result<PairedSample> {
        let x = State::new(vec![
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ])?;
        PairedSample::new(x.clone(), x)
    }
}

fn config(p: PNorm, learning_rate: f64, batch_size: usize, steps: usize, seed: u64) -> TrainConfig {
    TrainConfig {
        p_norm: p,
        learning_rate,
        batch_size,
        steps,
        time_dist: TimeDistribution::Linear0,
        schedule: NoiseSchedule::noiseless(),
        seed,
    }
}

#[test]
fn identity_task_is_learned() {
    let model = MlpRegressor::for_dim(2, &[32, 32], Activation::Tanh, 1).unwrap();
    let out = train(model, &IdentityWorld, &config(PNorm::L2, 3e-3, 64, 3000, 2)).unwrap();
    let tail = smoothed(&out.loss_curve, 100);
    assert!(tail.last().unwrap() < &tail[99]);
    let mut rng = seeded(99);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let x = IdentityWorld.generate(&mut rng).unwrap().x().clone();
        let t = rng.random_range(0.0..=1.0);
        worst = worst.max(predict(&out.model, &x, ts(t)).unwrap().distance(&x));
    }
    assert!(worst < 0.05, "worst held-out error {worst}");
}

#[test]
fn squared_loss_recovers_the_gaussian_posterior_mean() {
    let world = World::from_config(&WorldConfig::Gaussian {
        c: vec![0.0],
        sigma_c: 1.0,
        sigma_n: 1.0,
    })
    .unwrap();
    let model = MlpRegressor::for_dim(1, &[32, 32], Activation::Tanh, 3).unwrap();
    let out = train(model, &world, &config(PNorm::L2, 1e-3, 512, 10_000, 4)).unwrap();
    let tail = smoothed(&out.loss_curve, 100);
    assert!(tail.last().unwrap() < &tail[99]);

    let oracle = GaussianOracle::new(
        GaussianPrior::new(State::new(vec![0.0]).unwrap(), 1.0).unwrap(),
        1.0,
    )
    .unwrap();
    // Points are drawn the way training sees them: x_t = (1 - t) x + t y.
    let mut rng = seeded(5);
    let mut worst: f64 = 0.0;
    for _ in 0..500 {
        let pair = world.generate(&mut rng).unwrap();
        let t: f64 = rng.random_range(0.05..=1.0);
        let x_t = (1.0 - t) * pair.x().as_slice()[0] + t * pair.y().as_slice()[0];
        let x = State::new(vec![x_t]).unwrap();
        let got = out.model.estimate(&x, ts(t)).unwrap().as_slice()[0];
        let want = oracle.estimate(&x, ts(t)).unwrap().as_slice()[0];
        worst = worst.max((got - want).abs());
    }
    assert!(worst < 0.1, "max deviation from the posterior mean {worst}");

    // The optimum shrinks x_t by 1 / (1 + t^2), so t has to matter.
    let x = State::new(vec![1.5]).unwrap();
    let early = out.model.estimate(&x, ts(0.1)).unwrap().as_slice()[0];
    let late = out.model.estimate(&x, ts(0.9)).unwrap().as_slice()[0];
    assert!(
        (early - late).abs() > 1e-3,
        "t = 0.1 gives {early}, t = 0.9 gives {late}"
    );

    // A checkpoint reproduces the model bit for bit.
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("gauss.ckpt");
    checkpoint::save(&out.model, &path).unwrap();
    let back = checkpoint::load(&path).unwrap();
    assert_eq!(back, out.model);
    assert_eq!(
        back.estimate(&x, ts(0.3)).unwrap(),
        out.model.estimate(&x, ts(0.3)).unwrap()
    );
}

#[test]
fn time_distribution_sweep_trains_every_variant() {
    let mut cfg = ExperimentConfig::preset(ExperimentKind::SweepPt);
    let train_cfg = cfg.train.as_mut().unwrap();
    train_cfg.steps = 400;
    train_cfg.hidden = vec![16, 16];
    cfg.eval.inputs = 50;
    let dir = tempfile::tempdir().unwrap();
    let report = run_experiment(&cfg, 0, Some(dir.path())).unwrap();

    let keys = ["linear_0", "linear_a", "bias_t1", "bias_t0", "bias_t0_t1"];
    let variants: Vec<&str> = report.rows.iter().map(|r| r.variant.as_str()).collect();
    assert_eq!(variants, keys);
    assert_eq!(report.checkpoints.len(), 5);
    let mut params = Vec::new();
    for key in keys {
        let model = checkpoint::load(&dir.path().join(format!("model_{key}.ckpt"))).unwrap();
        params.push(model.params().to_vec());
    }
    for i in 0..5 {
        for j in i + 1..5 {
            assert_ne!(
                params[i], params[j],
                "variants {i} and {j} trained identical weights"
            );
        }
    }
    for curve in &report.loss_curves {
        assert!(curve.values.iter().all(|v| v.is_finite()));
        let s = smoothed(&curve.values, 100);
        assert!(
            s.last().unwrap() < &s[0],
            "{} did not improve",
            curve.variant
        );
    }
}
