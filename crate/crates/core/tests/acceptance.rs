//! Acceptance suite. Each test prints one `PASS` / `FAIL` line, then asserts.

use std::f64::consts::{FRAC_2_PI, SQRT_2};
use std::io::Write;
use std::time::Instant;

use indi_core::harness::{
    emit_report, run_experiment, ExperimentConfig, ExperimentKind, Format, Row,
};
use indi_core::oracles::{
    gaussian_indi_trajectory, mixture_posterior_mean, posterior_mean_at_s, Estimator,
    GaussianMixturePrior, GaussianOracle, GaussianPrior, LinearDegradation, MixtureOracle,
    SquareMatrix,
};
use indi_core::regressor::{sample_time, Activation, MlpRegressor, PNorm, TimeDistribution};
use indi_core::rng::seeded;
use indi_core::samplers::{
    indi_restore, ode_restore, restore, OdeMethod, SamplerConfig, SamplerKind,
};
use indi_core::{State, TimeStep};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

fn verdict(id: u32, pass: bool, detail: String) {
    let line = format!(
        "{} criterion {id:>2}: {detail}\n",
        if pass { "PASS" } else { "FAIL" }
    );
    // Written past the test harness's capture so every line shows.
    let _ = std::io::stdout().write_all(line.as_bytes());
    assert!(pass, "criterion {id} failed: {detail}");
}

fn st(v: &[f64]) -> State {
    State::new(v.to_vec()).unwrap()
}

fn ts(t: f64) -> TimeStep {
    TimeStep::new(t).unwrap()
}

struct RandomWorld {
    modes: Vec<Vec<f64>>,
    weights: Vec<f64>,
    h: Vec<Vec<f64>>,
    sigma: f64,
}

impl RandomWorld {
    fn draw(rng: &mut impl Rng) -> Self {
        let d = rng.random_range(1..=3);
        let k = rng.random_range(1..=5);
        let modes = (0..k)
            .map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let weights = raw.iter().map(|w| w / total).collect();
        let h = (0..d)
            .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        RandomWorld {
            modes,
            weights,
            h,
            sigma: rng.random_range(0.3..2.0),
        }
    }

    fn dim(&self) -> usize {
        self.h.len()
    }

    fn h_at(&self, t: f64, v: &[f64]) -> Vec<f64> {
        (0..self.dim())
            .map(|i| {
                (1.0 - t) * v[i] + t * self.h[i].iter().zip(v).map(|(a, b)| a * b).sum::<f64>()
            })
            .collect()
    }

    fn library(&self) -> (GaussianMixturePrior, LinearDegradation) {
        let prior = GaussianMixturePrior::new(
            self.modes.iter().map(|m| st(m)).collect(),
            self.weights.clone(),
        )
        .unwrap();
        let deg =
            LinearDegradation::new(SquareMatrix::from_rows(self.h.clone()).unwrap(), self.sigma)
                .unwrap();
        (prior, deg)
    }

    /// `E[x_s | x_t] = sum_i r_i (H_s c_i + (s/t)(x_t - H_t c_i))`, computed
    /// directly from the densities.
    fn conditional_mean(&self, x_t: &[f64], s: f64, t: f64) -> Vec<f64> {
        let var = (t * self.sigma).powi(2);
        let sq: Vec<f64> = self
            .modes
            .iter()
            .map(|c| {
                self.h_at(t, c)
                    .iter()
                    .zip(x_t)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum()
            })
            .collect();
        let min = sq.iter().copied().fold(f64::INFINITY, f64::min);
        let dens: Vec<f64> = sq
            .iter()
            .zip(&self.weights)
            .map(|(q, w)| w * (-(q - min) / (2.0 * var)).exp())
            .collect();
        let z: f64 = dens.iter().sum();
        let mut out = vec![0.0; self.dim()];
        for (c, p) in self.modes.iter().zip(&dens) {
            let hs = self.h_at(s, c);
            let ht = self.h_at(t, c);
            for i in 0..self.dim() {
                out[i] += p / z * (hs[i] + s / t * (x_t[i] - ht[i]));
            }
        }
        out
    }

    fn sample_x_t(&self, t: f64, rng: &mut impl Rng) -> Vec<f64> {
        let c = &self.modes[rng.random_range(0..self.modes.len())];
        self.h_at(t, c)
            .into_iter()
            .map(|v| {
                let e: f64 = StandardNormal.sample(rng);
                v + t * self.sigma * e
            })
            .collect()
    }
}

#[test]
fn c01_intermediate_posterior_identity() {
    let started = Instant::now();
    let mut rng = seeded(101);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let w = RandomWorld::draw(&mut rng);
        let (prior, deg) = w.library();
        let t = rng.random_range(0.05..=1.0);
        let s = rng.random_range(0.0..=t);
        let x_t = w.sample_x_t(t, &mut rng);
        let e0 = mixture_posterior_mean(&prior, &deg, &st(&x_t), ts(t)).unwrap();
        let got = posterior_mean_at_s(&e0, &st(&x_t), ts(s), ts(t)).unwrap();
        let want = w.conditional_mean(&x_t, s, t);
        for (g, e) in got.as_slice().iter().zip(&want) {
            worst = worst.max((g - e).abs());
        }
    }

    // Monte-Carlo: likelihood-weighted prior draws, x_s from the shared noise.
    let mut worst_z: f64 = 0.0;
    for _ in 0..5 {
        let w = RandomWorld::draw(&mut rng);
        let (prior, deg) = w.library();
        let (t, s) = (0.7, 0.3);
        let x_t = w.sample_x_t(t, &mut rng);
        let e0 = mixture_posterior_mean(&prior, &deg, &st(&x_t), ts(t)).unwrap();
        let lib = posterior_mean_at_s(&e0, &st(&x_t), ts(s), ts(t)).unwrap();
        let n = 100_000;
        let var = (t * w.sigma).powi(2);
        let mut draws = Vec::with_capacity(n);
        for _ in 0..n {
            let (_, x) = prior.sample(&mut rng);
            let x = x.as_slice();
            let ht = w.h_at(t, x);
            let sq: f64 = ht.iter().zip(&x_t).map(|(a, b)| (a - b) * (a - b)).sum();
            let noise: Vec<f64> = x_t
                .iter()
                .zip(&ht)
                .map(|(a, b)| (a - b) / (t * w.sigma))
                .collect();
            let x_s: Vec<f64> = w
                .h_at(s, x)
                .iter()
                .zip(&noise)
                .map(|(a, e)| a + s * w.sigma * e)
                .collect();
            draws.push(((-sq / (2.0 * var)).exp(), x_s));
        }
        let z: f64 = draws.iter().map(|d| d.0).sum();
        for i in 0..w.dim() {
            let mean: f64 = draws.iter().map(|(wt, v)| wt * v[i]).sum::<f64>() / z;
            let se = (draws
                .iter()
                .map(|(wt, v)| (wt * (v[i] - mean)).powi(2))
                .sum::<f64>())
            .sqrt()
                / z;
            // A dominant mode makes the estimate nearly deterministic; allow
            // for summation rounding (1e5 terms) on top of the sampling error.
            let diff = ((lib.as_slice()[i] - mean).abs() - 1e-10).max(0.0);
            worst_z = worst_z.max(if diff == 0.0 { 0.0 } else { diff / se });
        }
    }
    let secs = started.elapsed().as_secs_f64();
    verdict(
        1,
        worst <= 1e-10 && worst_z <= 3.0 && secs < 60.0,
        format!("max analytic error {worst:.2e} (<= 1e-10), max MC deviation {worst_z:.2} SE (<= 3), {secs:.1}s"),
    );
}

#[test]
fn c02_gaussian_closed_form() {
    let started = Instant::now();
    let oracle = GaussianOracle::new(GaussianPrior::new(st(&[0.0]), 1.0).unwrap(), 1.0).unwrap();
    let y = st(&[2.0]);
    let want = 2.0f64.sqrt();
    let at = |n: usize| {
        indi_restore(&oracle, &y, &SamplerConfig::noiseless(n))
            .unwrap()
            .output
            .as_slice()[0]
    };
    let x1000 = at(1000);
    let grid = [10usize, 30, 100, 300, 1000, 3000, 10_000];
    let pts: Vec<(f64, f64)> = grid
        .iter()
        .map(|&n| ((n as f64).ln(), (at(n) - want).abs().ln()))
        .collect();
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
        / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    let closed = gaussian_indi_trajectory(oracle.prior(), 1.0, &y, TimeStep::ZERO)
        .unwrap()
        .as_slice()[0];
    let secs = started.elapsed().as_secs_f64();
    verdict(
        2,
        (x1000 - SQRT_2).abs() <= 2e-3 && (-1.3..=-0.7).contains(&slope) && (closed - want).abs() < 1e-15 && secs < 60.0,
        format!("N=1000 gives {x1000:.6} (1.414214 +- 2e-3), convergence slope {slope:.3} in [-1.3, -0.7], {secs:.1}s"),
    );
}

#[test]
fn c03_distribution_preservation() {
    let started = Instant::now();
    let mut details = Vec::new();
    let mut pass = true;
    for (c, sc, sn) in [(0.0, 1.0, 1.0), (0.5, 1.0, 0.5)] {
        let prior = GaussianPrior::new(st(&[c]), sc).unwrap();
        let oracle = GaussianOracle::new(prior.clone(), sn).unwrap();
        let mut rng = seeded(303);
        let n = 10_000;
        let outs: Vec<f64> = (0..n)
            .map(|_| {
                let x = prior.sample(&mut rng).as_slice()[0];
                let e: f64 = StandardNormal.sample(&mut rng);
                let y = st(&[x + sn * e]);
                indi_restore(&oracle, &y, &SamplerConfig::noiseless(1000))
                    .unwrap()
                    .output
                    .as_slice()[0]
            })
            .collect();
        let mean = outs.iter().sum::<f64>() / n as f64;
        let var = outs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let z_mean = (mean - c).abs() / (sc / (n as f64).sqrt());
        let z_var = (var - sc * sc).abs() / (sc * sc * (2.0 / (n - 1) as f64).sqrt());
        pass &= z_mean <= 3.0 && z_var <= 3.0;
        details.push(format!(
            "c={c} sigma_c={sc} sigma_N={sn}: mean {z_mean:.2} SE, var {z_var:.2} SE"
        ));
    }
    let secs = started.elapsed().as_secs_f64();
    pass &= secs < 120.0;
    verdict(
        3,
        pass,
        format!("{} (<= 3 SE), {secs:.1}s", details.join("; ")),
    );
}

#[test]
fn c04_toy_worlds_reach_modes() {
    let started = Instant::now();
    let mut details = Vec::new();
    let mut pass = true;
    for kind in [ExperimentKind::Toy2dA, ExperimentKind::Toy2dB] {
        let mut cfg = ExperimentConfig::preset(kind);
        cfg.eval.inputs = 1000;
        cfg.eval.mode_tolerance = 1e-2;
        cfg.sampler.steps = vec![100];
        let report = run_experiment(&cfg, 0, None).unwrap();
        let hit = report.rows[0].mode_hit_rate;
        pass &= hit >= 0.99;

        // One step from the symmetric observation returns the mode average.
        let w = indi_core::harness::World::from_config(&cfg.world).unwrap();
        let oracle = w.oracle(&cfg.sampler.schedule).unwrap();
        let out = indi_restore(&oracle, &st(&[0.0, 0.0]), &SamplerConfig::noiseless(1))
            .unwrap()
            .output;
        let min_dist = w
            .mixture_prior()
            .unwrap()
            .modes()
            .iter()
            .map(|m| m.distance(&out))
            .fold(f64::INFINITY, f64::min);
        pass &= min_dist > 0.0;
        details.push(format!(
            "{}: {:.1}% within 1e-2, N=1 min mode distance {min_dist:.3}",
            kind.as_str(),
            100.0 * hit
        ));
    }
    let secs = started.elapsed().as_secs_f64();
    pass &= secs < 60.0;
    verdict(4, pass, format!("{}, {secs:.1}s", details.join("; ")));
}

#[test]
fn c05_sampler_matches_euler() {
    let oracle = MixtureOracle::new(
        GaussianMixturePrior::unit_square_corners(),
        LinearDegradation::new(
            SquareMatrix::from_rows(vec![vec![1.0, 0.2], vec![0.0, 0.5]]).unwrap(),
            0.8,
        )
        .unwrap(),
    )
    .unwrap();
    let mut worst: f64 = 0.0;
    let mut rng = seeded(505);
    for n in [5usize, 50] {
        for _ in 0..20 {
            let y = st(&[rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)]);
            let sampler = indi_restore(&oracle, &y, &SamplerConfig::noiseless(n))
                .unwrap()
                .output;
            // Explicit Euler on dx/dt = (x - F) / t from t = 1 down to 1/N,
            // then the terminal estimate.
            let delta = 1.0 / n as f64;
            let mut x = y.as_slice().to_vec();
            for k in (2..=n).rev() {
                let t = k as f64 / n as f64;
                let f = oracle.estimate(&st(&x), ts(t)).unwrap();
                x = x
                    .iter()
                    .zip(f.as_slice())
                    .map(|(xi, fi)| xi - delta * (xi - fi) / t)
                    .collect();
            }
            let euler = oracle.estimate(&st(&x), ts(delta)).unwrap();
            let ode = ode_restore(&oracle, &y, OdeMethod::Euler, n, delta).unwrap();
            for ((a, b), c) in sampler
                .as_slice()
                .iter()
                .zip(euler.as_slice())
                .zip(ode.as_slice())
            {
                let scale = 1.0f64.max(a.abs());
                worst = worst.max((a - b).abs() / scale).max((a - c).abs() / scale);
            }
        }
    }
    verdict(
        5,
        worst <= 4.0 * f64::EPSILON,
        format!("max elementwise difference {worst:.2e} (<= 4 ulp) for N in {{5, 50}}"),
    );
}

#[test]
fn c06_tweedie_consistency() {
    let (c, sc, sn) = (0.4, 1.3, 0.7);
    let oracle = GaussianOracle::new(GaussianPrior::new(st(&[c, -c]), sc).unwrap(), sn).unwrap();
    let mut rng = seeded(606);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let t = rng.random_range(0.01..=1.0);
        let x = [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)];
        let sigma_t = t * sn;
        let est = oracle.estimate(&st(&x), ts(t)).unwrap();
        // Score of the noisy marginal N(c, sigma_c^2 + sigma_t^2).
        for (i, ci) in [c, -c].iter().enumerate() {
            let score = -(x[i] - ci) / (sc * sc + sigma_t * sigma_t);
            let lib_score = indi_core::oracles::score_from_denoiser(&est, &st(&x), sigma_t)
                .unwrap()
                .as_slice()[i];
            let tweedie = x[i] + sigma_t * sigma_t * score;
            worst = worst
                .max((tweedie - est.as_slice()[i]).abs())
                .max((x[i] + sigma_t * sigma_t * lib_score - est.as_slice()[i]).abs());
        }
    }
    verdict(
        6,
        worst <= 1e-10,
        format!("max |x_t + sigma_t^2 score - E[x|x_t]| = {worst:.2e} over 1000 points (<= 1e-10)"),
    );
}

#[test]
fn c07_backprop_matches_finite_differences() {
    let mut rng = seeded(707);
    let mut worst: f64 = 0.0;
    for net in 0..50 {
        let d = rng.random_range(1..=4);
        let mut sizes = vec![d + 1];
        for _ in 0..rng.random_range(1..=2) {
            sizes.push(rng.random_range(2..=8));
        }
        sizes.push(d);
        let act = if net % 2 == 0 {
            Activation::Tanh
        } else {
            Activation::Relu
        };
        let p = if net % 4 < 2 { PNorm::L2 } else { PNorm::L1 };
        let mut model = MlpRegressor::new(sizes, act, rng.random()).unwrap();
        // Fresh models have zero biases, which can put ReLU units exactly on
        // their kink; random biases keep the check at differentiable points.
        for w in model.params_mut() {
            *w = rng.random_range(-1.0..1.0);
        }
        let batch: Vec<(Vec<f64>, Vec<f64>)> = (0..4)
            .map(|_| {
                let mut input: Vec<f64> = (0..d).map(|_| rng.random_range(-1.5..1.5)).collect();
                input.push(rng.random_range(0.0..1.0));
                let out = model.predict_raw(&input[..d], input[d]).unwrap();
                // Targets at least 0.1 away from the output keep L1 off its kink.
                let target = out
                    .iter()
                    .map(|o| {
                        let gap = rng.random_range(0.1..1.0);
                        if rng.random::<bool>() {
                            o + gap
                        } else {
                            o - gap
                        }
                    })
                    .collect();
                (input, target)
            })
            .collect();
        let (_, grad) = model.batch_loss_and_gradient(&batch, p);
        let h = 1e-5;
        let mut fd = vec![0.0; grad.len()];
        for (i, g) in fd.iter_mut().enumerate() {
            let orig = model.params()[i];
            model.params_mut()[i] = orig + h;
            let up = model.batch_loss(&batch, p);
            model.params_mut()[i] = orig - h;
            let down = model.batch_loss(&batch, p);
            model.params_mut()[i] = orig;
            *g = (up - down) / (2.0 * h);
        }
        let diff: f64 = grad
            .iter()
            .zip(&fd)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        let norm = grad
            .iter()
            .map(|a| a * a)
            .sum::<f64>()
            .sqrt()
            .max(fd.iter().map(|a| a * a).sum::<f64>().sqrt());
        worst = worst.max(if norm > 0.0 { diff / norm } else { diff });
    }
    verdict(
        7,
        worst < 1e-4,
        format!("max relative gradient error {worst:.2e} over 50 networks, p = 1 and 2 (< 1e-4)"),
    );
}

/// KS distance of draws to a CDF with an optional atom at 1.
fn ks_to(draws: &mut [f64], cdf: impl Fn(f64) -> f64, cdf_left: impl Fn(f64) -> f64) -> f64 {
    draws.sort_by(|a, b| a.total_cmp(b));
    let n = draws.len() as f64;
    let mut d: f64 = 0.0;
    for &x in draws.iter() {
        let hi = draws.partition_point(|v| *v <= x) as f64 / n;
        let lo = draws.partition_point(|v| *v < x) as f64 / n;
        d = d.max((hi - cdf(x)).abs()).max((lo - cdf_left(x)).abs());
    }
    d
}

#[test]
fn c08_training_time_distributions() {
    type Case = (TimeDistribution, fn(f64) -> f64);
    let cases: [Case; 4] = [
        (TimeDistribution::Linear0, |t| t),
        (TimeDistribution::BiasT1, |t| FRAC_2_PI * t.asin()),
        (TimeDistribution::BiasT0, |t| FRAC_2_PI * (1.0 - t).acos()),
        (TimeDistribution::BiasT0T1, |t| FRAC_2_PI * t.sqrt().asin()),
    ];
    let mut rng = seeded(808);
    let mut details = Vec::new();
    let mut pass = true;
    for (dist, cdf) in cases {
        let mut draws: Vec<f64> = (0..100_000)
            .map(|_| sample_time(&dist, &mut rng).get())
            .collect();
        let d = ks_to(&mut draws, cdf, cdf);
        pass &= d < 0.01;
        details.push(format!("{} {d:.4}", dist.key()));
    }
    let a = TimeDistribution::linear_a(1.0).unwrap();
    let mut draws: Vec<f64> = (0..100_000)
        .map(|_| sample_time(&a, &mut rng).get())
        .collect();
    let d = ks_to(
        &mut draws,
        |t| if t >= 1.0 { 1.0 } else { 0.5 * t },
        |t| 0.5 * t.min(1.0),
    );
    pass &= d < 0.01;
    details.push(format!("linear_a {d:.4}"));
    let atom = (0..1_000_000)
        .filter(|_| sample_time(&a, &mut rng).get() == 1.0)
        .count() as f64
        / 1e6;
    pass &= (atom - 0.5).abs() <= 0.002;
    verdict(
        8,
        pass,
        format!(
            "KS {} (< 0.01); linear_a(1) atom mass {atom:.4} (0.5 +- 0.002)",
            details.join(", ")
        ),
    );
}

fn row<'a>(rows: &'a [Row], sampler: &str, n: usize) -> &'a Row {
    rows.iter()
        .find(|r| r.sampler == sampler && r.n_steps == n)
        .unwrap()
}

#[test]
fn c09_sampler_comparison() {
    let mut cfg = ExperimentConfig::preset(ExperimentKind::SamplerCompare);
    cfg.sampler.steps = vec![1, 100, 200, 1000];
    cfg.eval.inputs = 500;
    let report = run_experiment(&cfg, 0, None).unwrap();
    let mut naive_worse = true;
    let mut cmp = Vec::new();
    for n in [100, 200, 1000] {
        let (naive, indi) = (row(&report.rows, "naive", n), row(&report.rows, "indi", n));
        naive_worse &= naive.is_divergent() || naive.mse > indi.mse;
        cmp.push(format!(
            "N={n} naive {:.6} vs indi {:.6}",
            naive.mse, indi.mse
        ));
    }

    let world = indi_core::harness::World::from_config(&cfg.world).unwrap();
    let oracle = world.oracle(&cfg.sampler.schedule).unwrap();
    let mut rng = seeded(909);
    let mut same_at_one = true;
    let mut cold_bounded = !row(&report.rows, "cold_diffusion", 1000).is_divergent();
    for _ in 0..200 {
        let y = st(&[rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)]);
        let c1 = SamplerConfig::noiseless(1);
        same_at_one &= restore(SamplerKind::Naive, &oracle, &y, &c1)
            .unwrap()
            .output
            == restore(SamplerKind::Indi, &oracle, &y, &c1).unwrap().output;
        let cold = restore(
            SamplerKind::ColdDiffusion,
            &oracle,
            &y,
            &SamplerConfig::noiseless(1000),
        )
        .unwrap();
        // Each step moves by d |F - y|, so the total drift is at most max |F - y|.
        cold_bounded &= cold.output.norm() <= 2.0 * y.norm() + 2.0f64.sqrt();
    }
    verdict(
        9,
        naive_worse && same_at_one && cold_bounded,
        format!(
            "naive divergent or worse at N>=100: {naive_worse} ({}); identical at N=1: {same_at_one}; cold diffusion bounded at N=1000: {cold_bounded}",
            cmp.join(", ")
        ),
    );
}

#[test]
fn c10_steps_trade_distortion_for_distribution() {
    let cfg = ExperimentConfig::preset(ExperimentKind::SweepSteps);
    let report = run_experiment(&cfg, 0, None).unwrap();
    let at_one = row(&report.rows, "indi", 1);
    let argmin = report
        .rows
        .iter()
        .min_by(|a, b| a.mse.total_cmp(&b.mse))
        .unwrap()
        .n_steps;
    let later: Vec<&Row> = report.rows.iter().filter(|r| r.n_steps >= 50).collect();
    let ks_ok = !later.is_empty() && later.iter().all(|r| r.ks < at_one.ks);
    let ks_text: Vec<String> = report
        .rows
        .iter()
        .map(|r| format!("N={} {:.4}", r.n_steps, r.ks))
        .collect();
    verdict(
        10,
        argmin == 1 && ks_ok,
        format!(
            "mse minimized at N={argmin} (want 1); KS {} (N>=50 below N=1: {ks_ok})",
            ks_text.join(", ")
        ),
    );
}

#[test]
fn c11_byte_identical_reruns() {
    let mut cfg = ExperimentConfig::preset(ExperimentKind::SamplerCompare);
    cfg.world = ExperimentConfig::preset(ExperimentKind::Toy2dB).world;
    cfg.sampler.steps = vec![1, 3, 10, 50];
    cfg.sampler.schedule = indi_core::NoiseSchedule::brownian(0.1).unwrap();
    cfg.sampler.record_trajectories = 2;
    cfg.eval.inputs = 200;
    cfg.eval.replicates = 2;
    let dir = tempfile::tempdir().unwrap();
    let mut texts = Vec::new();
    for (i, jobs) in [(0, 1), (1, 4)] {
        let report = run_experiment(&cfg, jobs, None).unwrap();
        let out = dir.path().join(format!("run{i}"));
        emit_report(&report, &out, &[Format::Csv]).unwrap();
        let read = |name: &str| std::fs::read(out.join(name)).unwrap();
        texts.push((read("results.csv"), read("trajectories.csv")));
    }
    let same = texts[0] == texts[1];
    verdict(
        11,
        same,
        format!(
            "results.csv and trajectories.csv identical across two runs (1 and 4 workers): {same}"
        ),
    );
}

#[test]
fn c12_trained_regressor_restores() {
    let started = Instant::now();
    let mut cfg = ExperimentConfig::preset(ExperimentKind::TrainRestore);
    cfg.sampler.steps = vec![100];
    cfg.eval.inputs = 1000;
    cfg.eval.mode_tolerance = 5e-2;
    let report = run_experiment(&cfg, 1, None).unwrap();
    let r = &report.rows[0];
    let secs = started.elapsed().as_secs_f64();
    verdict(
        12,
        r.mode_hit_rate >= 0.9 && !r.is_divergent() && secs < 600.0,
        format!(
            "{:.1}% of outputs within 5e-2 of a mode at N=100 (>= 90%), final loss {:.4}, {secs:.1}s on one worker",
            100.0 * r.mode_hit_rate,
            r.final_loss
        ),
    );
}
