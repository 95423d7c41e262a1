use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use crate::degradation::{NoiseSchedule, ScheduleKind};
use crate::error::{IndiError, Result};
use crate::metrics::{
    distortion_metrics, ks_statistic, mode_statistics, w1_to_discrete, ReferenceCdf,
};
use crate::oracles::Estimator;
use crate::regressor::{
    checkpoint, train, MlpRegressor, PairGenerator, TimeDistribution, TrainConfig,
};
use crate::rng::{derive, derive_seed};
use crate::samplers::{restore, SamplerConfig, SamplerKind};
use crate::state::State;

use super::config::{EstimatorChoice, ExperimentConfig, ExperimentKind, TrainSection};
use super::report::{LossCurve, Row, RunReport, TrajectoryPoint, TrajectoryRecord};
use super::world::World;

/// One estimator under evaluation, with the schedule its sampler uses.
struct Variant {
    name: String,
    estimator: Box<dyn Estimator>,
    schedule: NoiseSchedule,
    loss_curve: Vec<f64>,
    model: Option<MlpRegressor>,
}

/// A restoration input; `x` is unknown when a fixed observation is given.
#[derive(Clone, Debug)]
struct Input {
    x: Option<State>,
    y: State,
}

/// Short label for a schedule, used as a variant name.
pub fn schedule_label(s: &NoiseSchedule) -> String {
    match s.kind() {
        ScheduleKind::Constant(e) if *e == 0.0 => "none".into(),
        ScheduleKind::Constant(e) => format!("constant_{e}"),
        ScheduleKind::Brownian(e) => format!("brownian_{e}"),
        ScheduleKind::Table(p) => format!("table_{}", p.len()),
    }
}

/// Variant names for a list of time distributions: the bare key, with the
/// list position appended only when a key repeats.
pub fn time_dist_labels(dists: &[TimeDistribution]) -> Vec<String> {
    dists
        .iter()
        .enumerate()
        .map(|(i, d)| {
            if dists.iter().filter(|o| o.key() == d.key()).count() > 1 {
                format!("{}_{i}", d.key())
            } else {
                d.key().to_string()
            }
        })
        .collect()
}

fn final_loss(curve: &[f64]) -> f64 {
    if curve.is_empty() {
        return f64::NAN;
    }
    let tail = &curve[curve.len().saturating_sub(100)..];
    tail.iter().sum::<f64>() / tail.len() as f64
}

/// Trains a regressor for `world`. The initial weights and the batch stream
/// depend only on the master seed, so sweep variants share both.
pub fn train_model(
    world: &World,
    section: &TrainSection,
    time_dist: TimeDistribution,
    schedule: &NoiseSchedule,
    seed: u64,
) -> Result<(MlpRegressor, Vec<f64>)> {
    let model = MlpRegressor::for_dim(
        world.dim(),
        &section.hidden,
        section.activation,
        derive_seed(seed, "model-init", 0),
    )?;
    let cfg = TrainConfig {
        p_norm: section.p_norm,
        learning_rate: section.learning_rate,
        batch_size: section.batch_size,
        steps: section.steps,
        time_dist,
        schedule: schedule.clone(),
        seed: derive_seed(seed, "train", 0),
    };
    let out = train(model, world, &cfg)?;
    Ok((out.model, out.loss_curve))
}

fn trained_variant(
    name: String,
    world: &World,
    section: &TrainSection,
    time_dist: TimeDistribution,
    schedule: NoiseSchedule,
    seed: u64,
) -> Result<Variant> {
    let (model, loss_curve) = match &section.checkpoint {
        Some(path) => {
            let m = checkpoint::load(path)?;
            if m.state_dim() != world.dim() {
                return Err(IndiError::config(
                    "train.checkpoint",
                    format!(
                        "model dimension {} does not match world dimension {}",
                        m.state_dim(),
                        world.dim()
                    ),
                ));
            }
            (m, Vec::new())
        }
        None => train_model(world, section, time_dist, &schedule, seed)?,
    };
    Ok(Variant {
        name,
        estimator: Box::new(model.clone()),
        schedule,
        loss_curve,
        model: Some(model),
    })
}

fn build_variants(cfg: &ExperimentConfig, world: &World) -> Result<Vec<Variant>> {
    let trained = cfg.estimator == EstimatorChoice::Trained
        || matches!(
            cfg.experiment,
            ExperimentKind::TrainRestore | ExperimentKind::SweepPt
        );
    let section = || {
        cfg.train
            .as_ref()
            .ok_or_else(|| IndiError::config("train", "missing [train] section"))
    };
    match cfg.experiment {
        ExperimentKind::SweepPt => {
            let s = section()?;
            if s.checkpoint.is_some() {
                return Err(IndiError::config(
                    "train.checkpoint",
                    "sweep_pt trains one model per variant",
                ));
            }
            let dists = if s.time_dists.is_empty() {
                TimeDistribution::all_kinds().to_vec()
            } else {
                s.time_dists.clone()
            };
            let labels = time_dist_labels(&dists);
            dists
                .into_par_iter()
                .zip(labels)
                .map(|(d, name)| {
                    trained_variant(name, world, s, d, cfg.sampler.schedule.clone(), cfg.seed)
                })
                .collect()
        }
        ExperimentKind::SweepNoise => cfg
            .sampler
            .schedules
            .par_iter()
            .map(|sched| {
                if trained {
                    let s = section()?;
                    trained_variant(
                        schedule_label(sched),
                        world,
                        s,
                        s.time_dist,
                        sched.clone(),
                        cfg.seed,
                    )
                } else {
                    Ok(Variant {
                        name: schedule_label(sched),
                        estimator: world.oracle(sched)?,
                        schedule: sched.clone(),
                        loss_curve: Vec::new(),
                        model: None,
                    })
                }
            })
            .collect(),
        _ if trained => {
            let s = section()?;
            let sched = if s.schedule.is_noiseless() {
                cfg.sampler.schedule.clone()
            } else {
                s.schedule.clone()
            };
            Ok(vec![trained_variant(
                "base".into(),
                world,
                s,
                s.time_dist,
                sched,
                cfg.seed,
            )?])
        }
        _ => Ok(vec![Variant {
            name: "base".into(),
            estimator: world.oracle(&cfg.sampler.schedule)?,
            schedule: cfg.sampler.schedule.clone(),
            loss_curve: Vec::new(),
            model: None,
        }]),
    }
}

fn draw_inputs(cfg: &ExperimentConfig, world: &World, replicate: usize) -> Result<Vec<Input>> {
    if let Some(obs) = &cfg.eval.observation {
        return Ok(vec![Input {
            x: None,
            y: State::new(obs.clone())?,
        }]);
    }
    let mut rng = derive(cfg.seed, "inputs", replicate as u64);
    (0..cfg.eval.inputs)
        .map(|_| {
            let p = world.generate(&mut rng)?;
            Ok(Input {
                x: Some(p.x().clone()),
                y: p.y().clone(),
            })
        })
        .collect()
}

struct Cell {
    variant: usize,
    sampler: SamplerKind,
    n_steps: usize,
    replicate: usize,
}

fn column(samples: &[State], i: usize) -> Vec<f64> {
    samples.iter().map(|s| s.as_slice()[i]).collect()
}

fn evaluate_cell(
    cfg: &ExperimentConfig,
    world: &World,
    variant: &Variant,
    cell: &Cell,
    inputs: &[Input],
) -> Result<(Row, Vec<TrajectoryRecord>)> {
    let label = format!(
        "{}/{}/{}",
        variant.name,
        cell.sampler.as_str(),
        cell.n_steps
    );
    let seed = derive_seed(cfg.seed, &label, cell.replicate as u64);
    let mut outputs = Vec::with_capacity(inputs.len());
    let mut refs = Vec::with_capacity(inputs.len());
    let mut trajectories = Vec::new();
    let mut diverged = 0;
    let mut note = String::new();
    for (i, input) in inputs.iter().enumerate() {
        let mut sc = SamplerConfig::new(
            cell.n_steps,
            variant.schedule.clone(),
            derive_seed(seed, "input", i as u64),
        );
        sc.record_trajectory = i < cfg.sampler.record_trajectories;
        match restore(cell.sampler, &variant.estimator, &input.y, &sc) {
            Ok(r) if !r.exceeded(cfg.eval.divergence_factor) => {
                if let Some(traj) = r.trajectory {
                    trajectories.push(TrajectoryRecord {
                        variant: variant.name.clone(),
                        sampler: cell.sampler.as_str().into(),
                        n_steps: cell.n_steps,
                        replicate: cell.replicate,
                        input_index: i,
                        points: traj
                            .points
                            .into_iter()
                            .enumerate()
                            .map(|(k, (t, s))| TrajectoryPoint {
                                step_index: k,
                                t,
                                values: s.into_vec(),
                            })
                            .collect(),
                    });
                }
                if let Some(x) = &input.x {
                    refs.push(x.clone());
                }
                outputs.push(r.output);
            }
            Ok(r) => {
                diverged += 1;
                if note.is_empty() {
                    note = format!(
                        "iterate norm grew from {:e} to {:e}",
                        r.initial_norm, r.peak_norm
                    );
                }
            }
            Err(e) => {
                diverged += 1;
                if note.is_empty() {
                    note = e.to_string();
                }
            }
        }
    }

    let dim = world.dim();
    let (mse, psnr) = if !refs.is_empty() && refs.len() == outputs.len() {
        let m = distortion_metrics(&refs, &outputs, cfg.eval.peak)?;
        (m.mse, m.psnr)
    } else {
        (f64::NAN, f64::NAN)
    };
    let ks = if outputs.is_empty() {
        f64::NAN
    } else {
        (0..dim)
            .map(|i| ks_statistic(&column(&outputs, i), &world.prior_marginal(i)))
            .fold(0.0, f64::max)
    };
    let w1 = match world.prior_marginal(0) {
        ReferenceCdf::Discrete(_) if !outputs.is_empty() => (0..dim)
            .map(|i| match world.prior_marginal(i) {
                ReferenceCdf::Discrete(atoms) => w1_to_discrete(&column(&outputs, i), &atoms),
                ReferenceCdf::Normal { .. } => f64::NAN,
            })
            .fold(0.0, f64::max),
        _ => f64::NAN,
    };
    let (mode_hit_rate, mode_freqs, mode_freq_max_z) = match world.mixture_prior() {
        Some(prior) if !outputs.is_empty() => {
            let (hit, freqs) = mode_statistics(&outputs, prior, cfg.eval.mode_tolerance)?;
            let n = outputs.len() as f64;
            let z = freqs
                .iter()
                .zip(prior.weights())
                .filter(|(_, w)| **w > 0.0 && **w < 1.0)
                .map(|(f, w)| (f - w).abs() / (w * (1.0 - w) / n).sqrt())
                .fold(0.0, f64::max);
            (hit, freqs, z)
        }
        _ => (f64::NAN, Vec::new(), f64::NAN),
    };
    let n = outputs.len() as f64;
    let output_mean: Vec<f64> = (0..dim)
        .map(|i| column(&outputs, i).iter().sum::<f64>() / n)
        .collect();
    let output_var: Vec<f64> = (0..dim)
        .map(|i| {
            if outputs.len() < 2 {
                return f64::NAN;
            }
            let m = output_mean[i];
            column(&outputs, i)
                .iter()
                .map(|v| (v - m) * (v - m))
                .sum::<f64>()
                / (n - 1.0)
        })
        .collect();

    let row = Row {
        experiment: cfg.experiment.as_str().into(),
        variant: variant.name.clone(),
        sampler: cell.sampler.as_str().into(),
        n_steps: cell.n_steps,
        replicate: cell.replicate,
        seed,
        inputs: inputs.len(),
        diverged,
        mse,
        psnr,
        ks,
        w1,
        mode_hit_rate,
        mode_freq_max_z,
        mode_freqs,
        output_mean,
        output_var,
        final_loss: final_loss(&variant.loss_curve),
        note,
    };
    Ok((row, trajectories))
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| IndiError::InvalidInput(format!("cannot start worker pool: {e}")))
}

/// Runs the configured experiment on `jobs` worker threads (0 = all cores).
///
/// Results do not depend on `jobs`: every cell draws from its own seed
/// `derive_seed(seed, "<variant>/<sampler>/<N>", replicate)`, and inputs for
/// replicate `r` come from `derive_seed(seed, "inputs", r)` and are shared by
/// all cells. Trained models are written to `checkpoint_dir` when given.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    jobs: usize,
    checkpoint_dir: Option<&Path>,
) -> Result<RunReport> {
    cfg.validate()?;
    let started = Instant::now();
    let world = World::from_config(&cfg.world)?;
    let pool = pool(jobs)?;
    pool.install(|| {
        let variants = build_variants(cfg, &world)?;
        let inputs: Vec<Vec<Input>> = (0..cfg.eval.replicates)
            .map(|r| draw_inputs(cfg, &world, r))
            .collect::<Result<_>>()?;

        let mut cells = Vec::new();
        for (vi, _) in variants.iter().enumerate() {
            for &sampler in &cfg.sampler.samplers {
                for &n_steps in &cfg.sampler.steps {
                    for replicate in 0..cfg.eval.replicates {
                        cells.push(Cell {
                            variant: vi,
                            sampler,
                            n_steps,
                            replicate,
                        });
                    }
                }
            }
        }
        let results: Vec<(Row, Vec<TrajectoryRecord>)> = cells
            .par_iter()
            .map(|c| evaluate_cell(cfg, &world, &variants[c.variant], c, &inputs[c.replicate]))
            .collect::<Result<_>>()?;

        let estimator_calls = cells
            .iter()
            .map(|c| (c.n_steps * inputs[c.replicate].len()) as u64)
            .sum();
        let mut checkpoints = Vec::new();
        if let Some(dir) = checkpoint_dir {
            for v in &variants {
                if let (Some(model), true) = (
                    &v.model,
                    cfg.train.as_ref().is_some_and(|t| t.checkpoint.is_none()),
                ) {
                    std::fs::create_dir_all(dir).map_err(|e| IndiError::io(dir, e))?;
                    let name = format!("model_{}.ckpt", v.name);
                    checkpoint::save(model, &dir.join(&name))?;
                    checkpoints.push(name);
                }
            }
        }
        let (rows, trajs): (Vec<Row>, Vec<Vec<TrajectoryRecord>>) = results.into_iter().unzip();
        Ok(RunReport {
            config: cfg.clone(),
            rows,
            loss_curves: variants
                .iter()
                .filter(|v| !v.loss_curve.is_empty())
                .map(|v| LossCurve {
                    variant: v.name.clone(),
                    values: v.loss_curve.clone(),
                })
                .collect(),
            trajectories: trajs.into_iter().flatten().collect(),
            checkpoints,
            estimator_calls,
            wall_clock_seconds: started.elapsed().as_secs_f64(),
        })
    })
}

/// Trains the regressor described by `[train]` without evaluating it.
/// Writes `model.ckpt` into `out_dir` when given.
pub fn run_training(
    cfg: &ExperimentConfig,
    out_dir: Option<&Path>,
) -> Result<(MlpRegressor, RunReport)> {
    cfg.validate()?;
    let started = Instant::now();
    let world = World::from_config(&cfg.world)?;
    let section = cfg
        .train
        .as_ref()
        .ok_or_else(|| IndiError::config("train", "the train command needs a [train] section"))?;
    let (model, curve) = train_model(
        &world,
        section,
        section.time_dist,
        &section.schedule,
        cfg.seed,
    )?;
    let mut checkpoints = Vec::new();
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).map_err(|e| IndiError::io(dir, e))?;
        checkpoint::save(&model, &dir.join("model.ckpt"))?;
        checkpoints.push("model.ckpt".to_string());
    }
    let report = RunReport {
        config: cfg.clone(),
        rows: Vec::new(),
        loss_curves: vec![LossCurve {
            variant: section.time_dist.key().to_string(),
            values: curve,
        }],
        trajectories: Vec::new(),
        checkpoints,
        estimator_calls: 0,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    };
    Ok((model, report))
}

/// Runs `cfg` as the given sweep kind, keeping its world and settings.
pub fn run_as(
    kind: ExperimentKind,
    cfg: &ExperimentConfig,
    jobs: usize,
    checkpoint_dir: Option<&Path>,
) -> Result<RunReport> {
    let mut cfg = cfg.clone();
    cfg.experiment = kind;
    if kind == ExperimentKind::SamplerCompare && cfg.sampler.samplers.len() == 1 {
        cfg.sampler.samplers = SamplerKind::ALL.to_vec();
    }
    run_experiment(&cfg, jobs, checkpoint_dir)
}
