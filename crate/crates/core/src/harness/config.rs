//! Experiment configuration, read from TOML.
//!
//! Every file carries `schema_version = 1`. Unknown keys are rejected so a
//! typo never silently falls back to a default.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::degradation::NoiseSchedule;
use crate::error::{IndiError, Result};
use crate::regressor::{Activation, PNorm, TimeDistribution};
use crate::samplers::SamplerKind;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    #[serde(rename = "toy2d_a")]
    Toy2dA,
    #[serde(rename = "toy2d_b")]
    Toy2dB,
    #[serde(rename = "gauss1d")]
    Gauss1d,
    TrainRestore,
    GenerateFromNoise,
    SweepSteps,
    SweepPt,
    SweepNoise,
    SamplerCompare,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 9] = [
        ExperimentKind::Toy2dA,
        ExperimentKind::Toy2dB,
        ExperimentKind::Gauss1d,
        ExperimentKind::TrainRestore,
        ExperimentKind::GenerateFromNoise,
        ExperimentKind::SweepSteps,
        ExperimentKind::SweepPt,
        ExperimentKind::SweepNoise,
        ExperimentKind::SamplerCompare,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::Toy2dA => "toy2d_a",
            ExperimentKind::Toy2dB => "toy2d_b",
            ExperimentKind::Gauss1d => "gauss1d",
            ExperimentKind::TrainRestore => "train_restore",
            ExperimentKind::GenerateFromNoise => "generate_from_noise",
            ExperimentKind::SweepSteps => "sweep_steps",
            ExperimentKind::SweepPt => "sweep_pt",
            ExperimentKind::SweepNoise => "sweep_noise",
            ExperimentKind::SamplerCompare => "sampler_compare",
        }
    }
}

/// The toy world an experiment runs in.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum WorldConfig {
    /// Discrete prior on `modes` observed as `y = H x + sigma n`.
    Mixture {
        modes: Vec<Vec<f64>>,
        weights: Vec<f64>,
        h: Vec<Vec<f64>>,
        sigma: f64,
    },
    /// `x ~ N(c, sigma_c^2 I)` observed as `y = x + sigma_n n`.
    Gaussian {
        c: Vec<f64>,
        sigma_c: f64,
        sigma_n: f64,
    },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorChoice {
    /// Closed-form posterior mean of the world.
    #[default]
    Oracle,
    /// A regressor trained per the `[train]` section.
    Trained,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerSection {
    /// Step counts `N` to evaluate.
    #[serde(default = "default_steps")]
    pub steps: Vec<usize>,
    #[serde(default = "default_samplers")]
    pub samplers: Vec<SamplerKind>,
    #[serde(default)]
    pub schedule: NoiseSchedule,
    /// Extra schedules, one variant each (`sweep_noise`).
    #[serde(default)]
    pub schedules: Vec<NoiseSchedule>,
    /// Trajectories recorded for the first `record_trajectories` inputs of
    /// every cell.
    #[serde(default)]
    pub record_trajectories: usize,
}

fn default_steps() -> Vec<usize> {
    vec![100]
}

fn default_samplers() -> Vec<SamplerKind> {
    vec![SamplerKind::Indi]
}

impl Default for SamplerSection {
    fn default() -> Self {
        SamplerSection {
            steps: default_steps(),
            samplers: default_samplers(),
            schedule: NoiseSchedule::noiseless(),
            schedules: Vec::new(),
            record_trajectories: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    /// Number of (x, y) inputs drawn from the world per replicate.
    #[serde(default = "default_inputs")]
    pub inputs: usize,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    /// Distance to a mode that counts as a hit.
    #[serde(default = "default_mode_tolerance")]
    pub mode_tolerance: f64,
    /// PSNR peak (dynamic range of the signal).
    #[serde(default = "default_peak")]
    pub peak: f64,
    /// Restore this single observation instead of sampled ones.
    #[serde(default)]
    pub observation: Option<Vec<f64>>,
    /// Iterate norm growth beyond this factor marks a run divergent.
    #[serde(default = "default_divergence_factor")]
    pub divergence_factor: f64,
}

fn default_inputs() -> usize {
    1000
}

fn default_replicates() -> usize {
    1
}

fn default_mode_tolerance() -> f64 {
    1e-2
}

fn default_peak() -> f64 {
    2.0
}

fn default_divergence_factor() -> f64 {
    1e6
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            inputs: default_inputs(),
            replicates: default_replicates(),
            mode_tolerance: default_mode_tolerance(),
            peak: default_peak(),
            observation: None,
            divergence_factor: default_divergence_factor(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    #[serde(default = "default_hidden")]
    pub hidden: Vec<usize>,
    #[serde(default = "default_activation")]
    pub activation: Activation,
    #[serde(default = "default_p_norm")]
    pub p_norm: PNorm,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    pub steps: usize,
    #[serde(default)]
    pub time_dist: TimeDistribution,
    /// Variants for `sweep_pt`; defaults to all five kinds.
    #[serde(default)]
    pub time_dists: Vec<TimeDistribution>,
    /// Noise schedule used to perturb training inputs.
    #[serde(default)]
    pub schedule: NoiseSchedule,
    /// Load this checkpoint instead of training.
    #[serde(default)]
    pub checkpoint: Option<PathBuf>,
}

fn default_hidden() -> Vec<usize> {
    vec![64, 64, 64]
}

fn default_activation() -> Activation {
    Activation::Tanh
}

fn default_p_norm() -> PNorm {
    PNorm::L1
}

fn default_learning_rate() -> f64 {
    1e-3
}

fn default_batch_size() -> usize {
    128
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub experiment: ExperimentKind,
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub estimator: EstimatorChoice,
    pub world: WorldConfig,
    #[serde(default)]
    pub sampler: SamplerSection,
    #[serde(default)]
    pub eval: EvalSection,
    #[serde(default)]
    pub train: Option<TrainSection>,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| {
            let path = e
                .span()
                .map(|s| format!("bytes {}..{}", s.start, s.end))
                .unwrap_or_else(|| "<root>".into());
            IndiError::config(path, e.message().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| IndiError::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    /// Checks cross-field constraints and reports the offending field path.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(IndiError::config(
                "schema_version",
                format!(
                    "unsupported version {} (expected {SCHEMA_VERSION})",
                    self.schema_version
                ),
            ));
        }
        super::world::World::from_config(&self.world)?;
        if self.sampler.steps.is_empty() {
            return Err(IndiError::config(
                "sampler.steps",
                "must list at least one step count",
            ));
        }
        if let Some(i) = self.sampler.steps.iter().position(|&n| n == 0) {
            return Err(IndiError::config(
                format!("sampler.steps[{i}]"),
                "step counts must be >= 1",
            ));
        }
        if self.sampler.samplers.is_empty() {
            return Err(IndiError::config(
                "sampler.samplers",
                "must list at least one sampler",
            ));
        }
        if self.eval.replicates == 0 {
            return Err(IndiError::config("eval.replicates", "must be >= 1"));
        }
        if self.eval.observation.is_none() && self.eval.inputs == 0 {
            return Err(IndiError::config("eval.inputs", "must be >= 1"));
        }
        if !(self.eval.peak.is_finite() && self.eval.peak > 0.0) {
            return Err(IndiError::config("eval.peak", "must be > 0"));
        }
        if self.eval.mode_tolerance.is_nan() || self.eval.mode_tolerance < 0.0 {
            return Err(IndiError::config("eval.mode_tolerance", "must be >= 0"));
        }
        if self.eval.divergence_factor.is_nan() || self.eval.divergence_factor <= 1.0 {
            return Err(IndiError::config("eval.divergence_factor", "must be > 1"));
        }
        if let Some(obs) = &self.eval.observation {
            let dim = super::world::World::from_config(&self.world)?.dim();
            if obs.len() != dim {
                return Err(IndiError::config(
                    "eval.observation",
                    format!("has {} entries, world dimension is {dim}", obs.len()),
                ));
            }
        }
        let needs_training = matches!(
            self.experiment,
            ExperimentKind::TrainRestore | ExperimentKind::SweepPt
        ) || self.estimator == EstimatorChoice::Trained;
        match &self.train {
            None if needs_training => {
                return Err(IndiError::config(
                    "train",
                    "this experiment needs a [train] section",
                ));
            }
            Some(t) => {
                if t.hidden.contains(&0) {
                    return Err(IndiError::config("train.hidden", "widths must be >= 1"));
                }
                if !(t.learning_rate.is_finite() && t.learning_rate > 0.0) {
                    return Err(IndiError::config("train.learning_rate", "must be > 0"));
                }
                if t.batch_size == 0 {
                    return Err(IndiError::config("train.batch_size", "must be >= 1"));
                }
                for (i, d) in std::iter::once(&t.time_dist)
                    .chain(&t.time_dists)
                    .enumerate()
                {
                    d.validate().map_err(|e| {
                        let path = if i == 0 {
                            "train.time_dist".to_string()
                        } else {
                            format!("train.time_dists[{}]", i - 1)
                        };
                        IndiError::config(path, e.to_string())
                    })?;
                }
            }
            None => {}
        }
        if self.experiment == ExperimentKind::SweepNoise && self.sampler.schedules.is_empty() {
            return Err(IndiError::config(
                "sampler.schedules",
                "sweep_noise needs at least one schedule",
            ));
        }
        Ok(())
    }

    /// Built-in configuration for each experiment kind.
    pub fn preset(kind: ExperimentKind) -> Self {
        let corners = vec![
            vec![1.0, 1.0],
            vec![1.0, -1.0],
            vec![-1.0, 1.0],
            vec![-1.0, -1.0],
        ];
        let toy = |h: Vec<Vec<f64>>, sigma: f64| WorldConfig::Mixture {
            modes: corners.clone(),
            weights: vec![0.25; 4],
            h,
            sigma,
        };
        let identity = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let gauss = WorldConfig::Gaussian {
            c: vec![0.0],
            sigma_c: 1.0,
            sigma_n: 1.0,
        };
        let mut cfg = ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            experiment: kind,
            seed: 2023,
            output_dir: None,
            estimator: EstimatorChoice::Oracle,
            world: toy(identity.clone(), 1.0),
            sampler: SamplerSection::default(),
            eval: EvalSection::default(),
            train: None,
        };
        let train = TrainSection {
            hidden: default_hidden(),
            activation: Activation::Tanh,
            p_norm: PNorm::L1,
            learning_rate: 1e-3,
            batch_size: 128,
            steps: 20_000,
            time_dist: TimeDistribution::Linear0,
            time_dists: Vec::new(),
            schedule: NoiseSchedule::noiseless(),
            checkpoint: None,
        };
        match kind {
            ExperimentKind::Toy2dA => {}
            ExperimentKind::Toy2dB => {
                cfg.world = toy(vec![vec![1.0, 0.0], vec![0.0, 0.0]], 0.5);
            }
            ExperimentKind::Gauss1d => {
                cfg.world = gauss;
                cfg.sampler.steps = vec![1000];
                cfg.eval.observation = Some(vec![2.0]);
            }
            ExperimentKind::TrainRestore => {
                cfg.estimator = EstimatorChoice::Trained;
                cfg.eval.mode_tolerance = 5e-2;
                cfg.train = Some(train);
            }
            ExperimentKind::GenerateFromNoise => {
                cfg.world = WorldConfig::Mixture {
                    modes: corners.clone(),
                    weights: vec![0.1, 0.2, 0.3, 0.4],
                    h: vec![vec![0.0, 0.0], vec![0.0, 0.0]],
                    sigma: 1.0,
                };
                cfg.eval.inputs = 10_000;
            }
            ExperimentKind::SweepSteps => {
                cfg.world = gauss;
                cfg.sampler.steps = vec![1, 2, 4, 10, 50, 100];
                cfg.eval.inputs = 2000;
                cfg.eval.peak = 8.0;
            }
            ExperimentKind::SweepPt => {
                cfg.estimator = EstimatorChoice::Trained;
                cfg.eval.mode_tolerance = 5e-2;
                cfg.eval.inputs = 500;
                cfg.train = Some(TrainSection {
                    steps: 3000,
                    time_dists: TimeDistribution::all_kinds().to_vec(),
                    ..train
                });
            }
            ExperimentKind::SweepNoise => {
                cfg.world = toy(vec![vec![1.0, 0.0], vec![0.0, 0.0]], 0.05);
                cfg.sampler.schedules = vec![
                    NoiseSchedule::noiseless(),
                    NoiseSchedule::constant(0.05).expect("valid"),
                    NoiseSchedule::constant(0.2).expect("valid"),
                    NoiseSchedule::brownian(0.05).expect("valid"),
                    NoiseSchedule::brownian(0.2).expect("valid"),
                ];
            }
            ExperimentKind::SamplerCompare => {
                cfg.sampler.samplers = SamplerKind::ALL.to_vec();
                cfg.sampler.steps = vec![1, 2, 3, 5, 10, 50, 100, 200, 1000];
            }
        }
        cfg
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate_and_round_trip() {
        for kind in ExperimentKind::ALL {
            let cfg = ExperimentConfig::preset(kind);
            cfg.validate().unwrap();
            let text = cfg.to_toml_string();
            let back = ExperimentConfig::from_toml_str(&text).unwrap();
            assert_eq!(back, cfg, "{}", kind.as_str());
        }
    }

    #[test]
    fn errors_name_the_field() {
        let mut cfg = ExperimentConfig::preset(ExperimentKind::Toy2dA);
        cfg.sampler.steps = vec![10, 0];
        match cfg.validate() {
            Err(IndiError::Config { path, .. }) => assert_eq!(path, "sampler.steps[1]"),
            other => panic!("{other:?}"),
        }
        let mut cfg = ExperimentConfig::preset(ExperimentKind::Toy2dA);
        cfg.world = WorldConfig::Mixture {
            modes: vec![vec![0.0]],
            weights: vec![0.5],
            h: vec![vec![1.0]],
            sigma: 1.0,
        };
        match cfg.validate() {
            Err(IndiError::Config { path, .. }) => assert_eq!(path, "world.weights"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_keys_and_versions_rejected() {
        let mut text = ExperimentConfig::preset(ExperimentKind::Gauss1d).to_toml_string();
        text = text.replace("schema_version = 1", "schema_version = 2");
        assert!(ExperimentConfig::from_toml_str(&text).is_err());
        let text =
            ExperimentConfig::preset(ExperimentKind::Gauss1d).to_toml_string() + "\nbogus = 3\n";
        assert!(ExperimentConfig::from_toml_str(&text).is_err());
    }

    #[test]
    fn training_experiments_need_train_section() {
        let mut cfg = ExperimentConfig::preset(ExperimentKind::TrainRestore);
        cfg.train = None;
        assert!(matches!(cfg.validate(), Err(IndiError::Config { path, .. }) if path == "train"));
    }
}
