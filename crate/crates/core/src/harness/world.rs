use crate::degradation::NoiseSchedule;
use crate::error::{IndiError, Result};
use crate::metrics::ReferenceCdf;
use crate::oracles::{
    Estimator, GaussianMixturePrior, GaussianOracle, GaussianPrior, LinearDegradation,
    MixtureOracle, SquareMatrix,
};
use crate::regressor::PairGenerator;
use crate::rng::{standard_normal_vec, SimRng};
use crate::state::{PairedSample, State};

use super::config::WorldConfig;

/// A validated toy world: prior plus observation model.
#[derive(Clone, Debug)]
pub enum World {
    Mixture {
        prior: GaussianMixturePrior,
        degradation: LinearDegradation,
    },
    Gaussian {
        prior: GaussianPrior,
        sigma_n: f64,
    },
}

fn field<T>(path: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| IndiError::config(path, e.to_string()))
}

impl World {
    pub fn from_config(cfg: &WorldConfig) -> Result<Self> {
        match cfg {
            WorldConfig::Mixture {
                modes,
                weights,
                h,
                sigma,
            } => {
                let modes = modes
                    .iter()
                    .enumerate()
                    .map(|(i, m)| field(&format!("world.modes[{i}]"), State::new(m.clone())))
                    .collect::<Result<Vec<_>>>()?;
                if modes.is_empty() {
                    return Err(IndiError::config("world.modes", "needs at least one mode"));
                }
                if weights.len() != modes.len() {
                    return Err(IndiError::config(
                        "world.weights",
                        format!("{} weights for {} modes", weights.len(), modes.len()),
                    ));
                }
                let prior = field(
                    "world.weights",
                    GaussianMixturePrior::new(modes, weights.clone()),
                )?;
                let h = field("world.h", SquareMatrix::from_rows(h.clone()))?;
                if h.dim() != prior.dim() {
                    return Err(IndiError::config(
                        "world.h",
                        format!("is {0}x{0}, modes have dimension {1}", h.dim(), prior.dim()),
                    ));
                }
                let degradation = field("world.sigma", LinearDegradation::new(h, *sigma))?;
                Ok(World::Mixture { prior, degradation })
            }
            WorldConfig::Gaussian {
                c,
                sigma_c,
                sigma_n,
            } => {
                let c = field("world.c", State::new(c.clone()))?;
                let prior = field("world.sigma_c", GaussianPrior::new(c, *sigma_c))?;
                field(
                    "world.sigma_n",
                    GaussianOracle::new(prior.clone(), *sigma_n),
                )?;
                Ok(World::Gaussian {
                    prior,
                    sigma_n: *sigma_n,
                })
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            World::Mixture { prior, .. } => prior.dim(),
            World::Gaussian { prior, .. } => prior.dim(),
        }
    }

    pub fn mixture_prior(&self) -> Option<&GaussianMixturePrior> {
        match self {
            World::Mixture { prior, .. } => Some(prior),
            World::Gaussian { .. } => None,
        }
    }

    /// The ideal estimator, aware of any extra schedule noise.
    pub fn oracle(&self, schedule: &NoiseSchedule) -> Result<Box<dyn Estimator>> {
        Ok(match self {
            World::Mixture { prior, degradation } => Box::new(
                MixtureOracle::new(prior.clone(), degradation.clone())?
                    .with_schedule(schedule.clone()),
            ),
            World::Gaussian { prior, sigma_n } => Box::new(
                GaussianOracle::new(prior.clone(), *sigma_n)?.with_schedule(schedule.clone()),
            ),
        })
    }

    /// Per-coordinate reference distribution of the prior.
    pub fn prior_marginal(&self, coord: usize) -> ReferenceCdf {
        match self {
            World::Mixture { prior, .. } => ReferenceCdf::mixture_marginal(prior, coord),
            World::Gaussian { prior, .. } => ReferenceCdf::Normal {
                mean: prior.c().as_slice()[coord],
                std: prior.sigma_c(),
            },
        }
    }
}

impl PairGenerator for World {
    fn dim(&self) -> usize {
        World::dim(self)
    }

    fn generate(&self, rng: &mut SimRng) -> Result<PairedSample> {
        match self {
            World::Mixture { prior, degradation } => {
                let (_, x) = prior.sample(rng);
                let y = degradation.observe(&x, rng)?;
                PairedSample::new(x, y)
            }
            World::Gaussian { prior, sigma_n } => {
                let x = prior.sample(rng);
                let n = standard_normal_vec(rng, x.dim());
                let y = State::new(
                    x.as_slice()
                        .iter()
                        .zip(&n)
                        .map(|(a, b)| a + sigma_n * b)
                        .collect(),
                )?;
                PairedSample::new(x, y)
            }
        }
    }
}
