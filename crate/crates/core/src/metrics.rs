//! Distortion and distribution metrics.
//!
//! Perceptual quality is approximated at toy scale by how close the output
//! distribution is to the known prior: one-sample Kolmogorov-Smirnov
//! statistics against the prior marginals, and mode-assignment frequencies
//! for discrete priors.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{IndiError, Result};
use crate::oracles::GaussianMixturePrior;
use crate::state::{ensure_dim, State};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub mse: f64,
    /// `10 log10(peak^2 / mse)`; `f64::INFINITY` when `mse == 0`.
    pub psnr: f64,
    pub per_sample_mse: Vec<f64>,
}

pub fn psnr(mse: f64, peak: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (peak * peak / mse).log10()
    }
}

/// Mean squared error over every coordinate of every sample, and PSNR
/// relative to `peak`.
pub fn distortion_metrics(
    reference: &[State],
    estimate: &[State],
    peak: f64,
) -> Result<MetricReport> {
    ensure_dim(reference.len(), estimate.len())?;
    if !(peak.is_finite() && peak > 0.0) {
        return Err(IndiError::InvalidInput(format!(
            "peak must be > 0, got {peak}"
        )));
    }
    if reference.is_empty() {
        return Err(IndiError::InvalidInput("empty batch".into()));
    }
    let mut per_sample = Vec::with_capacity(reference.len());
    for (r, e) in reference.iter().zip(estimate) {
        r.ensure_same_dim(e)?;
        let sq: f64 = r
            .as_slice()
            .iter()
            .zip(e.as_slice())
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        per_sample.push(sq / r.dim() as f64);
    }
    // Per-sample dims are equal, so the mean of per-sample MSEs is the global one.
    let mse = per_sample.iter().sum::<f64>() / per_sample.len() as f64;
    Ok(MetricReport {
        mse,
        psnr: psnr(mse, peak),
        per_sample_mse: per_sample,
    })
}

/// Euclidean nearest mode as `(index, distance)`; ties go to the lowest index.
pub fn nearest_mode(x: &State, prior: &GaussianMixturePrior) -> Result<(usize, f64)> {
    ensure_dim(prior.dim(), x.dim())?;
    let mut best = (0, f64::INFINITY);
    for (i, c) in prior.modes().iter().enumerate() {
        let d = x.distance(c);
        if d < best.1 {
            best = (i, d);
        }
    }
    Ok(best)
}

/// A one-dimensional reference distribution for KS statistics.
#[derive(Clone, Debug, PartialEq)]
pub enum ReferenceCdf {
    Normal {
        mean: f64,
        std: f64,
    },
    /// Atoms `(location, weight)`, weights summing to one.
    Discrete(Vec<(f64, f64)>),
}

impl ReferenceCdf {
    /// Right-continuous CDF `P(X <= x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            ReferenceCdf::Normal { mean, std } => normal_cdf(*mean, *std, x),
            ReferenceCdf::Discrete(atoms) => {
                atoms.iter().filter(|(a, _)| *a <= x).map(|(_, w)| w).sum()
            }
        }
    }

    /// Left limit `P(X < x)`.
    pub fn cdf_left(&self, x: f64) -> f64 {
        match self {
            ReferenceCdf::Normal { .. } => self.cdf(x),
            ReferenceCdf::Discrete(atoms) => {
                atoms.iter().filter(|(a, _)| *a < x).map(|(_, w)| w).sum()
            }
        }
    }

    fn atoms(&self) -> &[(f64, f64)] {
        match self {
            ReferenceCdf::Normal { .. } => &[],
            ReferenceCdf::Discrete(atoms) => atoms,
        }
    }

    /// Per-coordinate marginal of a discrete prior.
    pub fn mixture_marginal(prior: &GaussianMixturePrior, coord: usize) -> Self {
        ReferenceCdf::Discrete(
            prior
                .modes()
                .iter()
                .zip(prior.weights())
                .map(|(c, &w)| (c.as_slice()[coord], w))
                .collect(),
        )
    }
}

fn normal_cdf(mean: f64, std: f64, x: f64) -> f64 {
    if std == 0.0 {
        return if x >= mean { 1.0 } else { 0.0 };
    }
    Normal::new(mean, std).map(|n| n.cdf(x)).unwrap_or(f64::NAN)
}

/// Exact one-sample KS statistic `sup_x |F_n(x) - F(x)|`.
///
/// Both the empirical CDF and (for discrete references) the reference CDF
/// are step functions, so the supremum is attained at a sample or an atom;
/// both one-sided limits are checked at each of them.
pub fn ks_statistic(samples: &[f64], reference: &ReferenceCdf) -> f64 {
    let mut sorted: Vec<f64> = samples.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len() as f64;
    if sorted.is_empty() {
        return f64::NAN;
    }
    // Empirical CDF right and left limits at x.
    let ecdf = |x: f64| sorted.partition_point(|v| *v <= x) as f64 / n;
    let ecdf_left = |x: f64| sorted.partition_point(|v| *v < x) as f64 / n;
    let mut d: f64 = 0.0;
    let atoms = reference.atoms().iter().map(|(a, _)| *a);
    for x in sorted.iter().copied().chain(atoms) {
        d = d
            .max((ecdf(x) - reference.cdf(x)).abs())
            .max((ecdf_left(x) - reference.cdf_left(x)).abs());
    }
    d
}

/// Wasserstein-1 distance `integral |F_n(x) - F(x)| dx` between the samples
/// and a discrete reference. Unlike the KS distance it stays small when
/// samples land close to, but not exactly on, the atoms.
pub fn w1_to_discrete(samples: &[f64], atoms: &[(f64, f64)]) -> f64 {
    if samples.is_empty() {
        return f64::NAN;
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len() as f64;
    let reference = ReferenceCdf::Discrete(atoms.to_vec());
    let mut knots: Vec<f64> = sorted
        .iter()
        .copied()
        .chain(atoms.iter().map(|(a, _)| *a))
        .collect();
    knots.sort_by(|a, b| a.total_cmp(b));
    knots
        .windows(2)
        .map(|w| {
            let f_n = sorted.partition_point(|v| *v <= w[0]) as f64 / n;
            (f_n - reference.cdf(w[0])).abs() * (w[1] - w[0])
        })
        .sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistributionStats {
    pub mean: Vec<f64>,
    /// Unbiased per-coordinate variance.
    pub variance: Vec<f64>,
    /// One-sample KS statistic per coordinate against the reference normal.
    pub ks: Vec<f64>,
}

/// Sample mean, unbiased per-coordinate variance and per-coordinate KS
/// statistic against `N(ref_mean[i], ref_std[i]^2)`.
pub fn empirical_distribution_stats(
    samples: &[State],
    ref_mean: &[f64],
    ref_std: &[f64],
) -> Result<DistributionStats> {
    if samples.len() < 2 {
        return Err(IndiError::InvalidInput(format!(
            "need at least 2 samples, got {}",
            samples.len()
        )));
    }
    let d = samples[0].dim();
    ensure_dim(d, ref_mean.len())?;
    ensure_dim(d, ref_std.len())?;
    for s in samples {
        ensure_dim(d, s.dim())?;
    }
    let n = samples.len() as f64;
    let mut mean = vec![0.0; d];
    for s in samples {
        for (m, v) in mean.iter_mut().zip(s.as_slice()) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut variance = vec![0.0; d];
    for s in samples {
        for ((acc, v), m) in variance.iter_mut().zip(s.as_slice()).zip(&mean) {
            *acc += (v - m) * (v - m);
        }
    }
    variance.iter_mut().for_each(|v| *v /= n - 1.0);
    let ks = (0..d)
        .map(|i| {
            let col: Vec<f64> = samples.iter().map(|s| s.as_slice()[i]).collect();
            ks_statistic(
                &col,
                &ReferenceCdf::Normal {
                    mean: ref_mean[i],
                    std: ref_std[i],
                },
            )
        })
        .collect();
    Ok(DistributionStats { mean, variance, ks })
}

/// Fraction of samples within `tol` of some mode, and the frequency with
/// which each mode is the nearest one.
pub fn mode_statistics(
    samples: &[State],
    prior: &GaussianMixturePrior,
    tol: f64,
) -> Result<(f64, Vec<f64>)> {
    let mut hits = 0usize;
    let mut counts = vec![0usize; prior.modes().len()];
    for s in samples {
        let (i, d) = nearest_mode(s, prior)?;
        counts[i] += 1;
        if d <= tol {
            hits += 1;
        }
    }
    let n = samples.len().max(1) as f64;
    Ok((
        hits as f64 / n,
        counts.into_iter().map(|c| c as f64 / n).collect(),
    ))
}
