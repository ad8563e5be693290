//! Finite populations drawing bundles independently from a shared
//! strategy: the empirical distribution concentrates as the population
//! grows.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Result, SimError};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarianceRow {
    pub sample_size: usize,
    /// Across-trial variance of every empirical coordinate, per population.
    pub variance: Vec<Vec<f64>>,
}

impl VarianceRow {
    pub fn max_variance(&self) -> f64 {
        self.variance.iter().flatten().copied().fold(0.0, f64::max)
    }
}

/// For each `N`, draws `N` bundles per population from `pi` in each of
/// `trials` independent trials and reports the unbiased variance of every
/// coordinate of the empirical distribution.
pub fn finite_sample_experiment(
    pi: &[Vec<f64>],
    sample_sizes: &[usize],
    trials: usize,
    seed: u64,
) -> Result<Vec<VarianceRow>> {
    if trials < 2 {
        return Err(SimError::Config(
            "variance needs at least two trials".into(),
        ));
    }
    if let Some(&n) = sample_sizes.iter().find(|&&n| n == 0) {
        return Err(SimError::Config(format!(
            "sample size must be positive, got {n}"
        )));
    }
    let samplers = pi
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let s: f64 = p.iter().sum();
            if p.iter().any(|x| !x.is_finite() || *x < 0.0) || (s - 1.0).abs() > 1e-9 {
                return Err(SimError::Config(format!(
                    "population {k}: strategy is not a distribution"
                )));
            }
            WeightedIndex::new(p).map_err(|e| SimError::Config(format!("population {k}: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(sample_sizes
        .iter()
        .map(|&n| {
            let mut sum: Vec<Vec<f64>> = pi.iter().map(|p| vec![0.0; p.len()]).collect();
            let mut sum_sq = sum.clone();
            for _ in 0..trials {
                for (k, sampler) in samplers.iter().enumerate() {
                    let mut counts = vec![0usize; pi[k].len()];
                    for _ in 0..n {
                        counts[sampler.sample(&mut rng)] += 1;
                    }
                    for (p, c) in counts.into_iter().enumerate() {
                        let x = c as f64 / n as f64;
                        sum[k][p] += x;
                        sum_sq[k][p] += x * x;
                    }
                }
            }
            let t = trials as f64;
            let variance = sum
                .iter()
                .zip(&sum_sq)
                .map(|(s, q)| {
                    s.iter()
                        .zip(q)
                        .map(|(s, q)| ((q - s * s / t) / (t - 1.0)).max(0.0))
                        .collect()
                })
                .collect();
            VarianceRow {
                sample_size: n,
                variance,
            }
        })
        .collect())
}
