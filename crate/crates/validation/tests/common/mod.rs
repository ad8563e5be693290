#![allow(dead_code)]

use congestion_core::{CongestionFunction, CongestionModel, Population, ProductDistribution};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_function(rng: &mut ChaCha8Rng) -> CongestionFunction {
    match rng.random_range(0..3) {
        0 => CongestionFunction::constant(rng.random_range(0.0..3.0)).unwrap(),
        1 => CongestionFunction::affine(rng.random_range(0.0..3.0), rng.random_range(0.0..2.0))
            .unwrap(),
        _ => {
            let degree = rng.random_range(2..=3);
            CongestionFunction::polynomial(
                (0..=degree).map(|_| rng.random_range(0.0..1.5)).collect(),
            )
            .unwrap()
        }
    }
}

pub fn random_affine(rng: &mut ChaCha8Rng) -> CongestionFunction {
    CongestionFunction::affine(rng.random_range(0.1..3.0), rng.random_range(0.0..2.0)).unwrap()
}

/// Up to five resources, three populations and four bundles per population.
pub fn random_model(rng: &mut ChaCha8Rng) -> CongestionModel {
    let r = rng.random_range(1..=5);
    let functions = (0..r).map(|_| random_function(rng)).collect();
    let k = rng.random_range(1..=3);
    let populations = (0..k)
        .map(|_| {
            let n = rng.random_range(1..=4);
            let bundles = (0..n)
                .map(|_| {
                    let size = rng.random_range(1..=r);
                    let mut b = sample(rng, r, size).into_vec();
                    b.sort_unstable();
                    b
                })
                .collect();
            Population::new(rng.random_range(0.2..2.0), bundles)
        })
        .collect();
    CongestionModel::new(functions, populations).unwrap()
}

pub fn random_simplex(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

pub fn random_point(rng: &mut ChaCha8Rng, model: &CongestionModel) -> ProductDistribution {
    ProductDistribution::new(
        model
            .bundle_counts()
            .into_iter()
            .map(|n| random_simplex(rng, n))
            .collect(),
    )
    .unwrap()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
