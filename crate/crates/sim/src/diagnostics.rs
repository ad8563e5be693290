use congestion_core::potential::potential_from_loads;
use congestion_core::{CongestionModel, ProductDistribution};

use crate::error::{Result, SimError};
use crate::simulate::TrajectoryRecord;

#[derive(Debug, Clone, PartialEq)]
pub struct CesaroPoint {
    pub tau: usize,
    pub mean: Vec<Vec<f64>>,
    /// `V(μ̄^(τ)) − V_ref`
    pub potential_gap: f64,
}

/// Discount-weighted running means of the recorded iterates, recomputed
/// from `mu` and `gamma` alone.
pub fn cesaro_trace(
    model: &CongestionModel,
    records: &[TrajectoryRecord],
    v_ref: f64,
) -> Result<Vec<CesaroPoint>> {
    let first = records
        .first()
        .ok_or_else(|| SimError::Config("Cesàro trace needs at least one record".into()))?;
    let mut acc: Vec<Vec<f64>> = first.mu.iter().map(|b| vec![0.0; b.len()]).collect();
    let mut weight = 0.0;
    records
        .iter()
        .map(|r| {
            weight += r.gamma;
            for (a, b) in acc.iter_mut().zip(&r.mu) {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += r.gamma * y;
                }
            }
            let mean: Vec<Vec<f64>> = acc
                .iter()
                .map(|a| a.iter().map(|x| x / weight).collect())
                .collect();
            let loads = model.resource_loads(&mean)?;
            Ok(CesaroPoint {
                tau: r.tau,
                potential_gap: potential_from_loads(model, &loads) - v_ref,
                mean,
            })
        })
        .collect()
}

fn linf(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// `d_T = Σ_{τ≤T, ‖μ^(τ) − ref‖_∞ ≥ ε} γ_τ / Σ_{τ≤T} γ_τ` for every `T`.
pub fn density_above(
    records: &[TrajectoryRecord],
    epsilon: f64,
    reference: &ProductDistribution,
) -> Result<Vec<f64>> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(SimError::Config(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let mut far = 0.0;
    let mut total = 0.0;
    Ok(records
        .iter()
        .map(|r| {
            total += r.gamma;
            if linf(&r.mu, reference.blocks()) >= epsilon {
                far += r.gamma;
            }
            far / total
        })
        .collect())
}
