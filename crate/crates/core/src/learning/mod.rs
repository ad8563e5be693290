//! Discounted no-regret learning for a single population.
//!
//! Learning rates equal discount factors (`η_τ = γ_τ`) throughout; every
//! update and bound in this module takes the same `γ_τ`.

mod discount;
mod divergence;
mod regret;
mod updates;

pub use discount::{discount_diagnostic, DiscountDiagnosticRow, DiscountRule, DiscountSequence};
pub use divergence::{kl_divergence, rep_divergence};
pub use regret::{
    accumulate, hedge_regret_bound, regret, rep_regret_bound, LearnerState, RegretBound,
    RegretReport,
};
pub use updates::{
    arep_perturbation, hedge_update, hedge_update_log, mw_signed_update, rep_update, REP_MAX_RATE,
    SIGNED_MW_MAX_RATE,
};

use crate::error::{Error, Result};

const SIMPLEX_TOL: f64 = 1e-9;

pub(crate) fn check_simplex(pi: &[f64], what: &str) -> Result<()> {
    if pi.is_empty() {
        return Err(Error::Precondition(format!("{what} is empty")));
    }
    if let Some(x) = pi.iter().find(|x| !x.is_finite() || **x < 0.0) {
        return Err(Error::Precondition(format!(
            "{what} has an invalid entry {x}"
        )));
    }
    let sum: f64 = pi.iter().sum();
    if (sum - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::Precondition(format!(
            "{what} sums to {sum}, expected 1"
        )));
    }
    Ok(())
}

pub(crate) fn check_same_len(a: &[f64], b: &[f64], what: &str) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "{what}: {} vs {} entries",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

pub(crate) fn check_losses(losses: &[f64], rho: f64) -> Result<()> {
    if !(rho.is_finite() && rho > 0.0) {
        return Err(Error::Precondition(format!(
            "loss bound rho must be positive and finite, got {rho}"
        )));
    }
    let slack = 1e-9 * rho.max(1.0);
    if let Some(l) = losses
        .iter()
        .find(|&&l| !l.is_finite() || l < -slack || l > rho + slack)
    {
        return Err(Error::Precondition(format!(
            "loss {l} outside [0, rho = {rho}]"
        )));
    }
    Ok(())
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
