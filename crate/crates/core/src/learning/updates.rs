use super::{check_losses, check_same_len, check_simplex, dot};
use crate::error::{Error, Result};

/// Largest rate accepted by [`rep_update`]; keeps every factor
/// `1 + γ r_p / ρ` non-negative.
pub const REP_MAX_RATE: f64 = 1.0;
/// Largest rate accepted by [`mw_signed_update`].
pub const SIGNED_MW_MAX_RATE: f64 = 0.5;

fn normalize(mut w: Vec<f64>) -> Vec<f64> {
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= s);
    w
}

/// Hedge step on log-weights: `log π'_p = log π_p − γ ℓ_p / ρ − log Z`.
///
/// Works with the max-subtracted exponent so thousands of steps cannot
/// underflow. The returned vector is normalized (its log-sum-exp is zero).
pub fn hedge_update_log(log_pi: &[f64], losses: &[f64], gamma: f64, rho: f64) -> Result<Vec<f64>> {
    check_same_len(log_pi, losses, "hedge_update")?;
    check_losses(losses, rho)?;
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::Precondition(format!(
            "Hedge rate must be positive, got {gamma}"
        )));
    }
    if let Some(x) = log_pi.iter().find(|x| !x.is_finite()) {
        return Err(Error::Precondition(format!(
            "Hedge needs a strictly positive strategy (log weight {x}); it cannot grow a zero entry back"
        )));
    }
    let shifted: Vec<f64> = log_pi
        .iter()
        .zip(losses)
        .map(|(lp, l)| lp - gamma * l / rho)
        .collect();
    let max = shifted.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_z = max + shifted.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
    Ok(shifted.into_iter().map(|x| x - log_z).collect())
}

/// `π'_p ∝ π_p exp(−γ ℓ_p / ρ)`.
pub fn hedge_update(pi: &[f64], losses: &[f64], gamma: f64, rho: f64) -> Result<Vec<f64>> {
    check_simplex(pi, "strategy")?;
    if pi.len() == 1 {
        check_losses(losses, rho)?;
        check_same_len(pi, losses, "hedge_update")?;
        return Ok(vec![1.0]);
    }
    if pi.contains(&0.0) {
        return Err(Error::Precondition(
            "Hedge needs a strictly positive strategy; it cannot grow a zero entry back".into(),
        ));
    }
    let log_pi: Vec<f64> = pi.iter().map(|x| x.ln()).collect();
    let next = hedge_update_log(&log_pi, losses, gamma, rho)?;
    Ok(normalize(next.into_iter().map(f64::exp).collect()))
}

/// `π'_p = π_p (1 + γ (⟨π, ℓ⟩ − ℓ_p) / ρ)`, the Euler step of the replicator
/// field. Requires `γ ≤ 1`, which keeps every factor non-negative.
pub fn rep_update(pi: &[f64], losses: &[f64], gamma: f64, rho: f64) -> Result<Vec<f64>> {
    check_simplex(pi, "strategy")?;
    check_same_len(pi, losses, "rep_update")?;
    check_losses(losses, rho)?;
    if !(gamma.is_finite() && (0.0..=REP_MAX_RATE).contains(&gamma)) {
        return Err(Error::Precondition(format!(
            "REP rate must lie in [0, {REP_MAX_RATE}], got {gamma}"
        )));
    }
    let avg = dot(pi, losses);
    // The sum is preserved exactly in real arithmetic, but a rounding error
    // ε in it grows like ε Π(1 + γ ℓ̄ / ρ) over many steps, so renormalize.
    Ok(normalize(
        pi.iter()
            .zip(losses)
            .map(|(&p, &l)| (p * (1.0 + gamma * (avg - l) / rho)).max(0.0))
            .collect(),
    ))
}

/// `π'_p ∝ π_p (1 − γ m_p)` for signed losses `m ∈ [−1, 1]^P`, `γ ≤ 1/2`.
pub fn mw_signed_update(pi: &[f64], signed_losses: &[f64], gamma: f64) -> Result<Vec<f64>> {
    check_simplex(pi, "strategy")?;
    check_same_len(pi, signed_losses, "mw_signed_update")?;
    if !(gamma.is_finite() && (0.0..=SIGNED_MW_MAX_RATE).contains(&gamma)) {
        return Err(Error::Precondition(format!(
            "signed multiplicative weights rate must lie in [0, {SIGNED_MW_MAX_RATE}], got {gamma}"
        )));
    }
    if let Some(m) = signed_losses
        .iter()
        .find(|m| !m.is_finite() || m.abs() > 1.0)
    {
        return Err(Error::Precondition(format!(
            "signed loss {m} outside [-1, 1]"
        )));
    }
    if pi.len() > 1 && pi.contains(&0.0) {
        return Err(Error::Precondition(
            "signed multiplicative weights need a strictly positive strategy".into(),
        ));
    }
    Ok(normalize(
        pi.iter()
            .zip(signed_losses)
            .map(|(p, m)| p * (1.0 - gamma * m))
            .collect(),
    ))
}

/// Residual of an update against the replicator drift:
/// `U_p = (π'_p − π_p) / γ − π_p (⟨π, ℓ⟩ − ℓ_p) / ρ`.
pub fn arep_perturbation(
    pi: &[f64],
    pi_next: &[f64],
    losses: &[f64],
    gamma: f64,
    rho: f64,
) -> Result<Vec<f64>> {
    check_same_len(pi, pi_next, "arep_perturbation")?;
    check_same_len(pi, losses, "arep_perturbation")?;
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::Precondition(format!(
            "rate must be positive, got {gamma}"
        )));
    }
    if !(rho.is_finite() && rho > 0.0) {
        return Err(Error::Precondition(format!(
            "loss bound rho must be positive, got {rho}"
        )));
    }
    let avg = dot(pi, losses);
    Ok(pi
        .iter()
        .zip(pi_next)
        .zip(losses)
        .map(|((&p, &q), &l)| (q - p) / gamma - p * (avg - l) / rho)
        .collect())
}
