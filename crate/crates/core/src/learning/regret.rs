use super::{check_same_len, check_simplex, dot, DiscountSequence};
use crate::error::{Error, Result};

/// Strategy plus discounted loss bookkeeping for one population.
///
/// Updated functionally: [`accumulate`] returns a new state.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnerState {
    pub strategy: Vec<f64>,
    /// Number of accumulated iterations.
    pub tau: usize,
    /// `L = Σ γ_τ ⟨π^(τ), ℓ^(τ)⟩`
    pub cumulative_loss: f64,
    /// `𝓛_p = Σ γ_τ ℓ_p^(τ)`
    pub cumulative_bundle_losses: Vec<f64>,
    pub initial_min_probability: f64,
    /// `Σ γ_τ` over accumulated iterations.
    pub discount_sum: f64,
    /// `Σ γ_τ²` over accumulated iterations.
    pub discount_sq_sum: f64,
}

impl LearnerState {
    pub fn new(initial: Vec<f64>) -> Result<Self> {
        check_simplex(&initial, "initial strategy")?;
        let n = initial.len();
        Ok(LearnerState {
            initial_min_probability: initial.iter().copied().fold(f64::INFINITY, f64::min),
            strategy: initial,
            tau: 0,
            cumulative_loss: 0.0,
            cumulative_bundle_losses: vec![0.0; n],
            discount_sum: 0.0,
            discount_sq_sum: 0.0,
        })
    }

    pub fn with_strategy(&self, strategy: Vec<f64>) -> Result<Self> {
        check_same_len(&self.strategy, &strategy, "with_strategy")?;
        check_simplex(&strategy, "strategy")?;
        Ok(LearnerState {
            strategy,
            ..self.clone()
        })
    }

    pub fn accumulate(&self, pi_used: &[f64], losses: &[f64], gamma: f64) -> Result<Self> {
        accumulate(self, pi_used, losses, gamma)
    }
}

pub fn accumulate(
    state: &LearnerState,
    pi_used: &[f64],
    losses: &[f64],
    gamma: f64,
) -> Result<LearnerState> {
    check_same_len(&state.cumulative_bundle_losses, pi_used, "accumulate")?;
    check_same_len(pi_used, losses, "accumulate")?;
    if !(gamma.is_finite() && gamma >= 0.0) {
        return Err(Error::Precondition(format!(
            "discount must be non-negative, got {gamma}"
        )));
    }
    Ok(LearnerState {
        tau: state.tau + 1,
        cumulative_loss: state.cumulative_loss + gamma * dot(pi_used, losses),
        cumulative_bundle_losses: state
            .cumulative_bundle_losses
            .iter()
            .zip(losses)
            .map(|(c, l)| c + gamma * l)
            .collect(),
        discount_sum: state.discount_sum + gamma,
        discount_sq_sum: state.discount_sq_sum + gamma * gamma,
        ..state.clone()
    })
}

/// Which theoretical bound accompanies a regret report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegretBound {
    /// `−ρ log π⁰_min + (ρ/8) Σ γ²`
    Hedge,
    /// `−ρ log π⁰_min + ρ Σ γ²`, for REP and signed multiplicative weights.
    Rep,
    None,
}

impl RegretBound {
    pub fn evaluate(self, pi0_min: f64, sum_sq: f64, rho: f64) -> Option<f64> {
        let base = -rho * pi0_min.ln();
        match self {
            RegretBound::Hedge => Some(base + rho / 8.0 * sum_sq),
            RegretBound::Rep => Some(base + rho * sum_sq),
            RegretBound::None => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegretReport {
    /// `R = L − min_p 𝓛_p`
    pub regret: f64,
    /// `R / Σ γ_τ`
    pub normalized: f64,
    pub bound: Option<f64>,
    pub rho: f64,
}

impl RegretReport {
    pub fn positive_normalized(&self) -> f64 {
        self.normalized.max(0.0)
    }
}

pub fn regret(state: &LearnerState, rho: f64, bound: RegretBound) -> Result<RegretReport> {
    if state.tau < 1 {
        return Err(Error::Precondition(
            "regret needs at least one accumulated iteration".into(),
        ));
    }
    // A single bundle is its own best response in hindsight.
    let regret = if state.strategy.len() == 1 {
        0.0
    } else {
        let best = state
            .cumulative_bundle_losses
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        state.cumulative_loss - best
    };
    let normalized = if state.discount_sum > 0.0 {
        regret / state.discount_sum
    } else {
        0.0
    };
    Ok(RegretReport {
        regret,
        normalized,
        bound: bound.evaluate(state.initial_min_probability, state.discount_sq_sum, rho),
        rho,
    })
}

fn check_bound_inputs(pi0_min: f64) -> Result<()> {
    if !(pi0_min > 0.0 && pi0_min <= 1.0) {
        return Err(Error::Precondition(format!(
            "minimum initial probability must lie in (0, 1], got {pi0_min}"
        )));
    }
    Ok(())
}

fn sum_sq_through(discounts: &DiscountSequence, t: usize) -> Result<f64> {
    Ok(discounts.prefix(t + 1)?.iter().map(|g| g * g).sum())
}

/// Hedge regret bound through iteration `t` (the sum runs over `τ = 0..=t`).
pub fn hedge_regret_bound(
    t: usize,
    pi0_min: f64,
    discounts: &DiscountSequence,
    rho: f64,
) -> Result<f64> {
    check_bound_inputs(pi0_min)?;
    let s = sum_sq_through(discounts, t)?;
    Ok(RegretBound::Hedge.evaluate(pi0_min, s, rho).unwrap())
}

/// REP regret bound through iteration `t`.
pub fn rep_regret_bound(
    t: usize,
    pi0_min: f64,
    discounts: &DiscountSequence,
    rho: f64,
) -> Result<f64> {
    check_bound_inputs(pi0_min)?;
    let s = sum_sq_through(discounts, t)?;
    Ok(RegretBound::Rep.evaluate(pi0_min, s, rho).unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_discount_only_advances_tau() {
        let s = LearnerState::new(vec![0.5, 0.5]).unwrap();
        let t = accumulate(&s, &[0.5, 0.5], &[1.0, 2.0], 0.0).unwrap();
        assert_eq!(t.tau, 1);
        assert_eq!(t.cumulative_loss, 0.0);
        assert_eq!(t.cumulative_bundle_losses, vec![0.0, 0.0]);
    }

    #[test]
    fn one_step_accumulation() {
        let s = LearnerState::new(vec![1.0, 0.0]).unwrap();
        let t = s.accumulate(&[1.0, 0.0], &[2.0, 5.0], 0.5).unwrap();
        assert_eq!(t.cumulative_loss, 1.0);
        assert_eq!(t.cumulative_bundle_losses, vec![1.0, 2.5]);
    }

    #[test]
    fn constant_losses_accumulate_linearly() {
        let pi = vec![0.25, 0.75];
        let l = [2.0, 1.0];
        let mut s = LearnerState::new(pi.clone()).unwrap();
        for _ in 0..40 {
            s = s.accumulate(&pi, &l, 0.1).unwrap();
        }
        let avg = 0.25 * 2.0 + 0.75;
        assert!((s.cumulative_loss - 40.0 * 0.1 * avg).abs() < 1e-12);
    }

    #[test]
    fn single_bundle_has_zero_regret() {
        let mut s = LearnerState::new(vec![1.0]).unwrap();
        for g in [1.0, 0.5, 0.25] {
            s = s.accumulate(&[1.0], &[3.0], g).unwrap();
            assert_eq!(regret(&s, 3.0, RegretBound::Hedge).unwrap().regret, 0.0);
        }
    }

    #[test]
    fn best_in_hindsight_has_zero_regret() {
        let mut s = LearnerState::new(vec![0.0, 1.0]).unwrap();
        for _ in 0..10 {
            s = s.accumulate(&[0.0, 1.0], &[0.9, 0.2], 0.3).unwrap();
        }
        let r = regret(&s, 1.0, RegretBound::None).unwrap();
        assert!(r.regret.abs() < 1e-15);
        assert_eq!(r.bound, None);
        assert!(regret(
            &LearnerState::new(vec![1.0]).unwrap(),
            1.0,
            RegretBound::None
        )
        .is_err());
    }

    #[test]
    fn bound_values() {
        let d = DiscountSequence::explicit(vec![0.1; 10]).unwrap();
        let h = hedge_regret_bound(9, 0.5, &d, 1.0).unwrap();
        assert!((h - 0.705_647_180_559_945_3).abs() < 1e-12);
        let r = rep_regret_bound(9, 0.5, &d, 1.0).unwrap();
        assert!((r - 0.793_147_180_559_945_3).abs() < 1e-12);
        assert!(hedge_regret_bound(9, 0.0, &d, 1.0).is_err());
    }

    #[test]
    fn single_bundle_zero_rate_bound_is_zero() {
        assert_eq!(RegretBound::Hedge.evaluate(1.0, 0.0, 5.0), Some(0.0));
        assert_eq!(
            RegretBound::Rep.evaluate(0.25, 0.0, 2.0),
            Some(-2.0 * 0.25f64.ln())
        );
    }
}
