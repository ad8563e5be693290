use congestion_core::learning::{
    accumulate, hedge_update_log, mw_signed_update, regret, rep_update, LearnerState, RegretBound,
};
use congestion_core::potential::potential_from_loads;
use congestion_core::{
    loss_upper_bound, solve_nash, EquilibriumResult, ProductDistribution, SolveError,
};
use serde::Serialize;

use crate::config::{Algorithm, SimulationConfig};
use crate::error::{Result, SimError};
use crate::spec::Game;

/// Everything recorded at iteration τ, before the update to τ + 1.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub tau: usize,
    pub gamma: f64,
    pub mu: Vec<Vec<f64>>,
    pub losses: Vec<Vec<f64>>,
    pub potential: f64,
    pub nash_gap: f64,
    /// Discounted population regret `R^k(τ)`, per population.
    pub regret: Vec<f64>,
    /// `R^k(τ) / Σ_{t≤τ} γ_t`.
    pub regret_norm: Vec<f64>,
    /// `Σ_{t≤τ} γ_t μ^(t) / Σ_{t≤τ} γ_t`.
    pub cesaro_mu: Vec<Vec<f64>>,
    pub cesaro_potential: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunMetadata {
    pub game: String,
    pub algorithm: String,
    pub discounts: String,
    pub learning_rates: String,
    /// True when REP / mw-custom discounts were clamped at 1/2.
    pub rate_capped: bool,
    pub rates_equal_discounts: bool,
    pub horizon: usize,
    pub init: String,
    pub seed: u64,
    pub rho: f64,
    pub bundle_labels: Vec<Vec<String>>,
    pub reference_mu: Vec<Vec<f64>>,
    pub reference_potential: f64,
    pub reference_nash_gap: f64,
    pub reference_converged: bool,
    /// Distances are measured to one solver point; an over-estimate of the
    /// distance to the equilibrium set when that set is not a singleton.
    pub reference_is_single_point: bool,
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub records: Vec<TrajectoryRecord>,
    /// Theoretical regret bound per record and population, when the
    /// algorithm has one (rates equal to discounts).
    pub bounds: Option<Vec<Vec<f64>>>,
    pub reference: EquilibriumResult,
    pub metadata: RunMetadata,
}

impl Simulation {
    pub fn last(&self) -> &TrajectoryRecord {
        self.records
            .last()
            .expect("simulations record at least two iterations")
    }

    pub fn final_distribution(&self) -> ProductDistribution {
        ProductDistribution::new(self.last().mu.clone()).expect("iterates stay on the simplex")
    }
}

/// Solver reference point. A budget overrun still yields the best iterate,
/// flagged in the metadata.
pub fn reference_equilibrium(game: &Game) -> Result<(EquilibriumResult, bool)> {
    match solve_nash(&game.model, 1e-10, 100_000, None) {
        Ok(r) => Ok((r, true)),
        Err(SolveError::NotConverged { best }) => Ok((*best, false)),
        Err(SolveError::Invalid(e)) => Err(e.into()),
    }
}

enum PopulationState {
    /// Single bundle: nothing to learn.
    Fixed,
    Hedge {
        log_weights: Vec<f64>,
    },
    Plain,
}

pub fn run_simulation(game: &Game, config: &SimulationConfig) -> Result<Simulation> {
    config.validate()?;
    let model = &game.model;
    let discounts = config.effective_discounts()?;
    let rates = config.effective_learning_rates()?;
    let mu0 = config.initial_distribution(model)?;
    let bound = rho_bound(model);
    let rho = bound.unwrap_or(1.0);
    let (reference, converged) = reference_equilibrium(game)?;
    let rates_equal = config.learning_rates.is_none();
    let bound_kind = match (rates_equal, config.algorithm) {
        (false, _) => RegretBound::None,
        (true, Algorithm::Hedge) => RegretBound::Hedge,
        (true, _) => RegretBound::Rep,
    };

    let mut blocks = mu0.blocks().to_vec();
    let mut states: Vec<PopulationState> = blocks
        .iter()
        .map(|b| match (b.len(), config.algorithm) {
            (1, _) => PopulationState::Fixed,
            (_, Algorithm::Hedge) => PopulationState::Hedge {
                log_weights: b.iter().map(|x| x.ln()).collect(),
            },
            _ => PopulationState::Plain,
        })
        .collect();
    let mut learners = blocks
        .iter()
        .map(|b| LearnerState::new(b.clone()))
        .collect::<congestion_core::Result<Vec<_>>>()?;

    let mut records = Vec::with_capacity(config.horizon + 1);
    let mut bounds = Vec::with_capacity(config.horizon + 1);
    let mut weighted_sum: Vec<Vec<f64>> = blocks.iter().map(|b| vec![0.0; b.len()]).collect();
    let mut gamma_sum = 0.0;

    for tau in 0..=config.horizon {
        let at = |source| SimError::Iteration { tau, source };
        let gamma = discounts.gamma(tau).expect("validated length");
        let eta = rates.gamma(tau).expect("validated length");
        let mu = ProductDistribution::new(blocks.clone()).map_err(at)?;
        let profile = model.losses(&mu).map_err(at)?;
        let potential = potential_from_loads(model, &profile.resource_loads);

        gamma_sum += gamma;
        for (acc, b) in weighted_sum.iter_mut().zip(&blocks) {
            for (a, x) in acc.iter_mut().zip(b) {
                *a += gamma * x;
            }
        }
        let cesaro_mu: Vec<Vec<f64>> = weighted_sum
            .iter()
            .map(|acc| acc.iter().map(|a| a / gamma_sum).collect())
            .collect();
        let cesaro_loads = model.resource_loads(&cesaro_mu).map_err(at)?;
        let cesaro_potential = potential_from_loads(model, &cesaro_loads);

        let mut regrets = Vec::new();
        let mut regret_norm = Vec::new();
        let mut bound_row = Vec::new();
        for (k, learner) in learners.iter_mut().enumerate() {
            *learner = accumulate(learner, &blocks[k], &profile.bundle_losses[k], gamma)
                .map_err(at)?
                .with_strategy(blocks[k].clone())
                .map_err(at)?;
            let report = regret(learner, rho, bound_kind).map_err(at)?;
            regrets.push(report.regret);
            regret_norm.push(report.normalized);
            bound_row.push(report.bound.unwrap_or(f64::NAN));
        }

        records.push(TrajectoryRecord {
            tau,
            gamma,
            mu: blocks.clone(),
            losses: profile.bundle_losses.clone(),
            potential,
            nash_gap: profile.nash_gap(),
            regret: regrets,
            regret_norm,
            cesaro_mu,
            cesaro_potential,
        });
        bounds.push(bound_row);

        if tau == config.horizon || bound.is_none() {
            continue;
        }
        for (k, state) in states.iter_mut().enumerate() {
            let losses = &profile.bundle_losses[k];
            blocks[k] = match state {
                PopulationState::Fixed => continue,
                PopulationState::Hedge { log_weights } => {
                    *log_weights = hedge_update_log(log_weights, losses, eta, rho).map_err(at)?;
                    let w: Vec<f64> = log_weights.iter().map(|x| x.exp()).collect();
                    let s: f64 = w.iter().sum();
                    w.into_iter().map(|x| x / s).collect()
                }
                PopulationState::Plain => match config.algorithm {
                    Algorithm::Rep => rep_update(&blocks[k], losses, eta, rho).map_err(at)?,
                    _ => {
                        let m: Vec<f64> = losses.iter().map(|l| l / rho).collect();
                        mw_signed_update(&blocks[k], &m, eta).map_err(at)?
                    }
                },
            };
        }
    }

    let metadata = RunMetadata {
        game: game.name.clone(),
        algorithm: config.algorithm.to_string(),
        discounts: discounts.to_string(),
        learning_rates: rates.to_string(),
        rate_capped: config.algorithm.needs_rate_cap(),
        rates_equal_discounts: rates_equal,
        horizon: config.horizon,
        init: config.init.to_string(),
        seed: config.seed,
        rho,
        bundle_labels: game.bundle_labels.clone(),
        reference_mu: reference.mu_star.blocks().to_vec(),
        reference_potential: reference.potential_value,
        reference_nash_gap: reference.nash_gap,
        reference_converged: converged,
        reference_is_single_point: true,
    };
    Ok(Simulation {
        records,
        bounds: (bound_kind != RegretBound::None).then_some(bounds),
        reference,
        metadata,
    })
}

/// The loss bound ρ, or `None` when every loss is identically zero (the
/// dynamics are then stationary and ρ = 1 is used for reporting).
fn rho_bound(model: &congestion_core::CongestionModel) -> Option<f64> {
    let rho = loss_upper_bound(model);
    (rho > 0.0).then_some(rho)
}
