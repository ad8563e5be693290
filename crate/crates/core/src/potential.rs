//! Rosenthal potential, equilibrium computation and KKT verification.
//!
//! The potential `V(μ) = Σ_r ∫_0^{φ_r(μ)} c_r(u) du` is convex on the product
//! simplex, its gradient entry `(k, p)` is `m_k ℓ^k_p(μ)`, and its minimizers
//! are exactly the Nash equilibria. The solver is Frank-Wolfe: the linear
//! minimization oracle over Δ picks, per population, the bundle with the
//! lowest current loss.

use std::fmt;

use crate::error::{Error, Result};
use crate::game::{CongestionModel, LossProfile, ProductDistribution};

/// Default threshold for "bundle is in the support".
pub const SUPPORT_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct PotentialValue {
    pub value: f64,
    /// Entry `(k, p)` is `m_k ℓ^k_p(μ)`.
    pub gradient: Vec<Vec<f64>>,
}

/// `Σ_r ∫_0^{φ_r} c_r(u) du` for the given resource loads.
pub fn potential_from_loads(model: &CongestionModel, loads: &[f64]) -> f64 {
    model
        .functions()
        .iter()
        .zip(loads)
        .map(|(f, &u)| f.integral(u))
        .sum()
}

pub fn potential(model: &CongestionModel, mu: &ProductDistribution) -> Result<PotentialValue> {
    let losses = model.losses(mu)?;
    Ok(potential_with_losses(model, &losses))
}

pub fn potential_with_losses(model: &CongestionModel, losses: &LossProfile) -> PotentialValue {
    let value = potential_from_loads(model, &losses.resource_loads);
    let gradient = losses
        .bundle_losses
        .iter()
        .zip(model.populations())
        .map(|(l, pop)| l.iter().map(|x| pop.mass * x).collect())
        .collect();
    PotentialValue { value, gradient }
}

/// Dual variables of the potential-minimization problem at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct KktCertificate {
    /// `v_r = c_r(φ_r)`
    pub resource_prices: Vec<f64>,
    /// `w_k = m_k min_p ℓ^k_p`
    pub multipliers: Vec<f64>,
    /// `w_k / m_k`, the common loss on the support at an equilibrium.
    pub common_losses: Vec<f64>,
    /// `λ^k_p = m_k ℓ^k_p − w_k`
    pub slacks: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    NegativeSlack,
    Complementarity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KktViolation {
    pub population: usize,
    pub bundle: usize,
    pub kind: ViolationKind,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KktReport {
    pub certificate: KktCertificate,
    pub violations: Vec<KktViolation>,
    pub min_slack: f64,
    pub max_complementarity: f64,
}

impl KktReport {
    pub fn is_accepted(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn check_kkt(model: &CongestionModel, mu: &ProductDistribution, tol: f64) -> Result<KktReport> {
    let losses = model.losses(mu)?;
    Ok(kkt_from_losses(model, mu, &losses, tol))
}

fn kkt_from_losses(
    model: &CongestionModel,
    mu: &ProductDistribution,
    losses: &LossProfile,
    tol: f64,
) -> KktReport {
    let resource_prices = model
        .functions()
        .iter()
        .zip(&losses.resource_loads)
        .map(|(f, &u)| f.eval(u))
        .collect();
    let mut multipliers = Vec::new();
    let mut common_losses = Vec::new();
    let mut slacks = Vec::new();
    let mut violations = Vec::new();
    let mut min_slack = f64::INFINITY;
    let mut max_complementarity: f64 = 0.0;
    for (k, pop) in model.populations().iter().enumerate() {
        let min_loss = losses.min_loss(k);
        let w = pop.mass * min_loss;
        let lambda: Vec<f64> = losses.bundle_losses[k]
            .iter()
            .map(|l| pop.mass * l - w)
            .collect();
        for (p, (&lam, &prob)) in lambda.iter().zip(mu.block(k)).enumerate() {
            min_slack = min_slack.min(lam);
            let comp = (lam * prob).abs();
            max_complementarity = max_complementarity.max(comp);
            if lam < -tol {
                violations.push(KktViolation {
                    population: k,
                    bundle: p,
                    kind: ViolationKind::NegativeSlack,
                    value: lam,
                });
            }
            if comp > tol {
                violations.push(KktViolation {
                    population: k,
                    bundle: p,
                    kind: ViolationKind::Complementarity,
                    value: comp,
                });
            }
        }
        multipliers.push(w);
        common_losses.push(min_loss);
        slacks.push(lambda);
    }
    KktReport {
        certificate: KktCertificate {
            resource_prices,
            multipliers,
            common_losses,
            slacks,
        },
        violations,
        min_slack,
        max_complementarity,
    }
}

/// Stationary point of the replicator field: within every population the
/// losses on the support differ by at most `tol`.
pub fn is_restricted_nash(
    model: &CongestionModel,
    mu: &ProductDistribution,
    tol: f64,
) -> Result<bool> {
    is_restricted_nash_with_support(model, mu, tol, SUPPORT_EPS)
}

pub fn is_restricted_nash_with_support(
    model: &CongestionModel,
    mu: &ProductDistribution,
    tol: f64,
    support_eps: f64,
) -> Result<bool> {
    let losses = model.losses(mu)?;
    Ok(losses.bundle_losses.iter().enumerate().all(|(k, l)| {
        let (lo, hi) = mu
            .block(k)
            .iter()
            .zip(l)
            .filter(|(&x, _)| x > support_eps)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, &v)| {
                (lo.min(v), hi.max(v))
            });
        hi - lo <= tol || lo > hi
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrankWolfeVariant {
    /// Classic Frank-Wolfe: move all populations toward the best-response
    /// vertex.
    Vanilla,
    /// Pairwise Frank-Wolfe, cycling over populations: shift mass from the
    /// worst used bundle to the best bundle. Converges linearly on the
    /// product simplex and reaches faces exactly.
    Pairwise,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub variant: FrankWolfeVariant,
    /// Exact line search; when disabled the open-loop rule 2/(t+2) is used.
    pub line_search: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tolerance: 1e-10,
            max_iterations: 100_000,
            variant: FrankWolfeVariant::Pairwise,
            line_search: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumResult {
    pub mu_star: ProductDistribution,
    pub potential_value: f64,
    pub nash_gap: f64,
    pub iterations: usize,
    pub bundle_losses: Vec<Vec<f64>>,
    pub kkt_certificate: KktCertificate,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SolveError {
    Invalid(Error),
    /// Iteration budget exhausted; carries the best iterate found.
    NotConverged {
        best: Box<EquilibriumResult>,
    },
}

impl fmt::Display for SolveError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolveError::Invalid(e) => write!(f, "{e}"),
            SolveError::NotConverged { best } => write!(
                f,
                "no equilibrium within {} iterations (best Nash gap {:.3e})",
                best.iterations, best.nash_gap
            ),
        }
    }
}

impl std::error::Error for SolveError {}

impl From<Error> for SolveError {
    fn from(e: Error) -> Self {
        SolveError::Invalid(e)
    }
}

/// Solves for a Nash equilibrium with pairwise Frank-Wolfe and exact line
/// search, stopping once the Nash gap is at most `tolerance`.
pub fn solve_nash(
    model: &CongestionModel,
    tolerance: f64,
    max_iterations: usize,
    initial: Option<&ProductDistribution>,
) -> std::result::Result<EquilibriumResult, SolveError> {
    let options = SolverOptions {
        tolerance,
        max_iterations,
        ..SolverOptions::default()
    };
    solve_nash_with(model, &options, initial)
}

pub fn solve_nash_with(
    model: &CongestionModel,
    options: &SolverOptions,
    initial: Option<&ProductDistribution>,
) -> std::result::Result<EquilibriumResult, SolveError> {
    if options.tolerance.is_nan() || options.tolerance <= 0.0 {
        return Err(Error::Precondition(format!(
            "solver tolerance must be positive, got {}",
            options.tolerance
        ))
        .into());
    }
    let start = match initial {
        Some(mu) => {
            mu.check_shape(model)?;
            mu.clone()
        }
        None => ProductDistribution::uniform(model),
    };
    let mut blocks = start.into_blocks();
    let mut best: Option<(f64, Vec<Vec<f64>>, usize)> = None;

    for iteration in 0..=options.max_iterations {
        let mu = ProductDistribution::new(blocks.clone())?;
        let losses = model.losses(&mu)?;
        let gap = losses.nash_gap();
        // The mass-weighted gap bounds every complementarity product, so the
        // returned point also carries a KKT certificate at the same tolerance.
        let weighted_gap = model
            .populations()
            .iter()
            .enumerate()
            .map(|(k, pop)| pop.mass * (losses.average_losses[k] - losses.min_loss(k)))
            .fold(0.0, f64::max);
        if best.as_ref().is_none_or(|(g, _, _)| gap < *g) {
            best = Some((gap, blocks.clone(), iteration));
        }
        if gap <= options.tolerance && weighted_gap <= options.tolerance {
            return Ok(finish(model, mu, losses, iteration, options.tolerance));
        }
        if iteration == options.max_iterations {
            break;
        }
        match options.variant {
            FrankWolfeVariant::Vanilla => {
                vanilla_step(model, &mut blocks, &losses, iteration, options.line_search)?
            }
            FrankWolfeVariant::Pairwise => {
                pairwise_sweep(model, &mut blocks, losses, iteration, options.line_search)?
            }
        }
    }

    let (_, blocks, iteration) = best.expect("at least one iterate evaluated");
    let mu = ProductDistribution::new(blocks)?;
    let losses = model.losses(&mu)?;
    Err(SolveError::NotConverged {
        best: Box::new(finish(model, mu, losses, iteration, options.tolerance)),
    })
}

fn finish(
    model: &CongestionModel,
    mu: ProductDistribution,
    losses: LossProfile,
    iterations: usize,
    tolerance: f64,
) -> EquilibriumResult {
    let report = kkt_from_losses(model, &mu, &losses, tolerance);
    EquilibriumResult {
        potential_value: potential_from_loads(model, &losses.resource_loads),
        nash_gap: losses.nash_gap(),
        iterations,
        bundle_losses: losses.bundle_losses,
        kkt_certificate: report.certificate,
        mu_star: mu,
    }
}

fn argmin_lowest_index(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .fold(
            (0, f64::INFINITY),
            |(bi, bv), (i, &v)| {
                if v < bv {
                    (i, v)
                } else {
                    (bi, bv)
                }
            },
        )
        .0
}

fn vanilla_step(
    model: &CongestionModel,
    blocks: &mut [Vec<f64>],
    losses: &LossProfile,
    iteration: usize,
    line_search: bool,
) -> Result<()> {
    let direction: Vec<Vec<f64>> = blocks
        .iter()
        .zip(&losses.bundle_losses)
        .map(|(b, l)| {
            let s = argmin_lowest_index(l);
            b.iter()
                .enumerate()
                .map(|(p, &x)| if p == s { 1.0 - x } else { -x })
                .collect()
        })
        .collect();
    let step = if line_search {
        let delta = model.resource_loads(&direction)?;
        exact_line_search(model, &losses.resource_loads, &delta, 1.0)
    } else {
        2.0 / (iteration as f64 + 2.0)
    };
    for (b, d) in blocks.iter_mut().zip(&direction) {
        for (x, dx) in b.iter_mut().zip(d) {
            *x = (*x + step * dx).max(0.0);
        }
    }
    Ok(())
}

fn pairwise_sweep(
    model: &CongestionModel,
    blocks: &mut [Vec<f64>],
    mut losses: LossProfile,
    iteration: usize,
    line_search: bool,
) -> Result<()> {
    let n_resources = model.num_resources();
    for k in 0..blocks.len() {
        if k > 0 {
            let loads = model.resource_loads(blocks)?;
            losses.bundle_losses = model.bundle_losses_at(&loads);
            losses.resource_loads = loads;
        }
        let l = &losses.bundle_losses[k];
        let toward = argmin_lowest_index(l);
        let away = blocks[k]
            .iter()
            .zip(l)
            .enumerate()
            .filter(|(_, (&x, _))| x > 0.0)
            .fold((None, f64::NEG_INFINITY), |(bi, bv), (i, (_, &v))| {
                if v > bv {
                    (Some(i), v)
                } else {
                    (bi, bv)
                }
            })
            .0;
        let Some(away) = away else { continue };
        if away == toward || l[away] <= l[toward] {
            continue;
        }
        let pop = model.population(k);
        let mut delta = vec![0.0; n_resources];
        for &r in &pop.bundles[toward] {
            delta[r] += pop.mass;
        }
        for &r in &pop.bundles[away] {
            delta[r] -= pop.mass;
        }
        let max_step = blocks[k][away];
        let step = if line_search {
            exact_line_search(model, &losses.resource_loads, &delta, max_step)
        } else {
            (2.0 / (iteration as f64 + 2.0)).min(max_step)
        };
        blocks[k][toward] += step;
        blocks[k][away] = if step >= max_step {
            0.0
        } else {
            blocks[k][away] - step
        };
    }
    Ok(())
}

/// Minimizes `t ↦ V(φ + t Δ)` over `[0, t_max]`. The derivative
/// `Σ_r c_r(φ_r + tΔ_r) Δ_r` is non-decreasing in `t`; it is linear when every
/// function is affine, otherwise its root is bracketed by bisection.
fn exact_line_search(model: &CongestionModel, loads: &[f64], delta: &[f64], t_max: f64) -> f64 {
    let slope_at = |t: f64| -> f64 {
        model
            .functions()
            .iter()
            .zip(loads.iter().zip(delta))
            .filter(|(_, (_, &d))| d != 0.0)
            .map(|(f, (&u, &d))| f.eval(u + t * d) * d)
            .sum()
    };
    let g0 = slope_at(0.0);
    if g0 >= 0.0 || t_max <= 0.0 {
        return 0.0;
    }
    if slope_at(t_max) <= 0.0 {
        return t_max;
    }
    if model.functions().iter().all(|f| f.degree() <= 1) {
        let curvature: f64 = model
            .functions()
            .iter()
            .zip(delta)
            .map(|(f, &d)| f.derivative(0.0) * d * d)
            .sum();
        if curvature > 0.0 {
            return (-g0 / curvature).clamp(0.0, t_max);
        }
    }
    let (mut lo, mut hi) = (0.0, t_max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if slope_at(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{CongestionFunction, Population};
    use crate::routing::{example_network, to_congestion_game};

    fn two_links(f0: CongestionFunction, f1: CongestionFunction) -> CongestionModel {
        CongestionModel::new(
            vec![f0, f1],
            vec![Population::new(1.0, vec![vec![0], vec![1]])],
        )
        .unwrap()
    }

    fn pigou() -> CongestionModel {
        two_links(
            CongestionFunction::Constant(1.0),
            CongestionFunction::Affine {
                slope: 1.0,
                intercept: 0.0,
            },
        )
    }

    fn dist(blocks: Vec<Vec<f64>>) -> ProductDistribution {
        ProductDistribution::new(blocks).unwrap()
    }

    /// Equal-loss solution of the example network, derived by hand: pop 1
    /// gives 4.5b + 3e = 1, pop 2 gives 3b + 3.75e = 0.75.
    fn exact_equilibrium() -> ProductDistribution {
        dist(vec![
            vec![0.0, 4.0 / 21.0, 17.0 / 21.0],
            vec![19.0 / 84.0, 1.0 / 21.0, 61.0 / 84.0],
        ])
    }

    /// Three-digit rounding of the equilibrium, off by about 5e-3.
    fn rounded_equilibrium() -> ProductDistribution {
        dist(vec![vec![0.0, 0.187, 0.813], vec![0.223, 0.053, 0.724]])
    }

    #[test]
    fn pigou_potential_at_equilibrium() {
        let pv = potential(&pigou(), &dist(vec![vec![0.0, 1.0]])).unwrap();
        assert_eq!(pv.value, 0.5);
        assert_eq!(pv.gradient, vec![vec![1.0, 1.0]]);
    }

    #[test]
    fn zero_functions_have_zero_potential() {
        let model = two_links(
            CongestionFunction::Constant(0.0),
            CongestionFunction::Polynomial(vec![0.0, 0.0]),
        );
        for mu in [vec![0.3, 0.7], vec![1.0, 0.0]] {
            assert_eq!(potential(&model, &dist(vec![mu])).unwrap().value, 0.0);
        }
    }

    #[test]
    fn pigou_solution_is_all_on_variable_link() {
        let r = solve_nash(&pigou(), 1e-10, 1000, None).unwrap();
        assert!(r.mu_star.linf_distance(&dist(vec![vec![0.0, 1.0]])) < 1e-9);
        assert!(r.nash_gap <= 1e-10);
    }

    #[test]
    fn symmetric_links_split_evenly() {
        let f = CongestionFunction::Affine {
            slope: 1.0,
            intercept: 0.0,
        };
        let model = two_links(f.clone(), f);
        let start = dist(vec![vec![0.9, 0.1]]);
        let r = solve_nash(&model, 1e-12, 1000, Some(&start)).unwrap();
        assert!(r.mu_star.linf_distance(&dist(vec![vec![0.5, 0.5]])) < 1e-9);
    }

    #[test]
    fn example_network_equilibrium() {
        let model = to_congestion_game(&example_network()).unwrap();
        let r = solve_nash(&model, 1e-10, 10_000, None).unwrap();
        assert!(r.mu_star.linf_distance(&exact_equilibrium()) < 1e-9);
        let l = &r.bundle_losses;
        assert!((l[0][0] - 2.0).abs() < 1e-9);
        assert!((l[0][1] - 8.0 / 7.0).abs() < 1e-9 && (l[0][2] - 8.0 / 7.0).abs() < 1e-9);
        assert!(l[1].iter().all(|x| (x - 103.0 / 84.0).abs() < 1e-9));
    }

    #[test]
    fn all_variants_converge_on_example() {
        let model = to_congestion_game(&example_network()).unwrap();
        let reference = solve_nash(&model, 1e-12, 10_000, None).unwrap();
        for (variant, line_search, tol) in [
            (FrankWolfeVariant::Vanilla, true, 1e-3),
            (FrankWolfeVariant::Vanilla, false, 1e-2),
            (FrankWolfeVariant::Pairwise, false, 1e-5),
        ] {
            let options = SolverOptions {
                tolerance: tol,
                max_iterations: 200_000,
                variant,
                line_search,
            };
            let r = solve_nash_with(&model, &options, None).unwrap();
            assert!(r.nash_gap <= tol, "{variant:?} {line_search}");
            assert!(r.potential_value >= reference.potential_value - 1e-12);
        }
    }

    #[test]
    fn polynomial_functions_use_bisection() {
        let model = two_links(
            CongestionFunction::Polynomial(vec![0.0, 0.0, 0.0, 1.0]),
            CongestionFunction::Constant(0.125),
        );
        // u^3 = 1/8 at u = 1/2
        let r = solve_nash(&model, 1e-12, 1000, None).unwrap();
        assert!((r.mu_star.block(0)[0] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn exhausted_budget_reports_best_iterate() {
        let model = to_congestion_game(&example_network()).unwrap();
        let options = SolverOptions {
            tolerance: 1e-14,
            max_iterations: 2,
            variant: FrankWolfeVariant::Vanilla,
            line_search: false,
        };
        match solve_nash_with(&model, &options, None) {
            Err(SolveError::NotConverged { best }) => {
                assert!(best.nash_gap > 1e-14);
                assert!(best.iterations <= 2);
            }
            other => panic!("expected NotConverged, got {other:?}"),
        }
    }

    #[test]
    fn non_positive_tolerance_is_rejected() {
        assert!(matches!(
            solve_nash(&pigou(), 0.0, 10, None),
            Err(SolveError::Invalid(_))
        ));
    }

    #[test]
    fn kkt_accepts_rounded_equilibrium() {
        let model = to_congestion_game(&example_network()).unwrap();
        let report = check_kkt(&model, &rounded_equilibrium(), 0.02).unwrap();
        assert!(report.is_accepted(), "{:?}", report.violations);
    }

    #[test]
    fn kkt_rejects_pigou_half() {
        let report = check_kkt(&pigou(), &dist(vec![vec![0.5, 0.5]]), 1e-6).unwrap();
        assert!(!report.is_accepted());
        assert_eq!(report.certificate.slacks[0], vec![0.5, 0.0]);
        assert_eq!(
            report.violations,
            vec![KktViolation {
                population: 0,
                bundle: 0,
                kind: ViolationKind::Complementarity,
                value: 0.25,
            }]
        );
    }

    #[test]
    fn kkt_accepts_anything_in_zero_loss_game() {
        let model = two_links(
            CongestionFunction::Constant(0.0),
            CongestionFunction::Constant(0.0),
        );
        let report = check_kkt(&model, &dist(vec![vec![0.4, 0.6]]), 0.0).unwrap();
        assert!(report.is_accepted());
        assert_eq!(report.certificate.slacks[0], vec![0.0, 0.0]);
    }

    #[test]
    fn restricted_nash_examples() {
        let model = pigou();
        let vertex = dist(vec![vec![1.0, 0.0]]);
        assert!(is_restricted_nash(&model, &vertex, 1e-12).unwrap());
        assert_eq!(crate::game::nash_gap(&model, &vertex).unwrap(), 1.0);
        assert!(!is_restricted_nash(&model, &dist(vec![vec![0.5, 0.5]]), 1e-6).unwrap());

        let net = to_congestion_game(&example_network()).unwrap();
        assert!(is_restricted_nash(&net, &rounded_equilibrium(), 0.02).unwrap());
    }
}
