use crate::error::{Error, Result};
use crate::game::{loss_upper_bound, CongestionModel, ProductDistribution};
use crate::potential::potential_from_loads;

/// Entries this close below zero are clipped after a step; anything more
/// negative aborts the integration.
const CLIP_TOL: f64 = 1e-12;
/// Largest block-sum deviation tolerated before renormalizing.
const ESCAPE_TOL: f64 = 1e-9;

/// `F^k_p(μ) = μ^k_p (ℓ̄^k(μ) − ℓ^k_p(μ)) / ρ`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorFieldSample {
    pub field: Vec<Vec<f64>>,
}

impl VectorFieldSample {
    pub fn sup_norm(&self) -> f64 {
        self.field
            .iter()
            .flatten()
            .fold(0.0, |m: f64, x| m.max(x.abs()))
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if rho.is_finite() && rho > 0.0 {
        Ok(())
    } else {
        Err(Error::Precondition(format!(
            "loss bound rho must be positive and finite, got {rho}"
        )))
    }
}

/// Field and Lyapunov derivative evaluated on raw blocks, which intermediate
/// RK stages may push marginally off the simplex.
fn field_raw(model: &CongestionModel, blocks: &[Vec<f64>], rho: f64) -> Result<Vec<Vec<f64>>> {
    let loads = model.resource_loads(blocks)?;
    let losses = model.bundle_losses_at(&loads);
    Ok(blocks
        .iter()
        .zip(&losses)
        .map(|(mu, l)| {
            let avg: f64 = mu.iter().zip(l).map(|(m, x)| m * x).sum();
            mu.iter().zip(l).map(|(m, x)| m * (avg - x) / rho).collect()
        })
        .collect())
}

pub fn vector_field(
    model: &CongestionModel,
    mu: &ProductDistribution,
    rho: f64,
) -> Result<VectorFieldSample> {
    mu.check_shape(model)?;
    check_rho(rho)?;
    Ok(VectorFieldSample {
        field: field_raw(model, mu.blocks(), rho)?,
    })
}

fn lyapunov_raw(model: &CongestionModel, blocks: &[Vec<f64>], loads: &[f64], rho: f64) -> f64 {
    let losses = model.bundle_losses_at(loads);
    blocks
        .iter()
        .zip(&losses)
        .zip(model.populations())
        .map(|((mu, l), pop)| {
            let first: f64 = mu.iter().zip(l).map(|(m, x)| m * x).sum();
            let second: f64 = mu.iter().zip(l).map(|(m, x)| m * x * x).sum();
            pop.mass / rho * (first * first - second)
        })
        .sum()
}

/// `V̇ = Σ_k (m_k/ρ) [(Σ_p μ^k_p ℓ^k_p)² − Σ_p μ^k_p (ℓ^k_p)²]`, the rate of
/// change of the potential along the replicator flow. Never positive, by
/// Jensen's inequality.
pub fn lyapunov_derivative(
    model: &CongestionModel,
    mu: &ProductDistribution,
    rho: f64,
) -> Result<f64> {
    mu.check_shape(model)?;
    check_rho(rho)?;
    let loads = model.resource_loads(mu.blocks())?;
    Ok(lyapunov_raw(model, mu.blocks(), &loads, rho))
}

/// Step size and output thinning for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    /// Upper bound on `|Δμ^k_p|` for one step.
    pub max_drift: f64,
    /// Keep every n-th step (the first and last states are always kept).
    pub record_every: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl {
            max_drift: 1e-3,
            record_every: 1,
        }
    }
}

impl StepControl {
    pub fn with_max_drift(max_drift: f64) -> Self {
        StepControl {
            max_drift,
            ..Self::default()
        }
    }

    pub fn record_every(mut self, n: usize) -> Self {
        self.record_every = n;
        self
    }

    /// Since `|F^k_p| ≤ μ_p (1 − μ_p) ≤ 1/4` on Δ, a step of `4 · max_drift`
    /// moves no coordinate further than `max_drift`.
    pub fn nominal_step(&self) -> f64 {
        4.0 * self.max_drift
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdeTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<ProductDistribution>,
    pub potentials: Vec<f64>,
    pub lyapunov: Vec<f64>,
    /// The ρ used to scale the field.
    pub rho: f64,
    /// Actual step size (the nominal one shrunk to divide `t_end` evenly).
    pub step: f64,
}

impl OdeTrajectory {
    pub fn final_state(&self) -> &ProductDistribution {
        self.states
            .last()
            .expect("trajectories hold at least one state")
    }

    /// State recorded at the time closest to `t`.
    pub fn state_near(&self, t: f64) -> &ProductDistribution {
        let i = self
            .times
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))
            .map(|(i, _)| i)
            .unwrap_or(0);
        &self.states[i]
    }
}

/// Time scaling used for the ODE: the loss bound, or 1 when every loss is 0.
pub fn ode_rho(model: &CongestionModel) -> f64 {
    let rho = loss_upper_bound(model);
    if rho > 0.0 {
        rho
    } else {
        1.0
    }
}

fn axpy(base: &[Vec<f64>], h: f64, dir: &[Vec<f64>]) -> Vec<Vec<f64>> {
    base.iter()
        .zip(dir)
        .map(|(b, d)| b.iter().zip(d).map(|(x, y)| x + h * y).collect())
        .collect()
}

/// Clips tiny negative entries and renormalizes each block; larger
/// excursions are reported as failures.
fn project(blocks: &mut [Vec<f64>], time: f64) -> Result<()> {
    for (k, b) in blocks.iter_mut().enumerate() {
        for x in b.iter_mut() {
            if !x.is_finite() {
                return Err(Error::Integration {
                    time,
                    reason: format!("population {k}: non-finite state"),
                });
            }
            if *x < 0.0 {
                if *x < -CLIP_TOL {
                    return Err(Error::Integration {
                        time,
                        reason: format!("population {k}: entry {x} left the simplex"),
                    });
                }
                *x = 0.0;
            }
        }
        let s: f64 = b.iter().sum();
        if (s - 1.0).abs() > ESCAPE_TOL {
            return Err(Error::Integration {
                time,
                reason: format!("population {k}: block sums to {s}"),
            });
        }
        b.iter_mut().for_each(|x| *x /= s);
    }
    Ok(())
}

/// Integrates the replicator ODE from an interior point with classical RK4
/// at a fixed step, renormalizing every block after each step.
pub fn integrate(
    model: &CongestionModel,
    mu0: &ProductDistribution,
    t_end: f64,
    control: StepControl,
) -> Result<OdeTrajectory> {
    mu0.check_shape(model)?;
    if !mu0.is_interior() {
        return Err(Error::Precondition(
            "replicator integration needs a strictly interior initial state".into(),
        ));
    }
    if !(t_end.is_finite() && t_end >= 0.0) {
        return Err(Error::Precondition(format!(
            "end time must be finite and non-negative, got {t_end}"
        )));
    }
    if !(control.max_drift.is_finite() && control.max_drift > 0.0) {
        return Err(Error::Precondition(format!(
            "max drift must be positive, got {}",
            control.max_drift
        )));
    }
    if control.record_every == 0 {
        return Err(Error::Precondition(
            "record_every must be at least 1".into(),
        ));
    }
    let rho = ode_rho(model);
    let steps = (t_end / control.nominal_step()).ceil() as usize;
    let h = if steps == 0 {
        0.0
    } else {
        t_end / steps as f64
    };

    let mut traj = OdeTrajectory {
        times: Vec::new(),
        states: Vec::new(),
        potentials: Vec::new(),
        lyapunov: Vec::new(),
        rho,
        step: h,
    };
    let record = |traj: &mut OdeTrajectory, t: f64, blocks: &[Vec<f64>]| -> Result<()> {
        let loads = model.resource_loads(blocks)?;
        traj.times.push(t);
        traj.potentials.push(potential_from_loads(model, &loads));
        traj.lyapunov.push(lyapunov_raw(model, blocks, &loads, rho));
        traj.states.push(ProductDistribution::new(blocks.to_vec())?);
        Ok(())
    };

    let mut y = mu0.blocks().to_vec();
    record(&mut traj, 0.0, &y)?;
    for i in 1..=steps {
        let k1 = field_raw(model, &y, rho)?;
        let k2 = field_raw(model, &axpy(&y, h / 2.0, &k1), rho)?;
        let k3 = field_raw(model, &axpy(&y, h / 2.0, &k2), rho)?;
        let k4 = field_raw(model, &axpy(&y, h, &k3), rho)?;
        for (k, yk) in y.iter_mut().enumerate() {
            for (p, v) in yk.iter_mut().enumerate() {
                *v += h / 6.0 * (k1[k][p] + 2.0 * k2[k][p] + 2.0 * k3[k][p] + k4[k][p]);
            }
        }
        let t = i as f64 * h;
        project(&mut y, t)?;
        if i % control.record_every == 0 || i == steps {
            record(&mut traj, t, &y)?;
        }
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{CongestionFunction, Population};
    use crate::learning::rep_update;
    use crate::routing::{example_network, to_congestion_game};

    fn pigou() -> CongestionModel {
        CongestionModel::new(
            vec![
                CongestionFunction::constant(1.0).unwrap(),
                CongestionFunction::affine(1.0, 0.0).unwrap(),
            ],
            vec![Population::new(1.0, vec![vec![0], vec![1]])],
        )
        .unwrap()
    }

    fn half() -> ProductDistribution {
        ProductDistribution::new(vec![vec![0.5, 0.5]]).unwrap()
    }

    #[test]
    fn pigou_field_and_lyapunov() {
        let f = vector_field(&pigou(), &half(), 1.0).unwrap();
        assert!((f.field[0][0] + 0.125).abs() < 1e-15);
        assert!((f.field[0][1] - 0.125).abs() < 1e-15);
        let v = lyapunov_derivative(&pigou(), &half(), 1.0).unwrap();
        assert!((v + 0.0625).abs() < 1e-15);
    }

    #[test]
    fn vertices_are_stationary() {
        let m = pigou();
        let mu = ProductDistribution::vertex(&m, &[0]).unwrap();
        assert_eq!(vector_field(&m, &mu, 1.0).unwrap().sup_norm(), 0.0);
        assert_eq!(lyapunov_derivative(&m, &mu, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn rep_step_is_the_euler_step() {
        let m = pigou();
        let mu = ProductDistribution::new(vec![vec![0.3, 0.7]]).unwrap();
        let rho = 2.0;
        let f = vector_field(&m, &mu, rho).unwrap();
        let l = m.losses(&mu).unwrap();
        let next = rep_update(mu.block(0), &l.bundle_losses[0], 0.4, rho).unwrap();
        for ((x, m0), d) in next.iter().zip(mu.block(0)).zip(&f.field[0]) {
            assert!((x - (m0 + 0.4 * d)).abs() < 1e-14);
        }
    }

    #[test]
    fn boundary_start_is_rejected() {
        let m = pigou();
        let mu = ProductDistribution::vertex(&m, &[1]).unwrap();
        assert!(integrate(&m, &mu, 1.0, StepControl::default()).is_err());
    }

    #[test]
    fn pigou_flow_moves_toward_the_variable_link() {
        let m = pigou();
        let traj = integrate(&m, &half(), 40.0, StepControl::default()).unwrap();
        let second: Vec<f64> = traj.states.iter().map(|s| s.block(0)[1]).collect();
        assert!(second.windows(2).all(|w| w[1] > w[0]));
        assert!(second.last().unwrap() > &0.9);
        assert!((traj.times.last().unwrap() - 40.0).abs() < 1e-12);
        assert!(traj.potentials.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn example_network_flow_reaches_equilibrium() {
        let m = to_congestion_game(&example_network()).unwrap();
        let mu0 = ProductDistribution::uniform(&m);
        let traj = integrate(&m, &mu0, 400.0, StepControl::default().record_every(1000)).unwrap();
        let gap = m.losses(traj.final_state()).unwrap().nash_gap();
        assert!(gap <= 1e-3, "terminal gap {gap}");
    }

    #[test]
    fn zero_horizon_keeps_the_initial_state() {
        let m = pigou();
        let traj = integrate(&m, &half(), 0.0, StepControl::default()).unwrap();
        assert_eq!(traj.states, vec![half()]);
    }
}
