mod common;

use common::{pigou, random_affine, random_model, random_point, rng, two_links};
use congestion_core::learning::rep_update;
use congestion_core::replicator::{
    integrate, lyapunov_derivative, ode_rho, vector_field, StepControl,
};
use congestion_core::{potential, ProductDistribution};
use proptest::prelude::*;
use rand::Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn lyapunov_derivative_is_never_positive(seed in any::<u64>()) {
        let mut g = rng(seed);
        let model = random_model(&mut g);
        let mu = random_point(&mut g, &model);
        let rho = ode_rho(&model);
        prop_assert!(lyapunov_derivative(&model, &mu, rho).unwrap() <= 1e-12);
    }

    #[test]
    fn field_is_tangent_and_matches_gradient_pairing(seed in any::<u64>()) {
        let mut g = rng(seed);
        let model = random_model(&mut g);
        let mu = random_point(&mut g, &model);
        let rho = ode_rho(&model);
        let field = vector_field(&model, &mu, rho).unwrap().field;
        for f in &field {
            prop_assert!(f.iter().sum::<f64>().abs() <= 1e-14 * (1.0 + f.len() as f64));
        }
        let grad = potential(&model, &mu).unwrap().gradient;
        let pairing: f64 = grad.iter().flatten().zip(field.iter().flatten()).map(|(a, b)| a * b).sum();
        let closed = lyapunov_derivative(&model, &mu, rho).unwrap();
        prop_assert!((pairing - closed).abs() <= 1e-10);
    }

    #[test]
    fn rep_step_is_an_euler_step(seed in any::<u64>()) {
        let mut g = rng(seed);
        let model = random_model(&mut g);
        let mu = random_point(&mut g, &model);
        let rho = ode_rho(&model);
        let gamma = g.random_range(0.0..=1.0);
        let field = vector_field(&model, &mu, rho).unwrap().field;
        let losses = model.losses(&mu).unwrap().bundle_losses;
        for k in 0..model.num_populations() {
            let next = rep_update(mu.block(k), &losses[k], gamma, rho).unwrap();
            for (p, x) in next.iter().enumerate() {
                prop_assert!((x - (mu.block(k)[p] + gamma * field[k][p])).abs() <= 1e-14);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10))]

    #[test]
    fn potential_decreases_along_trajectories(seed in any::<u64>()) {
        let mut g = rng(seed);
        let model = random_model(&mut g);
        let mu0 = random_point(&mut g, &model);
        let traj = integrate(&model, &mu0, 20.0, StepControl::default()).unwrap();
        for w in traj.potentials.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-6);
        }
        prop_assert!(traj.lyapunov.iter().all(|&v| v <= 1e-12));
    }

    #[test]
    fn halving_the_step_barely_moves_the_endpoint(seed in any::<u64>()) {
        let mut g = rng(seed);
        let model = random_model(&mut g);
        let mu0 = random_point(&mut g, &model);
        let coarse = integrate(&model, &mu0, 10.0, StepControl::default()).unwrap();
        let fine = integrate(&model, &mu0, 10.0, StepControl::with_max_drift(5e-4)).unwrap();
        prop_assert!(coarse.final_state().linf_distance(fine.final_state()) <= 1e-5);
    }
}

#[test]
fn interior_equilibrium_is_stationary() {
    let mut g = rng(3);
    let f = random_affine(&mut g);
    let model = two_links(f.clone(), f);
    let mu0 = ProductDistribution::new(vec![vec![0.5, 0.5]]).unwrap();
    let traj = integrate(&model, &mu0, 50.0, StepControl::default()).unwrap();
    assert!(traj.states.iter().all(|s| s.linf_distance(&mu0) <= 1e-9));
}

#[test]
fn pigou_flow_is_monotone_at_two_resolutions() {
    let model = pigou();
    let mu0 = ProductDistribution::new(vec![vec![0.5, 0.5]]).unwrap();
    let coarse = integrate(&model, &mu0, 30.0, StepControl::default()).unwrap();
    let fine = integrate(&model, &mu0, 30.0, StepControl::with_max_drift(2.5e-4)).unwrap();
    for traj in [&coarse, &fine] {
        let second: Vec<f64> = traj.states.iter().map(|s| s.block(0)[1]).collect();
        assert!(second.windows(2).all(|w| w[1] > w[0]));
        assert!(*second.last().unwrap() < 1.0);
    }
    assert!(coarse.final_state().linf_distance(fine.final_state()) < 1e-8);
    assert!(fine.final_state().block(0)[1] > 0.9);
}
