//! Non-atomic congestion games and the learning dynamics that drive them to
//! equilibrium.
//!
//! The crate is organised bottom-up:
//!
//! - [`game`]: congestion functions, the game model, product distributions,
//!   incidence matrices and loss evaluation.
//! - [`routing`]: directed networks with origin/destination populations,
//!   lowered to a [`CongestionModel`].
//! - [`potential`]: the Rosenthal potential, a Frank-Wolfe equilibrium solver
//!   and KKT certificates.
//! - [`learning`]: discount schedules, Hedge / REP / signed multiplicative
//!   weights updates, discounted regret and its theoretical bounds.
//! - [`replicator`]: the continuous-time replicator vector field, an RK4
//!   integrator on the product simplex and Lyapunov instrumentation.
//!
//! Distances on the product simplex are measured in the L∞ norm throughout.

pub mod error;
pub mod game;
pub mod learning;
pub mod potential;
pub mod replicator;
pub mod routing;

pub use error::{Error, Result};
pub use game::{
    evaluate_losses, loss_upper_bound, nash_gap, CongestionFunction, CongestionModel,
    IncidenceMatrices, LossProfile, Population, ProductDistribution,
};
pub use potential::{
    check_kkt, is_restricted_nash, potential, solve_nash, EquilibriumResult, KktCertificate,
    KktReport, PotentialValue, SolveError, SolverOptions,
};
pub use routing::{enumerate_paths, example_network, to_congestion_game, RoutingNetwork};
