//! Scenario runner for congestion-game learning dynamics: JSON game specs,
//! population-level simulations of Hedge, REP and signed multiplicative
//! weights, convergence diagnostics and CSV / SVG export.

pub mod config;
pub mod diagnostics;
pub mod error;
pub mod export;
pub mod plot;
pub mod sampling;
pub mod simulate;
pub mod spec;

pub use config::{Algorithm, InitialDistribution, SimulationConfig};
pub use error::{Result, SimError};
pub use simulate::{run_simulation, RunMetadata, Simulation, TrajectoryRecord};
pub use spec::{load_game, Game, GameSpec};
