use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid congestion function: {0}")]
    InvalidFunction(String),

    #[error("model has no populations")]
    NoPopulations,

    #[error("population {population}: mass must be finite and positive, got {mass}")]
    InvalidMass { population: usize, mass: f64 },

    #[error("population {population} has an empty bundle set")]
    EmptyBundleSet { population: usize },

    #[error("population {population}, bundle {bundle}: {reason}")]
    InvalidBundle {
        population: usize,
        bundle: usize,
        reason: String,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("population {population}: {reason}")]
    NotADistribution { population: usize, reason: String },

    #[error("invalid routing network: {0}")]
    InvalidNetwork(String),

    #[error("population {population} ({source_vertex} -> {sink}) has no path")]
    NoPath {
        population: usize,
        source_vertex: String,
        sink: String,
    },

    #[error("invalid discount sequence: {0}")]
    InvalidDiscount(String),

    #[error("update precondition violated: {0}")]
    Precondition(String),

    #[error("replicator integration failed at t = {time}: {reason}")]
    Integration { time: f64, reason: String },
}
