//! Error type shared by all engines.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid game: {0}")]
    InvalidGame(String),

    #[error("invalid belief: {0}")]
    InvalidBelief(String),

    #[error("invalid prior vector: {0}")]
    InvalidPrior(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid initial distribution: {0}")]
    InvalidDistribution(String),

    #[error("population needs at least 2 agents, got {0}")]
    PopulationTooSmall(usize),

    #[error("no interior mixed equilibrium: {0}")]
    NoMixedEquilibrium(String),

    #[error("invalid ensemble: {0}")]
    InvalidEnsemble(String),

    #[error("invalid series: {0}")]
    InvalidSeries(String),

    #[error("non-finite state at t = {t} (step {step}): {what}")]
    NonFinite { t: f64, step: u64, what: String },
}
