//! Fictitious-play learning in large populations.
//!
//! Agents carry a vector of decayed opponent-action counts (a "prior"),
//! believe the population mixes according to its normalization, and best
//! respond to that belief. This crate implements the same dynamics at three
//! levels of description and lets them be compared run for run:
//!
//! * [`abm`]: the exact stochastic process. Random pairs play, both sides
//!   update their priors with the opponent's realized action.
//! * [`meanfield`]: a weighted particle discretization of the transport
//!   equation for the population density over prior space, with an optional
//!   diffusion correction integrated as an SDE.
//! * [`odes`]: reduced descriptions that collapse the density to a few
//!   moments: a rigid box of uniform density, best-response dynamics for the
//!   mean belief, and a closed linear equation for the mean best response.
//!
//! Every sampled quantity draws from named sub-streams of one master seed
//! ([`rng`]), and every reduction over particles or agents folds in a fixed
//! chunk order ([`exec`]), so runs reproduce bit for bit across repeats and
//! across the sequential and rayon execution backends.

pub mod abm;
pub mod error;
pub mod exec;
pub mod game;
pub mod init;
pub mod linalg;
pub mod meanfield;
pub mod odes;
pub mod rng;
pub mod series;

pub use error::{Error, Result};
