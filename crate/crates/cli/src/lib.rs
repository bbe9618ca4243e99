//! Command-line front end for the fictitious-play toolkit: loads a JSON
//! experiment configuration, dispatches it to one of the engines in
//! `fplearn-core` (agent-based process, mean-field particle transport,
//! box model, best-response dynamics, mean best-response ODE), writes the
//! artifacts with a hashed manifest, and diffs runs against each other.

pub mod compare;
pub mod config;
pub mod error;
pub mod presets;
pub mod runner;
pub mod svg;
