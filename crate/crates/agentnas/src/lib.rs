//! Experiment runner for multi-agent architecture search: config files,
//! parallel repeats, CSV/JSON artifacts and the `agentnas` command line.
//!
//! The algorithms and environments live in [`agentnas_core`].

pub mod artifacts;
pub mod cli;
pub mod config;
pub mod experiment;
pub mod figures;
pub mod generate;
pub mod tabular;

pub use agentnas_core as core;
