//! Experiment runner around the `neuroevo` simulator: seeded runs, grid
//! sweeps and bit-exact replays.

pub mod commands;
pub mod config;
pub mod error;
pub mod replay;

pub use error::CliError;
