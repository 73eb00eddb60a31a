//! Scenario-driven front end for `jcaudit-core`: parse a TOML scenario, run
//! one of the `certify`, `evolve`, `converge` or `bench` commands, and write
//! its reports.

pub mod commands;
pub mod config;
pub mod output;
pub mod presets;

pub use commands::Outcome;
pub use config::{ConfigError, Scenario};
