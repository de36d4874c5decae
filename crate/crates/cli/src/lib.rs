//! Experiment drivers for the `cfmimo` command line tool.
//!
//! A run is described by an [`ExperimentSpec`], usually loaded from a flat
//! `key = value` file, and produces one CSV [`Table`]. Output is a pure
//! function of the [`ExperimentSpec`] and its master seed.

pub mod config;
pub mod experiments;
pub mod schemes;

pub use cfmimo_core::seed::derive_seed;
pub use config::{ExperimentKind, ExperimentSpec};
pub use experiments::{run_experiment, Table};
pub use schemes::PilotScheme;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },
    #[error("invalid experiment: {0}")]
    Invalid(String),
    #[error("i/o: {0}")]
    Io(String),
    #[error(transparent)]
    Core(#[from] cfmimo_core::Error),
}
