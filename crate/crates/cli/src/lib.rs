//! Orchestration of the weak-measurement experiment: configuration, the
//! six-acquisition protocol, δ sweeps, verification batteries and the
//! artifact files they emit.

pub mod config;
pub mod error;
pub mod output;
pub mod protocol;
pub mod verify;

pub use config::{ExperimentConfig, Overrides};
pub use error::{CliError, Result};
