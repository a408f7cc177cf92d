//! Config-driven runner for the serial MQFT simulator: parses experiment
//! files, runs trials in parallel with per-trial random streams and writes
//! trial records, tables and a summary.

pub mod config;
pub mod error;
pub mod experiment;
pub mod records;

pub use config::{ExperimentConfig, Mode, PhaseSource};
pub use error::{CliError, Result};
pub use experiment::{run_experiment, ModeResult, RunSummary};
pub use records::emit_records;
