//! Experiment orchestration: configuration, data loading, per-query runs,
//! reformulation sweeps, timing, and artifact output.

pub mod config;
pub mod data;
pub mod experiment;
pub mod sweep;
pub mod timing;

use thiserror::Error;

pub use config::{ExperimentConfig, PipelineKind, ReformulationSource, TeacherKind};
pub use data::{load_queries, read_queries};
pub use experiment::{run_experiment, Experiment, ExperimentOutcome};
pub use sweep::{sweep_reformulations, SweepOutcome, SweepRow};
pub use timing::{latency_summary, TimingRecord};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("I/O error: {0}")]
    Io(String),
    #[error("{failed} of {total} queries failed (artifacts in {dir})")]
    MajorityFailure { failed: usize, total: usize, dir: String },
}

impl ExperimentError {
    /// Process exit status for the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Config(_) => 1,
            ExperimentError::MajorityFailure { .. } => 2,
            ExperimentError::Io(_) => 3,
        }
    }
}

impl From<std::io::Error> for ExperimentError {
    fn from(e: std::io::Error) -> Self {
        ExperimentError::Io(e.to_string())
    }
}
