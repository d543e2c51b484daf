//! Experiment configuration, seeded orchestration, and trace output.

mod config;
mod output;
mod run;

use std::path::PathBuf;

use thiserror::Error;

pub use config::{EnvironmentSpec, ExperimentConfig, OracleSpec};
pub use output::{read_trace_csv, write_trace_csv, PairedRow, TraceRow};
pub use run::{
    compare_solvers, enumerate_measurements, run_experiment, validate_config, AnyOracle, ComparisonReport, ExperimentReport,
    RunSummary, Stats, ValidationReport,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Solve(#[from] crate::solver::SolveError),
    #[error(transparent)]
    Mdp(#[from] crate::mdp::MdpError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("environment has {count} deterministic policies, more than the limit {limit}")]
    TooManyPolicies { count: String, limit: u64 },
}

impl HarnessError {
    /// Process exit code: 1 for configuration problems, 2 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config { .. } | Self::Parse(_) => 1,
            _ => 2,
        }
    }
}
