//! Experiment harness: configuration, execution, persistence, and
//! re-diagnosis of stored runs.

mod config;
mod diagnose;
mod output;
mod run;

use thiserror::Error;

pub use config::{CostFloor, ExperimentConfig, Mode};
pub use diagnose::{diagnose_directory, DiagnoseOutcome};
pub use output::{
    aggregate_regret, experiment_paths, read_epochs_csv, read_trace_csv, replication_indices,
    write_aggregate_csv, write_epochs_csv, write_trace_csv, AggregateRow, RunMeta,
    AGGREGATE_HEADER, EPOCH_HEADER, TRACE_HEADER,
};
pub use run::{
    build_environment, build_theory_report, compute_regret, derive_seed, run_episode,
    run_experiment, run_replication, EpisodeOutcome, EpisodeRow, ExperimentSummary, RegretTrace,
    StepRecord,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
    #[error(transparent)]
    Planner(#[from] crate::planner::PlannerError),
    #[error(transparent)]
    Agent(#[from] crate::agents::AgentError),
    #[error(transparent)]
    Diagnostics(#[from] crate::diagnostics::DiagnosticsError),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("malformed stored data: {0}")]
    Format(String),
    #[error("theory violation: {0}")]
    TheoryViolation(String),
    #[error("replication {index} failed: {source}")]
    Replication {
        index: usize,
        source: Box<HarnessError>,
    },
}
