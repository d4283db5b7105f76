//! Experiment plans, the batch runner and the files it writes.

mod overhead;
mod plan;
mod run;

pub use overhead::{
    actor_params, aggregations, frl_bits, global_state_len, maddpg_bits, overhead, report_params, OverheadReport,
    ParamReport, ParamRow, BITS_PER_ELEMENT,
};
pub use plan::{Algo, BackhaulMode, Cell, ExperimentPlan};
pub use run::{
    config_hash, read_slot_means, run_cell, run_plan, summarize, write_outputs, Manifest, RunResult, SummaryRow,
    TidyRow,
};

use thiserror::Error;

use crate::baselines::BaselineError;
use crate::env::EnvError;
use crate::learn::LearnError;
use crate::scenario::ScenarioError;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid plan: {0}")]
    Plan(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
}

impl BenchError {
    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            BenchError::Plan(_) => "plan",
            BenchError::Io { .. } => "io",
            BenchError::Csv(_) => "csv",
            BenchError::Json(_) => "json",
            BenchError::Scenario(_) => "scenario",
            BenchError::Env(_) => "env",
            BenchError::Learn(_) => "learn",
            BenchError::Baseline(_) => "baseline",
        }
    }
}

pub(crate) fn io_err(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> BenchError + '_ {
    move |source| BenchError::Io { path: path.display().to_string(), source }
}
