//! Batch orchestration: generate trajectories, prompt providers, parse and
//! score their answers across an ablation grid, then aggregate and report.

pub mod batch;
pub mod config;
pub mod evaluate;
pub mod report;
pub mod stats;

pub use batch::{run_batch, CellProgress, CellStatus, Manifest, RunSummary};
pub use config::{CassetteSettings, EncoderChoice, ProviderRef, RunConfig};
pub use evaluate::{evaluate_external, EvalError};
pub use report::{emit_report, ReportFormat};
pub use stats::{aggregate_stats, sample_mean_std, StatsRow};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("invalid run config: {0}")]
    Config(String),
    #[error("{path}: {message}")]
    Artifact { path: String, message: String },
    #[error(transparent)]
    Core(#[from] subtask_core::CoreError),
    #[error(transparent)]
    Provider(#[from] subtask_fmclient::FmError),
    #[error(transparent)]
    Sim(#[from] subtask_core::simgen::SimError),
    #[error(transparent)]
    Prompt(#[from] subtask_core::prompt::PromptError),
}

pub(crate) fn artifact_error(path: &std::path::Path, message: impl ToString) -> RunError {
    RunError::Artifact {
        path: path.display().to_string(),
        message: message.to_string(),
    }
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &std::path::Path) -> Result<T, RunError> {
    let text = std::fs::read_to_string(path).map_err(|e| artifact_error(path, e))?;
    serde_json::from_str(&text).map_err(|e| artifact_error(path, e))
}

pub(crate) fn write_json<T: serde::Serialize>(path: &std::path::Path, value: &T) -> Result<(), RunError> {
    let text = serde_json::to_string_pretty(value).expect("artifact serializes");
    Ok(subtask_core::io::write_atomic(path, text.as_bytes())?)
}
