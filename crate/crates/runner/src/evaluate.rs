use std::path::{Path, PathBuf};

use subtask_core::decomposition::DecompositionFile;
use subtask_core::{similarity, CoreError, Encoder, SimilarityError, SimilarityReport, Violation};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{}: {source}", path.display())]
    Load { path: PathBuf, source: CoreError },
    #[error("{}: invalid decomposition: {}", path.display(), describe(violations))]
    Invalid { path: PathBuf, violations: Vec<Violation> },
    #[error(transparent)]
    Similarity(#[from] SimilarityError),
}

fn describe(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(|v| match v.index {
            Some(i) => format!("{} (sub-task {i})", v.kind),
            None => v.kind.to_string(),
        })
        .collect::<Vec<_>>()
        .join("; ")
}

fn load_valid(path: &Path) -> Result<subtask_core::SubTaskDecomposition, EvalError> {
    let d = DecompositionFile::load(path)
        .map_err(|source| EvalError::Load { path: path.into(), source })?
        .into_decomposition();
    d.validate().map_err(|violations| EvalError::Invalid {
        path: path.into(),
        violations,
    })?;
    Ok(d)
}

/// Scores a decomposition file (for example a human annotation) against a
/// ground-truth file, exactly as the batch pipeline scores predictions.
pub fn evaluate_external(gt: &Path, pred: &Path, encoder: &dyn Encoder) -> Result<SimilarityReport, EvalError> {
    let gt = load_valid(gt)?;
    let pred = load_valid(pred)?;
    Ok(similarity(&gt, &pred, encoder)?)
}
