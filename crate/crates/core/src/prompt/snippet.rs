use std::fmt::Write;

use super::table::{header, row};
use super::PromptError;
use crate::decomposition::SubTaskDecomposition;
use crate::trajectory::TrajectoryData;

/// Partial worked example from a held-out trajectory: for every boundary
/// between consecutive sub-tasks, the row of the last step before it and the
/// row of the first step after it, annotated with both sub-tasks.
///
/// Emits exactly `2 * (N - 1)` data rows.
pub fn make_one_shot_snippet(
    holdout: &TrajectoryData,
    decomposition: &SubTaskDecomposition,
) -> Result<String, PromptError> {
    if decomposition.len() < 2 {
        return Err(PromptError::NoTransitions);
    }
    let mut out = String::new();
    let _ = writeln!(
        out,
        "Transitions between sub-tasks in another {} trajectory. Rows use the TEXTUAL DATA columns:",
        holdout.env_name
    );
    out.push_str(&header(holdout));
    for (i, pair) in decomposition.subtasks.windows(2).enumerate() {
        let (a, b) = (&pair[0], &pair[1]);
        let last = holdout.step(a.end).ok_or(PromptError::MissingStep(a.end))?;
        let first = holdout.step(b.start).ok_or(PromptError::MissingStep(b.start))?;
        let _ = write!(
            out,
            "\n# transition {}: {{\"start\": {}, \"end\": {}, \"description\": {}}} -> {{\"start\": {}, \"end\": {}, \"description\": {}}}\n{}\n{}",
            i + 1,
            a.start,
            a.end,
            json_str(&a.description),
            b.start,
            b.end,
            json_str(&b.description),
            row(last),
            row(first)
        );
    }
    Ok(out)
}

fn json_str(s: &str) -> String {
    serde_json::to_string(s).expect("string serializes")
}
