//! Sub-tasks, sub-task decompositions and their structural validation.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::CoreError;

/// One temporally bounded, described motion inside a trajectory.
///
/// `start` and `end` are inclusive step indices. The type does not enforce
/// `start <= end`; predictions coming back from a model can violate it and
/// must stay representable so they can be reported.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SubTask {
    pub start: u64,
    pub end: u64,
    pub description: String,
}

impl SubTask {
    pub fn new(start: u64, end: u64, description: impl Into<String>) -> Self {
        Self {
            start,
            end,
            description: description.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    #[default]
    GroundTruth,
    FmPrediction,
    HumanAnnotation,
}

/// What is wrong with a decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    /// The decomposition has no sub-tasks.
    Empty,
    /// `start > end` for one sub-task.
    StartAfterEnd,
    /// A sub-task starts strictly earlier than its predecessor.
    OutOfOrder,
    /// Description is empty or whitespace.
    EmptyDescription,
    /// A step index in the raw response was fractional.
    NonIntegerStep,
    /// A step index in the raw response was negative.
    NegativeStep,
    /// A step index in the raw response does not fit the step type.
    StepOutOfRange,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ViolationKind::Empty => "empty decomposition",
            ViolationKind::StartAfterEnd => "start after end",
            ViolationKind::OutOfOrder => "start earlier than previous sub-task",
            ViolationKind::EmptyDescription => "empty description",
            ViolationKind::NonIntegerStep => "non-integer step index",
            ViolationKind::NegativeStep => "negative step index",
            ViolationKind::StepOutOfRange => "step index out of range",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    /// Offending sub-task index, absent for whole-decomposition violations.
    pub index: Option<usize>,
}

impl Violation {
    pub fn at(kind: ViolationKind, index: usize) -> Self {
        Self {
            kind,
            index: Some(index),
        }
    }

    pub fn whole(kind: ViolationKind) -> Self {
        Self { kind, index: None }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.index {
            Some(i) => write!(f, "{} at sub-task {}", self.kind, i),
            None => write!(f, "{}", self.kind),
        }
    }
}

/// A temporally ordered collection of sub-tasks.
///
/// Ordering contract: consecutive starts are non-decreasing, equal starts are
/// allowed. Overlaps and gaps between sub-tasks are allowed. The number of
/// steps `K` is derived as the largest `end`, never stored.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubTaskDecomposition {
    pub subtasks: Vec<SubTask>,
    #[serde(default)]
    pub source: Source,
}

impl SubTaskDecomposition {
    pub fn new(subtasks: Vec<SubTask>, source: Source) -> Self {
        Self { subtasks, source }
    }

    pub fn ground_truth(subtasks: Vec<SubTask>) -> Self {
        Self::new(subtasks, Source::GroundTruth)
    }

    pub fn len(&self) -> usize {
        self.subtasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subtasks.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, SubTask> {
        self.subtasks.iter()
    }

    /// Every violation of the decomposition invariants, in index order.
    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.subtasks.is_empty() {
            out.push(Violation::whole(ViolationKind::Empty));
            return out;
        }
        for (i, s) in self.subtasks.iter().enumerate() {
            if s.start > s.end {
                out.push(Violation::at(ViolationKind::StartAfterEnd, i));
            }
            if i > 0 && self.subtasks[i - 1].start > s.start {
                out.push(Violation::at(ViolationKind::OutOfOrder, i));
            }
            if s.description.trim().is_empty() {
                out.push(Violation::at(ViolationKind::EmptyDescription, i));
            }
        }
        out
    }

    pub fn validate(&self) -> Result<(), Vec<Violation>> {
        validate_decomposition(self)
    }

    /// `(K, N)`: the largest end step and the number of sub-tasks.
    pub fn extent(&self) -> Result<(u64, usize), CoreError> {
        derive_extent(self)
    }

    /// Largest end step, or `None` when empty.
    pub fn steps(&self) -> Option<u64> {
        self.subtasks.iter().map(|s| s.end).max()
    }

    /// True when the sub-tasks cover `0..=K` exactly once, in order, with no
    /// gap and no overlap.
    pub fn tiles_range(&self) -> bool {
        let mut next = 0u64;
        for s in &self.subtasks {
            if s.start != next || s.end < s.start {
                return false;
            }
            next = s.end + 1;
        }
        !self.subtasks.is_empty()
    }

    pub fn to_file(&self) -> DecompositionFile {
        DecompositionFile {
            metadata: DecompositionMetadata {
                source: self.source,
                env_name: None,
                seed: None,
            },
            subtasks: self.subtasks.clone(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), CoreError> {
        self.to_file().save(path)
    }

    pub fn load(path: &Path) -> Result<Self, CoreError> {
        Ok(DecompositionFile::load(path)?.into_decomposition())
    }
}

/// Returns `Ok(())` iff every invariant holds, otherwise all violations found.
pub fn validate_decomposition(d: &SubTaskDecomposition) -> Result<(), Vec<Violation>> {
    let v = d.violations();
    if v.is_empty() {
        Ok(())
    } else {
        Err(v)
    }
}

pub fn derive_extent(d: &SubTaskDecomposition) -> Result<(u64, usize), CoreError> {
    let k = d.steps().ok_or(CoreError::EmptyDecomposition)?;
    Ok((k, d.len()))
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DecompositionMetadata {
    pub source: Source,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub env_name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// On-disk decomposition: a metadata header followed by the ordered sub-task
/// array. A bare JSON array of sub-tasks is also accepted when reading, in
/// which case the source defaults to a human annotation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecompositionFile {
    pub metadata: DecompositionMetadata,
    pub subtasks: Vec<SubTask>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum AnyDecompositionFile {
    Full(DecompositionFile),
    Bare(Vec<SubTask>),
}

impl DecompositionFile {
    pub fn into_decomposition(self) -> SubTaskDecomposition {
        SubTaskDecomposition::new(self.subtasks, self.metadata.source)
    }

    pub fn from_json(text: &str) -> Result<Self, CoreError> {
        match serde_json::from_str::<AnyDecompositionFile>(text)? {
            AnyDecompositionFile::Full(f) => Ok(f),
            AnyDecompositionFile::Bare(subtasks) => Ok(Self {
                metadata: DecompositionMetadata {
                    source: Source::HumanAnnotation,
                    ..Default::default()
                },
                subtasks,
            }),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("decomposition serializes")
    }

    pub fn save(&self, path: &Path) -> Result<(), CoreError> {
        crate::io::write_atomic(path, self.to_json().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self, CoreError> {
        let text = std::fs::read_to_string(path).map_err(|e| CoreError::io(path, e))?;
        Self::from_json(&text)
    }
}
