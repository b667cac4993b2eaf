//! Extraction of a sub-task decomposition from free-form model output.
//!
//! The first fenced code block holding a JSON array of sub-tasks wins. If no
//! fenced block yields one, the whole text is scanned for bare JSON arrays.
//! An array qualifies when it is non-empty and every element is either an
//! object `{"start", "end", "description"}` or a triple
//! `[start, end, "description"]` with numeric steps and a string description.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::decomposition::{Source, SubTask, SubTaskDecomposition, Violation, ViolationKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "outcome")]
pub enum ParseOutcome {
    Valid { decomposition: SubTaskDecomposition },
    Invalid { violations: Vec<Violation> },
    Unparseable { reason: UnparseableReason },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnparseableReason {
    NoDecompositionFound,
}

impl ParseOutcome {
    pub fn is_valid(&self) -> bool {
        matches!(self, ParseOutcome::Valid { .. })
    }

    pub fn decomposition(&self) -> Option<&SubTaskDecomposition> {
        match self {
            ParseOutcome::Valid { decomposition } => Some(decomposition),
            _ => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            ParseOutcome::Valid { .. } => "valid",
            ParseOutcome::Invalid { .. } => "invalid",
            ParseOutcome::Unparseable { .. } => "unparseable",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ValidityTally {
    pub valid: usize,
    pub invalid: usize,
    pub unparseable: usize,
}

impl ValidityTally {
    pub fn total(&self) -> usize {
        self.valid + self.invalid + self.unparseable
    }
}

pub fn tally_validity<'a>(outcomes: impl IntoIterator<Item = &'a ParseOutcome>) -> ValidityTally {
    let mut t = ValidityTally::default();
    for o in outcomes {
        match o {
            ParseOutcome::Valid { .. } => t.valid += 1,
            ParseOutcome::Invalid { .. } => t.invalid += 1,
            ParseOutcome::Unparseable { .. } => t.unparseable += 1,
        }
    }
    t
}

/// Parses `raw` into a [`ParseOutcome`]. Total over arbitrary input.
pub fn extract_decomposition(raw: &str) -> ParseOutcome {
    let candidate = fenced_blocks(raw)
        .into_iter()
        .find_map(first_candidate)
        .or_else(|| first_candidate(raw));
    let Some(items) = candidate else {
        return ParseOutcome::Unparseable {
            reason: UnparseableReason::NoDecompositionFound,
        };
    };
    convert(items)
}

/// Raw sub-task as found in the response, before step coercion.
struct RawItem {
    start: f64,
    start_int: Option<i128>,
    end: f64,
    end_int: Option<i128>,
    description: String,
}

fn convert(items: Vec<RawItem>) -> ParseOutcome {
    let mut violations = Vec::new();
    let mut subtasks = Vec::with_capacity(items.len());
    for (i, item) in items.into_iter().enumerate() {
        let start = coerce_step(item.start, item.start_int).map_err(|k| Violation::at(k, i));
        let end = coerce_step(item.end, item.end_int).map_err(|k| Violation::at(k, i));
        match (start, end) {
            (Ok(s), Ok(e)) => subtasks.push(SubTask::new(s, e, item.description)),
            (s, e) => {
                violations.extend(s.err());
                violations.extend(e.err());
                // keep indices aligned for the structural checks below
                subtasks.push(SubTask::new(0, 0, item.description));
            }
        }
    }
    let d = SubTaskDecomposition::new(subtasks, Source::FmPrediction);
    if violations.is_empty() {
        return match d.validate() {
            Ok(()) => ParseOutcome::Valid { decomposition: d },
            Err(violations) => ParseOutcome::Invalid { violations },
        };
    }
    // Structural checks only make sense between entries whose steps parsed.
    let bad: std::collections::BTreeSet<usize> = violations.iter().filter_map(|v| v.index).collect();
    for v in d.violations() {
        let involved = match (v.kind, v.index) {
            (ViolationKind::OutOfOrder, Some(i)) => bad.contains(&i) || bad.contains(&(i - 1)),
            (_, Some(i)) => bad.contains(&i) && v.kind != ViolationKind::EmptyDescription,
            _ => false,
        };
        if !involved {
            violations.push(v);
        }
    }
    violations.sort_by_key(|v| (v.index, v.kind as u8));
    ParseOutcome::Invalid { violations }
}

const MAX_STEP: f64 = 9_007_199_254_740_992.0; // 2^53

fn coerce_step(value: f64, exact: Option<i128>) -> Result<u64, ViolationKind> {
    if let Some(n) = exact {
        return if n < 0 {
            Err(ViolationKind::NegativeStep)
        } else {
            u64::try_from(n).map_err(|_| ViolationKind::StepOutOfRange)
        };
    }
    if !value.is_finite() {
        return Err(ViolationKind::StepOutOfRange);
    }
    if value.fract() != 0.0 {
        return Err(ViolationKind::NonIntegerStep);
    }
    if value < 0.0 {
        return Err(ViolationKind::NegativeStep);
    }
    if value > MAX_STEP {
        return Err(ViolationKind::StepOutOfRange);
    }
    Ok(value as u64)
}

/// Contents of every ``` fenced block, in order of appearance. An unclosed
/// trailing fence runs to the end of the text.
fn fenced_blocks(raw: &str) -> Vec<&str> {
    let mut blocks = Vec::new();
    let mut rest = raw;
    while let Some(open) = rest.find("```") {
        let after = &rest[open + 3..];
        // skip the info string (e.g. "json") up to the end of the line
        let body_start = after.find('\n').map(|i| i + 1).unwrap_or(after.len());
        let body = &after[body_start..];
        match body.find("```") {
            Some(close) => {
                blocks.push(&body[..close]);
                rest = &body[close + 3..];
            }
            None => {
                blocks.push(body);
                break;
            }
        }
    }
    blocks
}

/// First JSON array in `text` that type-checks as a decomposition.
fn first_candidate(text: &str) -> Option<Vec<RawItem>> {
    for (i, _) in text.match_indices('[') {
        let mut stream = serde_json::Deserializer::from_str(&text[i..]).into_iter::<Value>();
        if let Some(Ok(Value::Array(items))) = stream.next() {
            if let Some(parsed) = type_check(&items) {
                return Some(parsed);
            }
        }
    }
    None
}

fn type_check(items: &[Value]) -> Option<Vec<RawItem>> {
    if items.is_empty() {
        return None;
    }
    items.iter().map(raw_item).collect()
}

fn raw_item(v: &Value) -> Option<RawItem> {
    let (start, end, desc) = match v {
        Value::Object(map) => (map.get("start")?, map.get("end")?, map.get("description")?),
        Value::Array(triple) if triple.len() == 3 => (&triple[0], &triple[1], &triple[2]),
        _ => return None,
    };
    let (start, start_int) = number(start)?;
    let (end, end_int) = number(end)?;
    Some(RawItem {
        start,
        start_int,
        end,
        end_int,
        description: desc.as_str()?.to_string(),
    })
}

fn number(v: &Value) -> Option<(f64, Option<i128>)> {
    let n = v.as_number()?;
    let exact = n
        .as_u64()
        .map(i128::from)
        .or_else(|| n.as_i64().map(i128::from));
    Some((n.as_f64()?, exact))
}
