//! Temporal and semantic similarity between two sub-task decompositions.
//!
//! Every pair of sub-tasks `(s, ŝ)` from the two decompositions whose IOU is
//! positive contributes its IOU and the cosine similarity of its description
//! embeddings, each weighted by the length of the overlap normalized by the
//! longer trajectory:
//!
//! ```text
//! tau_k    = Σ IOU_i · w_i / Σ w_i
//! tau_zeta = Σ CS_i  · w_i / Σ w_i
//! ```
//!
//! The IOU measures interval lengths as `end - start` while the interval
//! weight counts inclusive steps, `min(end) - max(start) + 1`. Both
//! conventions are kept as-is so that `(40,48)` against `(40,54)` gives an IOU
//! of 8/14 and, over 62 steps, a weight of 9/62.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decomposition::{SubTask, SubTaskDecomposition, Violation};
use crate::encoder::{EncodeError, Encoder};

#[derive(Debug, Error)]
pub enum SimilarityError {
    #[error("malformed interval ({start}, {end})")]
    MalformedInterval { start: u64, end: u64 },
    #[error("sub-tasks ({0}, {1}) and ({2}, {3}) do not intersect")]
    NotIntersecting(u64, u64, u64, u64),
    #[error("maximum trajectory length is zero")]
    ZeroTrajectoryLength,
    #[error("embedding has zero norm")]
    ZeroNorm,
    #[error("embedding dimensions differ ({0} vs {1})")]
    DimensionMismatch(usize, usize),
    #[error("invalid decomposition: {}", fmt_violations(.0))]
    InvalidDecomposition(Vec<Violation>),
    #[error(transparent)]
    Encoder(#[from] EncodeError),
}

fn fmt_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

/// Score for one temporally intersecting pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairScore {
    pub gt_index: usize,
    pub pred_index: usize,
    pub iou: f64,
    pub cs: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityReport {
    pub tau_k: f64,
    pub tau_zeta: f64,
    pub pairs: Vec<PairScore>,
    pub encoder_id: String,
}

fn check_interval(s: &SubTask) -> Result<(), SimilarityError> {
    if s.start > s.end {
        Err(SimilarityError::MalformedInterval {
            start: s.start,
            end: s.end,
        })
    } else {
        Ok(())
    }
}

/// Intersection over union of two step intervals.
///
/// Lengths are `end - start`. A zero-length union happens only for two
/// single-step intervals: 1 if they sit on the same step, 0 otherwise.
pub fn iou(a: &SubTask, b: &SubTask) -> Result<f64, SimilarityError> {
    check_interval(a)?;
    check_interval(b)?;
    let lo = a.start.max(b.start);
    let hi = a.end.min(b.end);
    let intersection = hi.saturating_sub(lo);
    let union = a.end.max(b.end) - a.start.min(b.start);
    if union == 0 {
        return Ok(if a.start == b.start { 1.0 } else { 0.0 });
    }
    Ok(intersection as f64 / union as f64)
}

/// Cosine similarity of the embeddings of two descriptions, clamped to
/// `[-1, 1]`.
pub fn cosine_similarity(
    z1: &str,
    z2: &str,
    encoder: &dyn Encoder,
) -> Result<f64, SimilarityError> {
    let v1 = encoder.encode(z1)?;
    let v2 = encoder.encode(z2)?;
    cosine(&v1, &v2)
}

pub fn cosine(v1: &[f64], v2: &[f64]) -> Result<f64, SimilarityError> {
    if v1.len() != v2.len() {
        return Err(SimilarityError::DimensionMismatch(v1.len(), v2.len()));
    }
    let dot: f64 = v1.iter().zip(v2).map(|(a, b)| a * b).sum();
    let n1 = v1.iter().map(|a| a * a).sum::<f64>().sqrt();
    let n2 = v2.iter().map(|a| a * a).sum::<f64>().sqrt();
    if n1 == 0.0 || n2 == 0.0 {
        return Err(SimilarityError::ZeroNorm);
    }
    Ok((dot / (n1 * n2)).clamp(-1.0, 1.0))
}

/// Inclusive overlap length divided by the longer of the two trajectories.
pub fn interval_weight(
    a: &SubTask,
    b: &SubTask,
    k_s: u64,
    k_shat: u64,
) -> Result<f64, SimilarityError> {
    check_interval(a)?;
    check_interval(b)?;
    let k = k_s.max(k_shat);
    if k == 0 {
        return Err(SimilarityError::ZeroTrajectoryLength);
    }
    overlap_steps(a, b)
        .map(|n| n as f64 / k as f64)
        .ok_or(SimilarityError::NotIntersecting(a.start, a.end, b.start, b.end))
}

fn overlap_steps(a: &SubTask, b: &SubTask) -> Option<u64> {
    let lo = a.start.max(b.start);
    let hi = a.end.min(b.end);
    (hi >= lo).then(|| hi - lo + 1)
}

/// Scores `pred` against `gt`.
///
/// When nothing intersects, both scores are 0 and the pair list is empty.
/// When both decompositions end at step 0 the weight normalizer falls back to
/// 1; it cancels out of both ratios anyway.
pub fn similarity(
    gt: &SubTaskDecomposition,
    pred: &SubTaskDecomposition,
    encoder: &dyn Encoder,
) -> Result<SimilarityReport, SimilarityError> {
    gt.validate().map_err(SimilarityError::InvalidDecomposition)?;
    pred.validate().map_err(SimilarityError::InvalidDecomposition)?;
    let k_s = gt.steps().unwrap_or(0);
    let k_shat = pred.steps().unwrap_or(0);
    let (k_s, k_shat) = if k_s.max(k_shat) == 0 { (1, 1) } else { (k_s, k_shat) };

    let mut embeddings: HashMap<&str, Vec<f64>> = HashMap::new();
    for s in gt.iter().chain(pred.iter()) {
        let text = s.description.as_str();
        if !embeddings.contains_key(text) {
            embeddings.insert(text, encoder.encode(text)?);
        }
    }

    let mut pairs = Vec::new();
    for (n, s) in gt.iter().enumerate() {
        for (m, p) in pred.iter().enumerate() {
            let score = iou(s, p)?;
            if score > 0.0 {
                let cs = cosine(&embeddings[s.description.as_str()], &embeddings[p.description.as_str()])?;
                let weight = interval_weight(s, p, k_s, k_shat)?;
                pairs.push(PairScore {
                    gt_index: n,
                    pred_index: m,
                    iou: score,
                    cs,
                    weight,
                });
            }
        }
    }

    let total_weight: f64 = pairs.iter().map(|p| p.weight).sum();
    let (tau_k, tau_zeta) = if pairs.is_empty() || total_weight == 0.0 {
        (0.0, 0.0)
    } else {
        let tk: f64 = pairs.iter().map(|p| p.iou * p.weight).sum();
        let tz: f64 = pairs.iter().map(|p| p.cs * p.weight).sum();
        (
            (tk / total_weight).clamp(0.0, 1.0),
            (tz / total_weight).clamp(-1.0, 1.0),
        )
    };
    Ok(SimilarityReport {
        tau_k,
        tau_zeta,
        pairs,
        encoder_id: encoder.id().to_string(),
    })
}
