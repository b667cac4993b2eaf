use std::path::Path;

use serde::{Deserialize, Serialize};
use subtask_core::prompt::{Modality, ShotKind};
use subtask_core::{tally_validity, ParseOutcome, SimilarityReport};
use subtask_fmclient::FmResponse;

use crate::batch::{seed_dir, Manifest};
use crate::{read_json, RunError};

/// Aggregate over one cell. Statistics use valid predictions only; the
/// standard deviation is the sample (n-1) estimate and is `None` below two
/// samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsRow {
    pub env: String,
    pub provider: String,
    pub context: ShotKind,
    pub modality: Modality,
    pub mean_tau_k: Option<f64>,
    pub std_tau_k: Option<f64>,
    pub mean_tau_zeta: Option<f64>,
    pub std_tau_zeta: Option<f64>,
    pub valid_n: usize,
    pub invalid_n: usize,
    pub unparseable_n: usize,
    pub total_n: usize,
    /// Mean over every answered query, valid or not.
    pub mean_cost: Option<f64>,
}

/// Sample mean and (n-1) standard deviation.
pub fn sample_mean_std(xs: &[f64]) -> (Option<f64>, Option<f64>) {
    if xs.is_empty() {
        return (None, None);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (Some(mean), None);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (Some(mean), Some(var.sqrt()))
}

impl StatsRow {
    pub fn from_samples(
        env: &str,
        provider: &str,
        context: ShotKind,
        modality: Modality,
        outcomes: &[ParseOutcome],
        reports: &[SimilarityReport],
        costs: &[f64],
    ) -> Self {
        let tally = tally_validity(outcomes);
        let tk: Vec<f64> = reports.iter().map(|r| r.tau_k).collect();
        let tz: Vec<f64> = reports.iter().map(|r| r.tau_zeta).collect();
        let (mean_tau_k, std_tau_k) = sample_mean_std(&tk);
        let (mean_tau_zeta, std_tau_zeta) = sample_mean_std(&tz);
        Self {
            env: env.into(),
            provider: provider.into(),
            context,
            modality,
            mean_tau_k,
            std_tau_k,
            mean_tau_zeta,
            std_tau_zeta,
            valid_n: tally.valid,
            invalid_n: tally.invalid,
            unparseable_n: tally.unparseable,
            total_n: tally.total(),
            mean_cost: sample_mean_std(costs).0,
        }
    }
}

/// One row per cell, in manifest order, from the persisted artifacts.
pub fn aggregate_stats(run_dir: &Path) -> Result<Vec<StatsRow>, RunError> {
    let manifest = Manifest::load(run_dir)?;
    let mut rows = Vec::with_capacity(manifest.cells.len());
    for cell in &manifest.cells {
        let mut outcomes = Vec::new();
        let mut reports = Vec::new();
        let mut costs = Vec::new();
        for &seed in &cell.completed {
            let dir = seed_dir(run_dir, &cell.id, seed);
            let outcome: ParseOutcome = read_json(&dir.join("outcome.json"))?;
            let response: FmResponse = read_json(&dir.join("response.json"))?;
            costs.push(response.cost_estimate);
            if outcome.is_valid() {
                reports.push(read_json(&dir.join("report.json"))?);
            }
            outcomes.push(outcome);
        }
        rows.push(StatsRow::from_samples(
            &cell.env,
            &cell.provider,
            cell.context,
            cell.modality,
            &outcomes,
            &reports,
            &costs,
        ));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_samples_have_zero_spread() {
        assert_eq!(sample_mean_std(&[0.5, 0.5]), (Some(0.5), Some(0.0)));
    }

    #[test]
    fn sample_std_uses_n_minus_one() {
        let (m, s) = sample_mean_std(&[0.0, 1.0]);
        assert_eq!(m, Some(0.5));
        assert!((s.unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        let (m, s) = sample_mean_std(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]);
        assert_eq!(m, Some(5.0));
        assert!((s.unwrap() - (32.0f64 / 7.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn small_samples() {
        assert_eq!(sample_mean_std(&[]), (None, None));
        assert_eq!(sample_mean_std(&[0.3]), (Some(0.3), None));
    }

    #[test]
    fn counts_follow_outcomes() {
        use subtask_core::parser::UnparseableReason;
        let mut outcomes = vec![ParseOutcome::Unparseable { reason: UnparseableReason::NoDecompositionFound }];
        let d = subtask_core::SubTaskDecomposition::ground_truth(vec![subtask_core::SubTask::new(0, 1, "a")]);
        outcomes.extend((0..49).map(|_| ParseOutcome::Valid { decomposition: d.clone() }));
        let row = StatsRow::from_samples("Door", "p", ShotKind::OneShot, Modality::Both, &outcomes, &[], &[]);
        assert_eq!((row.total_n, row.valid_n, row.unparseable_n), (50, 49, 1));
        assert_eq!((row.mean_tau_k, row.mean_cost), (None, None));
    }
}
