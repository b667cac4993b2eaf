use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::stats::StatsRow;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Csv,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "md" | "markdown" => Ok(ReportFormat::Markdown),
            other => Err(format!("unknown report format {other:?} (expected csv or markdown)")),
        }
    }
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Markdown => "md",
        }
    }
}

pub const CSV_COLUMNS: [&str; 13] = [
    "env",
    "provider",
    "context",
    "modality",
    "mean_tau_k",
    "std_tau_k",
    "mean_tau_zeta",
    "std_tau_zeta",
    "valid_n",
    "invalid_n",
    "unparseable_n",
    "total_n",
    "mean_cost",
];

fn fixed(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

fn csv(rows: &[StatsRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_COLUMNS).expect("in-memory write");
    for r in rows {
        w.write_record([
            r.env.clone(),
            r.provider.clone(),
            r.context.as_str().into(),
            r.modality.as_str().into(),
            fixed(r.mean_tau_k),
            fixed(r.std_tau_k),
            fixed(r.mean_tau_zeta),
            fixed(r.std_tau_zeta),
            r.valid_n.to_string(),
            r.invalid_n.to_string(),
            r.unparseable_n.to_string(),
            r.total_n.to_string(),
            fixed(r.mean_cost),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

/// `"0.87 ± 0.16"`, just the mean for a single sample, `—` for none.
pub fn mean_std_cell(mean: Option<f64>, std: Option<f64>) -> String {
    match (mean, std) {
        (Some(m), Some(s)) => format!("{m:.2} ± {s:.2}"),
        (Some(m), None) => format!("{m:.2}"),
        _ => "—".into(),
    }
}

fn markdown(rows: &[StatsRow]) -> String {
    let mut envs: Vec<&str> = Vec::new();
    for r in rows {
        if !envs.contains(&r.env.as_str()) {
            envs.push(&r.env);
        }
    }
    let mut out = String::new();
    for env in envs {
        out.push_str(&format!("## {env}\n\n"));
        out.push_str("| Provider | Context | Modality | τ_k | τ_ζ | Valid / Total | Mean cost |\n");
        out.push_str("|---|---|---|---|---|---|---|\n");
        for r in rows.iter().filter(|r| r.env == env) {
            out.push_str(&format!(
                "| {} | {} | {} | {} | {} | {} / {} | {} |\n",
                r.provider,
                r.context.as_str(),
                r.modality.as_str(),
                mean_std_cell(r.mean_tau_k, r.std_tau_k),
                mean_std_cell(r.mean_tau_zeta, r.std_tau_zeta),
                r.valid_n,
                r.total_n,
                r.mean_cost.map(|c| format!("{c:.4}")).unwrap_or_else(|| "—".into()),
            ));
        }
        out.push('\n');
    }
    out
}

/// Renders rows as CSV (fixed column order, one line per cell) or as
/// Markdown tables grouped by environment.
pub fn emit_report(rows: &[StatsRow], format: ReportFormat) -> String {
    match format {
        ReportFormat::Csv => csv(rows),
        ReportFormat::Markdown => markdown(rows),
    }
}
