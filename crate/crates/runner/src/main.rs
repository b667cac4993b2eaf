use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use subtask_core::simgen::{builtin_env, generate_trajectory, BUILTIN_ENV_NAMES};
use subtask_core::{BagEncoder, Encoder};
use subtask_fmclient::{EmbeddingConfig, HttpTransport, RemoteEncoder};
use subtask_runner::batch::trajectory_dir;
use subtask_runner::{aggregate_stats, emit_report, evaluate_external, run_batch, ReportFormat, RunConfig};

#[derive(Parser)]
#[command(name = "subtask", version, about = "Sub-task decomposition benchmark for robot trajectories")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate trajectories with ground-truth decompositions.
    Generate {
        /// Environment name; repeat for several. All built-ins by default.
        #[arg(long = "env")]
        envs: Vec<String>,
        /// Trajectories per environment.
        #[arg(long, default_value_t = 50)]
        count: u64,
        /// First seed; trajectory i uses seed + i.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also render PNG frames.
        #[arg(long)]
        frames: bool,
        #[arg(long, default_value = "trajectories")]
        out: PathBuf,
    },
    /// Run a batch annotation grid from a run config file.
    Annotate {
        config: PathBuf,
    },
    /// Score a predicted decomposition file against a ground-truth file.
    Evaluate {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        /// `bag`, `bag:<dimension>`, or `remote:<embedding config json>`.
        #[arg(long, default_value = "bag")]
        encoder: String,
    },
    /// Aggregate a run directory into a report.
    Report {
        run_dir: PathBuf,
        /// csv or markdown
        #[arg(long, default_value = "markdown")]
        format: ReportFormat,
        /// Write here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn encoder(spec: &str) -> Result<Arc<dyn Encoder>> {
    if spec == "bag" {
        return Ok(Arc::new(BagEncoder::default()));
    }
    if let Some(d) = spec.strip_prefix("bag:") {
        let d: usize = d.parse().context("bag dimension")?;
        if d == 0 {
            bail!("bag dimension must be positive");
        }
        return Ok(Arc::new(BagEncoder::new(d)));
    }
    if let Some(path) = spec.strip_prefix("remote:") {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {path}"))?;
        let cfg: EmbeddingConfig = serde_json::from_str(&text).with_context(|| format!("parsing {path}"))?;
        let transport = Arc::new(HttpTransport::new(std::time::Duration::from_secs(60))?);
        return Ok(Arc::new(RemoteEncoder::new(cfg, transport)?));
    }
    bail!("unknown encoder {spec:?}")
}

fn generate(envs: Vec<String>, count: u64, seed: u64, frames: bool, out: &Path) -> Result<()> {
    let envs = if envs.is_empty() {
        BUILTIN_ENV_NAMES.iter().map(|s| s.to_string()).collect()
    } else {
        envs
    };
    for name in &envs {
        let env = builtin_env(name).with_context(|| format!("unknown environment {name:?}"))?;
        for i in 0..count {
            let s = seed.checked_add(i).context("seed overflow")?;
            let (data, gt) = generate_trajectory(&env, s, frames)?;
            let dir = trajectory_dir(out, &env.name, s);
            data.save(&dir.join("trajectory.json"))?;
            gt.save(&dir.join("ground_truth.json"))?;
        }
        println!("{}: {count} trajectories", env.name);
    }
    Ok(())
}

fn annotate(config: &Path) -> Result<bool> {
    let cfg = RunConfig::load(config)?;
    let summary = run_batch(&cfg)?;
    let rows = aggregate_stats(&summary.output_dir)?;
    for format in [ReportFormat::Csv, ReportFormat::Markdown] {
        let path = summary.output_dir.join(format!("report.{}", format.extension()));
        subtask_core::io::write_atomic(&path, emit_report(&rows, format).as_bytes())?;
    }
    for cell in &summary.manifest.cells {
        println!(
            "{:<60} {:?} ({} ok, {} failed, {} skipped)",
            cell.id,
            summary.manifest.status(cell),
            cell.completed.len(),
            cell.failed.len(),
            cell.skipped.len()
        );
    }
    println!("reports written to {}", summary.output_dir.display());
    Ok(!summary.any_cell_failed())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Generate { envs, count, seed, frames, out } => generate(envs, count, seed, frames, &out).map(|_| true),
        Command::Annotate { config } => annotate(&config),
        Command::Evaluate { gt, pred, encoder: spec } => {
            let report = evaluate_external(&gt, &pred, encoder(&spec)?.as_ref())?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(true)
        }
        Command::Report { run_dir, format, out } => {
            let text = emit_report(&aggregate_stats(&run_dir)?, format);
            match out {
                Some(p) => subtask_core::io::write_atomic(&p, text.as_bytes())?,
                None => print!("{text}"),
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("at least one cell produced no answers");
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
