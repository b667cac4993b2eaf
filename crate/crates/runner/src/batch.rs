use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use subtask_core::prompt::{build_prompt, make_one_shot_snippet, Modality, PromptTemplate, Shot, ShotKind};
use subtask_core::simgen::{builtin_env, generate_trajectory, EnvSpec};
use subtask_core::{extract_decomposition, similarity, Encoder};
use subtask_fmclient::{CassetteClient, Completer, FailingTransport, FmClient, FmError, PriceTable, ProviderConfig};

use crate::config::RunConfig;
use crate::{read_json, write_json, RunError};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    /// Some seeds not yet attempted.
    Pending,
    /// Every seed answered.
    Complete,
    /// Every seed attempted, some answered, some failed.
    Partial,
    /// Every seed attempted and none answered.
    Failed,
    /// The provider cannot take this prompt (for example images on a
    /// text-only model); nothing was sent.
    Skipped,
}

/// Progress of one (environment, provider, context, modality) cell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellProgress {
    pub id: String,
    pub env: String,
    pub provider: String,
    pub context: ShotKind,
    pub modality: Modality,
    pub completed: Vec<u64>,
    pub failed: Vec<u64>,
    pub skipped: Vec<u64>,
}

impl CellProgress {
    fn new(env: &str, provider: &str, context: ShotKind, modality: Modality) -> Self {
        Self {
            id: cell_id(env, provider, context, modality),
            env: env.into(),
            provider: provider.into(),
            context,
            modality,
            completed: Vec::new(),
            failed: Vec::new(),
            skipped: Vec::new(),
        }
    }

    pub fn status(&self, seeds: usize) -> CellStatus {
        let attempted = self.completed.len() + self.failed.len() + self.skipped.len();
        if attempted < seeds {
            CellStatus::Pending
        } else if self.completed.len() == seeds {
            CellStatus::Complete
        } else if self.completed.is_empty() && self.failed.is_empty() {
            CellStatus::Skipped
        } else if self.completed.is_empty() {
            CellStatus::Failed
        } else {
            CellStatus::Partial
        }
    }

    fn is_done(&self, seed: u64) -> bool {
        self.completed.contains(&seed) || self.skipped.contains(&seed)
    }

    fn record(&mut self, seed: u64, outcome: SeedOutcome) {
        for list in [&mut self.completed, &mut self.failed, &mut self.skipped] {
            list.retain(|&s| s != seed);
        }
        let list = match outcome {
            SeedOutcome::Completed => &mut self.completed,
            SeedOutcome::Failed => &mut self.failed,
            SeedOutcome::Skipped => &mut self.skipped,
        };
        let at = list.partition_point(|&s| s < seed);
        list.insert(at, seed);
    }
}

pub fn cell_id(env: &str, provider: &str, context: ShotKind, modality: Modality) -> String {
    format!("{env}__{provider}__{}__{}", context.as_str(), modality.as_str())
}

/// The run's progress record, rewritten atomically after every query.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub cells: Vec<CellProgress>,
}

impl Manifest {
    pub fn load(run_dir: &Path) -> Result<Self, RunError> {
        read_json(&run_dir.join(MANIFEST_FILE))
    }

    fn save(&self, run_dir: &Path) -> Result<(), RunError> {
        write_json(&run_dir.join(MANIFEST_FILE), self)
    }

    pub fn status(&self, cell: &CellProgress) -> CellStatus {
        cell.status(self.seeds.len())
    }
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub output_dir: PathBuf,
    pub manifest: Manifest,
}

impl RunSummary {
    /// True when some cell attempted every seed and got no answer at all.
    pub fn any_cell_failed(&self) -> bool {
        self.manifest
            .cells
            .iter()
            .any(|c| self.manifest.status(c) == CellStatus::Failed)
    }
}

#[derive(Debug, Clone, Copy)]
enum SeedOutcome {
    Completed,
    Failed,
    Skipped,
}

pub fn trajectory_dir(run_dir: &Path, env: &str, seed: u64) -> PathBuf {
    run_dir.join("trajectories").join(env).join(format!("seed_{seed}"))
}

pub fn seed_dir(run_dir: &Path, cell_id: &str, seed: u64) -> PathBuf {
    run_dir.join("cells").join(cell_id).join(format!("seed_{seed}"))
}

fn build_completers(cfg: &RunConfig, providers: &[ProviderConfig]) -> Result<BTreeMap<String, Arc<dyn Completer>>, RunError> {
    let prices = match &cfg.price_table {
        Some(p) => PriceTable::load(p)?,
        None => PriceTable::default(),
    };
    let mut out = BTreeMap::new();
    for p in providers {
        let price = prices.price(&p.name);
        let client = if p.is_stub() {
            FmClient::new(p.clone(), Arc::new(FailingTransport::default()), price)?
        } else {
            FmClient::http(p.clone(), price)?
        };
        let completer: Arc<dyn Completer> = match &cfg.cassette {
            Some(c) => Arc::new(CassetteClient::new(
                Arc::new(client),
                c.mode,
                c.dir.join(format!("{}.json", p.name)),
            )?),
            None => Arc::new(client),
        };
        out.insert(p.name.clone(), completer);
    }
    Ok(out)
}

struct Job<'a> {
    cell: usize,
    env: &'a EnvSpec,
    seed: u64,
}

struct Shared<'a> {
    run_dir: &'a Path,
    template: PromptTemplate,
    snippets: BTreeMap<String, String>,
    completers: BTreeMap<String, Arc<dyn Completer>>,
    encoder: Arc<dyn Encoder>,
    manifest: Mutex<Manifest>,
}

fn is_incompatible(e: &FmError) -> bool {
    matches!(e, FmError::ModalityUnsupported { .. } | FmError::TokenLimitExceeded { .. })
}

fn run_seed(shared: &Shared, cell: &CellProgress, env: &EnvSpec, seed: u64) -> Result<SeedOutcome, RunError> {
    let dir = seed_dir(shared.run_dir, &cell.id, seed);
    for stale in ["error.json", "skipped.json", "report.json"] {
        let _ = std::fs::remove_file(dir.join(stale));
    }
    let (data, gt) = generate_trajectory(env, seed, cell.modality.has_vision())?;
    let shot = match cell.context {
        ShotKind::ZeroShot => Shot::ZeroShot,
        ShotKind::OneShot => Shot::OneShot(shared.snippets[&cell.env].clone()),
    };
    let prompt = build_prompt(&shared.template.context(shot), &data, cell.modality)?;
    write_json(&dir.join("prompt.json"), &prompt)?;
    let completer = &shared.completers[&cell.provider];
    let response = match completer.complete(&prompt) {
        Ok(r) => r,
        Err(e) if is_incompatible(&e) => {
            write_json(&dir.join("skipped.json"), &serde_json::json!({"reason": e.to_string()}))?;
            return Ok(SeedOutcome::Skipped);
        }
        Err(e) => return Err(e.into()),
    };
    write_json(&dir.join("response.json"), &response)?;
    let outcome = extract_decomposition(&response.raw_text);
    write_json(&dir.join("outcome.json"), &outcome)?;
    if let Some(pred) = outcome.decomposition() {
        let report = similarity(&gt, pred, shared.encoder.as_ref())
            .map_err(|e| crate::artifact_error(&dir, format!("scoring failed: {e}")))?;
        write_json(&dir.join("report.json"), &report)?;
    }
    Ok(SeedOutcome::Completed)
}

fn finish(shared: &Shared, cell: usize, seed: u64, result: Result<SeedOutcome, RunError>) -> Result<(), RunError> {
    let mut manifest = shared.manifest.lock().unwrap_or_else(|e| e.into_inner());
    let outcome = match result {
        Ok(o) => o,
        Err(e) => {
            let id = &manifest.cells[cell].id;
            log::error!("{id} seed {seed}: {e}");
            let dir = seed_dir(shared.run_dir, id, seed);
            write_json(&dir.join("error.json"), &serde_json::json!({"error": e.to_string()}))?;
            SeedOutcome::Failed
        }
    };
    manifest.cells[cell].record(seed, outcome);
    manifest.save(shared.run_dir)
}

/// Runs (or resumes) every cell of the grid.
///
/// Layout under `output_dir`:
/// `trajectories/<env>/seed_<s>/` holds the generated data and ground truth;
/// `cells/<env>__<provider>__<context>__<modality>/seed_<s>/` holds
/// `prompt.json`, `response.json`, `outcome.json` and, for valid answers,
/// `report.json`. Seeds already completed in `manifest.json` are not re-run.
pub fn run_batch(cfg: &RunConfig) -> Result<RunSummary, RunError> {
    cfg.validate()?;
    let run_dir = cfg.output_dir.as_path();
    let providers = cfg.provider_configs()?;
    let seeds = cfg.eval_seeds();
    let hash = cfg.hash();

    let mut manifest = if run_dir.join(MANIFEST_FILE).exists() {
        let m = Manifest::load(run_dir)?;
        if m.config_hash != hash {
            return Err(RunError::Config(format!(
                "{} holds a run with a different config; use a fresh output_dir",
                run_dir.display()
            )));
        }
        m
    } else {
        let mut cells = Vec::new();
        for env in &cfg.environments {
            for p in &providers {
                for &context in &cfg.contexts {
                    for &modality in &cfg.modalities {
                        cells.push(CellProgress::new(env, &p.name, context, modality));
                    }
                }
            }
        }
        Manifest {
            config_hash: hash,
            seeds: seeds.clone(),
            cells,
        }
    };
    write_json(&run_dir.join("config.json"), cfg)?;

    let envs: BTreeMap<String, EnvSpec> = cfg
        .environments
        .iter()
        .map(|e| (e.clone(), builtin_env(e).expect("validated environment")))
        .collect();
    let with_frames = cfg.modalities.iter().any(|m| m.has_vision());

    // held-out trajectories supply the one-shot examples
    let mut snippets = BTreeMap::new();
    for (name, env) in &envs {
        let (data, gt) = generate_trajectory(env, cfg.holdout(), false)?;
        let dir = trajectory_dir(run_dir, name, cfg.holdout());
        data.save(&dir.join("trajectory.json"))?;
        gt.save(&dir.join("ground_truth.json"))?;
        snippets.insert(name.clone(), make_one_shot_snippet(&data, &gt)?);
    }

    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(n) = cfg.max_parallel {
            b = b.num_threads(n);
        }
        b.build().map_err(|e| RunError::Config(e.to_string()))?
    };

    pool.install(|| -> Result<(), RunError> {
        let targets: Vec<(&String, u64)> = envs.keys().flat_map(|e| seeds.iter().map(move |&s| (e, s))).collect();
        targets.par_iter().try_for_each(|&(name, seed)| -> Result<(), RunError> {
            let dir = trajectory_dir(run_dir, name, seed);
            if dir.join("ground_truth.json").exists() {
                return Ok(());
            }
            let (data, gt) = generate_trajectory(&envs[name], seed, with_frames)?;
            data.save(&dir.join("trajectory.json"))?;
            gt.save(&dir.join("ground_truth.json"))
                .map_err(RunError::from)
        })
    })?;

    // cells that cannot be sent at all are settled before any query
    for cell in &mut manifest.cells {
        let provider = providers.iter().find(|p| p.name == cell.provider).expect("provider in grid");
        if cell.modality.has_vision() && !provider.supports_images {
            for &s in &seeds {
                if !cell.is_done(s) {
                    cell.record(s, SeedOutcome::Skipped);
                }
            }
        }
    }
    manifest.save(run_dir)?;

    let jobs: Vec<Job> = manifest
        .cells
        .iter()
        .enumerate()
        .flat_map(|(i, c)| {
            let env = &envs[&c.env];
            seeds
                .iter()
                .filter(|&&s| !c.is_done(s))
                .map(move |&seed| Job { cell: i, env, seed })
        })
        .collect();
    let cells = manifest.cells.clone();

    let template = match &cfg.template_dir {
        Some(dir) => PromptTemplate::load(dir, &cfg.template_version)?,
        None => PromptTemplate::builtin(),
    };
    let shared = Shared {
        run_dir,
        template,
        snippets,
        completers: build_completers(cfg, &providers)?,
        encoder: cfg.encoder.build()?,
        manifest: Mutex::new(manifest),
    };
    log::info!("{} queries to run", jobs.len());

    pool.install(|| {
        jobs.par_iter().try_for_each(|job| {
            let result = run_seed(&shared, &cells[job.cell], job.env, job.seed);
            finish(&shared, job.cell, job.seed, result)
        })
    })?;

    Ok(RunSummary {
        output_dir: run_dir.to_path_buf(),
        manifest: shared.manifest.into_inner().unwrap_or_else(|e| e.into_inner()),
    })
}
