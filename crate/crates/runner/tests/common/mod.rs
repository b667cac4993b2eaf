#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use subtask_core::prompt::{Modality, ShotKind};
use subtask_core::simgen::{builtin_env, generate_trajectory};
use subtask_fmclient::{stub_provider, NoiseMode, NoiseSchedule, ProviderConfig, StubScript};
use subtask_runner::{EncoderChoice, ProviderRef, RunConfig};

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

/// Canned answers: each environment's ground truth for a fixed seed.
pub fn canned(envs: &[&str]) -> BTreeMap<String, String> {
    envs.iter()
        .map(|e| {
            let (_, gt) = generate_trajectory(&builtin_env(e).unwrap(), 4242, false).unwrap();
            (e.to_string(), serde_json::to_string(&gt.subtasks).unwrap())
        })
        .collect()
}

pub fn stub(name: &str, envs: &[&str], noise: NoiseMode, schedule: NoiseSchedule) -> ProviderConfig {
    stub_provider(name, StubScript { responses: canned(envs), noise, schedule })
}

pub fn config(
    out: &Path,
    envs: &[&str],
    seeds: usize,
    providers: Vec<ProviderConfig>,
    contexts: Vec<ShotKind>,
    modalities: Vec<Modality>,
) -> RunConfig {
    RunConfig {
        environments: envs.iter().map(|s| s.to_string()).collect(),
        trajectories_per_env: seeds,
        providers: providers.into_iter().map(|p| ProviderRef::Inline(Box::new(p))).collect(),
        contexts,
        modalities,
        encoder: EncoderChoice::default(),
        seed_base: 100,
        holdout_seed: None,
        output_dir: out.to_path_buf(),
        cassette: None,
        price_table: None,
        template_dir: None,
        template_version: "v1".into(),
        max_parallel: Some(4),
    }
}
