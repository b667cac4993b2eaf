use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use subtask_core::prompt::{Modality, ShotKind};
use subtask_core::simgen::builtin_env;
use subtask_core::{BagEncoder, Encoder};
use subtask_fmclient::{CassetteMode, EmbeddingConfig, HttpTransport, ProviderConfig, RemoteEncoder};

use crate::RunError;

fn default_trajectories() -> usize {
    50
}

/// A provider given inline or as a path to its JSON config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProviderRef {
    File { file: PathBuf },
    Inline(Box<ProviderConfig>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderChoice {
    Bag {
        #[serde(default = "default_dimension")]
        dimension: usize,
    },
    Remote(EmbeddingConfig),
}

fn default_dimension() -> usize {
    subtask_core::encoder::DEFAULT_BAG_DIMENSION
}

impl Default for EncoderChoice {
    fn default() -> Self {
        EncoderChoice::Bag {
            dimension: default_dimension(),
        }
    }
}

impl EncoderChoice {
    pub fn build(&self) -> Result<Arc<dyn Encoder>, RunError> {
        Ok(match self {
            EncoderChoice::Bag { dimension } => {
                if *dimension == 0 {
                    return Err(RunError::Config("bag encoder dimension must be positive".into()));
                }
                Arc::new(BagEncoder::new(*dimension))
            }
            EncoderChoice::Remote(cfg) => {
                let transport = Arc::new(HttpTransport::new(std::time::Duration::from_secs(60))?);
                Arc::new(RemoteEncoder::new(cfg.clone(), transport)?)
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CassetteSettings {
    pub mode: CassetteMode,
    /// One `<provider>.json` file per provider.
    pub dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub environments: Vec<String>,
    #[serde(default = "default_trajectories")]
    pub trajectories_per_env: usize,
    pub providers: Vec<ProviderRef>,
    pub contexts: Vec<ShotKind>,
    pub modalities: Vec<Modality>,
    #[serde(default)]
    pub encoder: EncoderChoice,
    #[serde(default)]
    pub seed_base: u64,
    /// Seed of the trajectory that supplies one-shot examples. Defaults to
    /// the first seed after the evaluated range.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub holdout_seed: Option<u64>,
    pub output_dir: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cassette: Option<CassetteSettings>,
    /// Price table JSON; costs are zero without one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub price_table: Option<PathBuf>,
    /// Directory with prompt template files; the built-in set otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub template_dir: Option<PathBuf>,
    #[serde(default = "default_template_version")]
    pub template_version: String,
    /// Worker threads; rayon's default when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_parallel: Option<usize>,
}

fn default_template_version() -> String {
    subtask_core::prompt::TEMPLATE_VERSION.into()
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, RunError> {
        serde_json::from_str(text).map_err(|e| RunError::Config(e.to_string()))
    }

    /// Reads a config file. Relative paths inside it are taken relative to
    /// the file's directory, and provider files are inlined.
    pub fn load(path: &Path) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path).map_err(|e| RunError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        resolve(base, &mut cfg.output_dir);
        for p in [&mut cfg.price_table, &mut cfg.template_dir].into_iter().flatten() {
            resolve(base, p);
        }
        if let Some(c) = &mut cfg.cassette {
            resolve(base, &mut c.dir);
        }
        if let EncoderChoice::Remote(e) = &mut cfg.encoder {
            if let Some(p) = &mut e.cache_path {
                resolve(base, p);
            }
        }
        for r in &mut cfg.providers {
            if let ProviderRef::File { file } = r {
                resolve(base, file);
                *r = ProviderRef::Inline(Box::new(ProviderConfig::load(file)?));
            }
        }
        Ok(cfg)
    }

    /// Provider configs; file references are read on demand.
    pub fn provider_configs(&self) -> Result<Vec<ProviderConfig>, RunError> {
        self.providers
            .iter()
            .map(|r| match r {
                ProviderRef::Inline(p) => {
                    p.validate()?;
                    Ok((**p).clone())
                }
                ProviderRef::File { file } => Ok(ProviderConfig::load(file)?),
            })
            .collect()
    }

    /// Evaluated seeds: `seed_base + i`.
    pub fn eval_seeds(&self) -> Vec<u64> {
        (0..self.trajectories_per_env as u64).map(|i| self.seed_base + i).collect()
    }

    pub fn holdout(&self) -> u64 {
        self.holdout_seed
            .unwrap_or(self.seed_base + self.trajectories_per_env as u64)
    }

    pub fn validate(&self) -> Result<(), RunError> {
        let bad = |m: String| Err(RunError::Config(m));
        if self.trajectories_per_env == 0 {
            return bad("trajectories_per_env must be at least 1".into());
        }
        if self.environments.is_empty() || self.providers.is_empty() || self.contexts.is_empty() || self.modalities.is_empty()
        {
            return bad("the grid needs at least one environment, provider, context and modality".into());
        }
        for e in &self.environments {
            if builtin_env(e).is_none() {
                return bad(format!("unknown environment {e:?}"));
            }
        }
        if self.seed_base.checked_add(self.trajectories_per_env as u64).is_none() {
            return bad("seed range overflows".into());
        }
        if self.eval_seeds().contains(&self.holdout()) {
            return bad(format!("holdout seed {} is also an evaluated seed", self.holdout()));
        }
        let providers = self.provider_configs()?;
        let mut names: Vec<&str> = providers.iter().map(|p| p.name.as_str()).collect();
        names.sort();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return bad("provider names must be unique".into());
        }
        if names.iter().any(|n| !n.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c))) {
            return bad("provider names may only use ASCII letters, digits, '-', '_' and '.'".into());
        }
        if self.max_parallel == Some(0) {
            return bad("max_parallel must be at least 1".into());
        }
        Ok(())
    }

    /// Hash of the canonical JSON form; resuming requires it to match.
    pub fn hash(&self) -> String {
        subtask_fmclient::sha256_hex(&serde_json::to_vec(self).expect("config serializes"))
    }
}
