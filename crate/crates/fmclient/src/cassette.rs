//! Record/replay of provider responses keyed by prompt hash.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use subtask_core::prompt::Prompt;

use crate::client::{Completer, FmResponse};
use crate::config::ProviderConfig;
use crate::error::FmError;
use crate::sha256_hex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CassetteMode {
    /// Serve stored answers; query the provider on a miss and store the result.
    Record,
    /// Serve stored answers only; a miss is an error.
    Replay,
    /// Always query the provider; the cassette is untouched.
    Passthrough,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tokens {
    pub prompt: u64,
    pub completion: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CassetteEntry {
    pub raw_text: String,
    pub tokens: Tokens,
    pub latency: f64,
}

/// `{prompt_sha256: entry}` on disk.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Cassette {
    pub entries: BTreeMap<String, CassetteEntry>,
}

fn cassette_error(path: &Path, message: impl ToString) -> FmError {
    FmError::Cassette {
        path: path.display().to_string(),
        message: message.to_string(),
    }
}

impl Cassette {
    /// SHA-256 over the full serialized prompt.
    pub fn key(prompt: &Prompt) -> String {
        sha256_hex(&prompt.canonical_bytes())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("cassette serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self, FmError> {
        let text = std::fs::read_to_string(path).map_err(|e| cassette_error(path, e))?;
        Self::from_json(&text).map_err(|e| cassette_error(path, e))
    }

    pub fn save(&self, path: &Path) -> Result<(), FmError> {
        subtask_core::io::write_atomic(path, self.to_json().as_bytes()).map_err(|e| cassette_error(path, e))
    }
}

/// Wraps a provider client with a cassette file.
pub struct CassetteClient {
    inner: Arc<dyn Completer>,
    mode: CassetteMode,
    path: PathBuf,
    cassette: Mutex<Cassette>,
}

impl CassetteClient {
    /// Replay requires the file to exist; Record starts empty when it does not.
    pub fn new(inner: Arc<dyn Completer>, mode: CassetteMode, path: impl Into<PathBuf>) -> Result<Self, FmError> {
        let path = path.into();
        let cassette = match mode {
            CassetteMode::Replay => Cassette::load(&path)?,
            CassetteMode::Record if path.exists() => Cassette::load(&path)?,
            _ => Cassette::default(),
        };
        Ok(Self {
            inner,
            mode,
            path,
            cassette: Mutex::new(cassette),
        })
    }

    pub fn mode(&self) -> CassetteMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.cassette.lock().unwrap_or_else(|e| e.into_inner()).entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn served(&self, entry: &CassetteEntry) -> FmResponse {
        FmResponse {
            raw_text: entry.raw_text.clone(),
            prompt_tokens: entry.tokens.prompt,
            completion_tokens: entry.tokens.completion,
            latency: entry.latency,
            cost_estimate: self.inner.cost(entry.tokens.prompt, entry.tokens.completion),
        }
    }

    fn lookup(&self, key: &str) -> Option<CassetteEntry> {
        self.cassette
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .entries
            .get(key)
            .cloned()
    }
}

impl Completer for CassetteClient {
    fn provider(&self) -> &ProviderConfig {
        self.inner.provider()
    }

    fn complete(&self, prompt: &Prompt) -> Result<FmResponse, FmError> {
        if self.mode == CassetteMode::Passthrough {
            return self.inner.complete(prompt);
        }
        self.inner.preflight(prompt)?;
        let key = Cassette::key(prompt);
        if let Some(entry) = self.lookup(&key) {
            return Ok(self.served(&entry));
        }
        if self.mode == CassetteMode::Replay {
            return Err(FmError::CacheMiss { hash: key });
        }
        let response = self.inner.complete(prompt)?;
        let mut cassette = self.cassette.lock().unwrap_or_else(|e| e.into_inner());
        cassette.entries.insert(
            key,
            CassetteEntry {
                raw_text: response.raw_text.clone(),
                tokens: Tokens {
                    prompt: response.prompt_tokens,
                    completion: response.completion_tokens,
                },
                latency: response.latency,
            },
        );
        cassette.save(&self.path)?;
        Ok(response)
    }

    fn cost(&self, prompt_tokens: u64, completion_tokens: u64) -> f64 {
        self.inner.cost(prompt_tokens, completion_tokens)
    }
}
