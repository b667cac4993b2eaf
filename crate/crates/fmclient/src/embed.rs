//! Sentence encoder backed by a remote embeddings endpoint.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use subtask_core::{EncodeError, Encoder};

use crate::error::FmError;
use crate::request::fill;
use crate::sha256_hex;
use crate::transport::{HttpRequest, Transport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingConfig {
    pub endpoint: String,
    pub model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auth_env_var: Option<String>,
    /// JSON pointer to the vector in the response.
    #[serde(default = "default_pointer")]
    pub response_pointer: String,
    /// Vectors are cached here across runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache_path: Option<PathBuf>,
}

fn default_pointer() -> String {
    "/data/0/embedding".into()
}

/// OpenAI-style embeddings encoder with an on-disk cache keyed by
/// `model|sha256(text)`. Cache hits never touch the network.
pub struct RemoteEncoder {
    config: EmbeddingConfig,
    transport: Arc<dyn Transport>,
    id: String,
    cache: Mutex<BTreeMap<String, Vec<f64>>>,
}

fn load_cache(path: &Path) -> Result<BTreeMap<String, Vec<f64>>, FmError> {
    if !path.exists() {
        return Ok(BTreeMap::new());
    }
    let text = std::fs::read_to_string(path).map_err(|e| FmError::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| FmError::Config(format!("{}: {e}", path.display())))
}

impl RemoteEncoder {
    pub fn new(config: EmbeddingConfig, transport: Arc<dyn Transport>) -> Result<Self, FmError> {
        let cache = match &config.cache_path {
            Some(p) => load_cache(p)?,
            None => BTreeMap::new(),
        };
        Ok(Self {
            id: format!("remote-{}", config.model),
            config,
            transport,
            cache: Mutex::new(cache),
        })
    }

    fn key(&self, text: &str) -> String {
        format!("{}|{}", self.config.model, sha256_hex(text.as_bytes()))
    }

    fn fetch(&self, text: &str) -> Result<Vec<f64>, EncodeError> {
        let mut headers = Vec::new();
        if let Some(var) = &self.config.auth_env_var {
            let key = std::env::var(var).map_err(|_| EncodeError::Backend(format!("{var} is not set")))?;
            headers.push(("Authorization".to_string(), fill("Bearer {key}", &[("key", &key)])));
        }
        let body = json!({"model": self.config.model, "input": text});
        let request = HttpRequest {
            url: self.config.endpoint.clone(),
            headers,
            body: serde_json::to_vec(&body).expect("body serializes"),
        };
        let response = self
            .transport
            .post(&request)
            .map_err(|e| EncodeError::Backend(e.message))?;
        if !(200..300).contains(&response.status) {
            return Err(EncodeError::Backend(format!("HTTP {}", response.status)));
        }
        let v: Value = serde_json::from_slice(&response.body).map_err(|e| EncodeError::Backend(e.to_string()))?;
        let vector = v
            .pointer(&self.config.response_pointer)
            .and_then(Value::as_array)
            .ok_or_else(|| EncodeError::Backend(format!("response lacks {}", self.config.response_pointer)))?;
        vector
            .iter()
            .map(|x| x.as_f64().ok_or_else(|| EncodeError::Backend("non-numeric embedding".into())))
            .collect()
    }
}

impl Encoder for RemoteEncoder {
    fn id(&self) -> &str {
        &self.id
    }

    fn encode(&self, text: &str) -> Result<Vec<f64>, EncodeError> {
        if text.trim().is_empty() {
            return Err(EncodeError::EmptyText);
        }
        let key = self.key(text);
        if let Some(v) = self.cache.lock().unwrap_or_else(|e| e.into_inner()).get(&key) {
            return Ok(v.clone());
        }
        let vector = self.fetch(text)?;
        let mut cache = self.cache.lock().unwrap_or_else(|e| e.into_inner());
        cache.insert(key, vector.clone());
        if let Some(path) = &self.config.cache_path {
            let bytes = serde_json::to_vec(&*cache).expect("cache serializes");
            subtask_core::io::write_atomic(path, &bytes).map_err(|e| EncodeError::Backend(e.to_string()))?;
        }
        Ok(vector)
    }
}
