use std::collections::BTreeMap;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::FmError;
use crate::stub::StubScript;

pub const DEFAULT_MAX_IN_FLIGHT: usize = 4;

/// One chat-completion provider. Loaded from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderConfig {
    pub name: String,
    pub endpoint: String,
    pub model: String,
    /// Environment variable holding the API key; `None` sends no auth header.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auth_env_var: Option<String>,
    pub supports_images: bool,
    pub max_prompt_tokens: u64,
    #[serde(default)]
    pub request_template: RequestTemplate,
    #[serde(default)]
    pub retry: RetryPolicy,
    #[serde(default = "default_max_in_flight")]
    pub max_in_flight: usize,
    #[serde(default)]
    pub temperature: f64,
    /// Present for stub providers, which never touch the network.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stub: Option<StubScript>,
}

fn default_max_in_flight() -> usize {
    DEFAULT_MAX_IN_FLIGHT
}

impl ProviderConfig {
    pub fn is_stub(&self) -> bool {
        self.stub.is_some()
    }

    pub fn from_json(text: &str) -> Result<Self, FmError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| FmError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, FmError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| FmError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), FmError> {
        if self.name.trim().is_empty() {
            return Err(FmError::Config("empty provider name".into()));
        }
        if self.max_in_flight == 0 {
            return Err(FmError::Config("max_in_flight must be at least 1".into()));
        }
        if self.retry.max_attempts == 0 {
            return Err(FmError::Config("retry.max_attempts must be at least 1".into()));
        }
        if !(self.retry.base_backoff_secs >= 0.0 && self.retry.base_backoff_secs.is_finite()) {
            return Err(FmError::Config("retry.base_backoff_secs must be finite and non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_backoff_secs: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            base_backoff_secs: 1.0,
        }
    }
}

impl RetryPolicy {
    /// Delay before retry number `retry` (1-based): `base * 2^(retry-1)`.
    pub fn backoff(&self, retry: u32) -> Duration {
        let factor = 2f64.powi(retry.saturating_sub(1).min(30) as i32);
        Duration::from_secs_f64(self.base_backoff_secs * factor)
    }
}

/// Declarative request/response shape.
///
/// `body` is a JSON template. A string equal to `{user_parts}` becomes the
/// list of user parts and `{temperature}` becomes a number; `{model}` and
/// `{system}` are substituted inside any string. Each text segment renders
/// `text_part` with `{text}`, each image renders `image_part` with
/// `{image_base64}`. Response fields are located with JSON pointers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestTemplate {
    pub body: Value,
    pub text_part: Value,
    pub image_part: Value,
    pub response_text: String,
    #[serde(default)]
    pub prompt_tokens: Option<String>,
    #[serde(default)]
    pub completion_tokens: Option<String>,
    #[serde(default = "default_auth_header")]
    pub auth_header: String,
    /// Header value; `{key}` is replaced with the secret.
    #[serde(default = "default_auth_format")]
    pub auth_format: String,
}

fn default_auth_header() -> String {
    "Authorization".into()
}

fn default_auth_format() -> String {
    "Bearer {key}".into()
}

impl Default for RequestTemplate {
    /// OpenAI-compatible chat completions.
    fn default() -> Self {
        Self {
            body: json!({
                "model": "{model}",
                "temperature": "{temperature}",
                "messages": [
                    {"role": "system", "content": "{system}"},
                    {"role": "user", "content": "{user_parts}"}
                ]
            }),
            text_part: json!({"type": "text", "text": "{text}"}),
            image_part: json!({"type": "image_url", "image_url": {"url": "data:image/png;base64,{image_base64}"}}),
            response_text: "/choices/0/message/content".into(),
            prompt_tokens: Some("/usage/prompt_tokens".into()),
            completion_tokens: Some("/usage/completion_tokens".into()),
            auth_header: default_auth_header(),
            auth_format: default_auth_format(),
        }
    }
}

/// Per-1k-token prices in arbitrary currency units.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Price {
    pub prompt_per_1k: f64,
    pub completion_per_1k: f64,
}

impl Price {
    pub fn cost(&self, prompt_tokens: u64, completion_tokens: u64) -> f64 {
        (self.prompt_per_1k * prompt_tokens as f64 + self.completion_per_1k * completion_tokens as f64) / 1000.0
    }
}

/// Provider name to price; a JSON object on disk.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PriceTable(pub BTreeMap<String, Price>);

impl PriceTable {
    pub fn from_json(text: &str) -> Result<Self, FmError> {
        let table: Self = serde_json::from_str(text).map_err(|e| FmError::Config(format!("price table: {e}")))?;
        for (name, p) in &table.0 {
            let ok = |v: f64| v.is_finite() && v >= 0.0;
            if !ok(p.prompt_per_1k) || !ok(p.completion_per_1k) {
                return Err(FmError::Config(format!("price for {name} must be finite and non-negative")));
            }
        }
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self, FmError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| FmError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Zero when the provider is not listed.
    pub fn price(&self, provider: &str) -> Price {
        self.0.get(provider).copied().unwrap_or_default()
    }
}
