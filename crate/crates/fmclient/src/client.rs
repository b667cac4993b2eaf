use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use subtask_core::prompt::{estimate_tokens, Prompt};

use crate::config::{Price, ProviderConfig};
use crate::error::FmError;
use crate::request::{extract_response, fill, render_body};
use crate::stub;
use crate::transport::{HttpRequest, HttpTransport, Transport};

const HTTP_TIMEOUT: Duration = Duration::from_secs(300);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FmResponse {
    /// May be empty; that is a parse failure downstream, not an error here.
    pub raw_text: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    /// Seconds.
    pub latency: f64,
    pub cost_estimate: f64,
}

/// Anything that answers prompts for one provider.
pub trait Completer: Send + Sync {
    fn provider(&self) -> &ProviderConfig;

    fn complete(&self, prompt: &Prompt) -> Result<FmResponse, FmError>;

    fn cost(&self, prompt_tokens: u64, completion_tokens: u64) -> f64;

    /// Checks that need no network: modality and token budget.
    fn preflight(&self, prompt: &Prompt) -> Result<(), FmError> {
        preflight(self.provider(), prompt)
    }
}

pub fn preflight(provider: &ProviderConfig, prompt: &Prompt) -> Result<(), FmError> {
    if prompt.has_images() && !provider.supports_images {
        return Err(FmError::ModalityUnsupported {
            provider: provider.name.clone(),
        });
    }
    let estimate = estimate_tokens(&prompt.segments);
    if estimate > provider.max_prompt_tokens {
        return Err(FmError::TokenLimitExceeded {
            estimate,
            limit: provider.max_prompt_tokens,
        });
    }
    Ok(())
}

fn estimate_text_tokens(text: &str) -> u64 {
    (text.chars().count() as u64).div_ceil(4)
}

/// How the client waits between retries. Injected so tests need not sleep.
pub type Sleeper = Arc<dyn Fn(Duration) + Send + Sync>;

struct Semaphore {
    free: Mutex<usize>,
    cv: Condvar,
}

struct Permit<'a>(&'a Semaphore);

impl Semaphore {
    fn new(n: usize) -> Self {
        Self {
            free: Mutex::new(n),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = self.cv.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.cv.notify_one();
    }
}

/// Client for one provider. Shareable across threads; at most
/// `max_in_flight` requests are outstanding at once, and a request waiting
/// out its backoff does not hold a slot.
pub struct FmClient {
    provider: ProviderConfig,
    transport: Arc<dyn Transport>,
    price: Price,
    sleeper: Sleeper,
    slots: Semaphore,
}

impl FmClient {
    pub fn new(provider: ProviderConfig, transport: Arc<dyn Transport>, price: Price) -> Result<Self, FmError> {
        provider.validate()?;
        Ok(Self {
            slots: Semaphore::new(provider.max_in_flight),
            provider,
            transport,
            price,
            sleeper: Arc::new(std::thread::sleep),
        })
    }

    /// Client backed by the real HTTPS transport.
    pub fn http(provider: ProviderConfig, price: Price) -> Result<Self, FmError> {
        let transport = Arc::new(HttpTransport::new(HTTP_TIMEOUT)?);
        Self::new(provider, transport, price)
    }

    pub fn with_sleeper(mut self, sleeper: Sleeper) -> Self {
        self.sleeper = sleeper;
        self
    }

    fn auth_headers(&self) -> Result<Vec<(String, String)>, FmError> {
        let Some(var) = &self.provider.auth_env_var else {
            return Ok(Vec::new());
        };
        let key = std::env::var(var)
            .ok()
            .filter(|k| !k.trim().is_empty())
            .ok_or_else(|| FmError::AuthMissing { var: var.clone() })?;
        let t = &self.provider.request_template;
        Ok(vec![(t.auth_header.clone(), fill(&t.auth_format, &[("key", &key)]))])
    }

    fn respond_stub(&self, script: &stub::StubScript, prompt: &Prompt) -> FmResponse {
        let raw_text = stub::respond(script, &prompt.env_name, prompt.seed);
        let prompt_tokens = estimate_tokens(&prompt.segments);
        let completion_tokens = estimate_text_tokens(&raw_text);
        FmResponse {
            raw_text,
            prompt_tokens,
            completion_tokens,
            latency: 0.0,
            cost_estimate: self.cost(prompt_tokens, completion_tokens),
        }
    }

    fn send(&self, prompt: &Prompt) -> Result<FmResponse, FmError> {
        let headers = self.auth_headers()?;
        let body = serde_json::to_vec(&render_body(&self.provider, prompt)).expect("request body serializes");
        let request = HttpRequest {
            url: self.provider.endpoint.clone(),
            headers,
            body,
        };
        let retry = &self.provider.retry;
        let mut last_error = String::new();
        for attempt in 1..=retry.max_attempts {
            if attempt > 1 {
                let delay = retry.backoff(attempt - 1);
                log::warn!(
                    "{}: attempt {} failed ({last_error}); retrying in {:.1}s",
                    self.provider.name,
                    attempt - 1,
                    delay.as_secs_f64()
                );
                (self.sleeper)(delay);
            }
            let started = Instant::now();
            let result = {
                let _slot = self.slots.acquire();
                self.transport.post(&request)
            };
            let latency = started.elapsed().as_secs_f64();
            match result {
                Ok(r) if (200..300).contains(&r.status) => {
                    let (raw_text, pt, ct) = extract_response(&self.provider.request_template, &r.body)?;
                    let prompt_tokens = pt.unwrap_or_else(|| estimate_tokens(&prompt.segments));
                    let completion_tokens = ct.unwrap_or_else(|| estimate_text_tokens(&raw_text));
                    return Ok(FmResponse {
                        raw_text,
                        prompt_tokens,
                        completion_tokens,
                        latency,
                        cost_estimate: self.cost(prompt_tokens, completion_tokens),
                    });
                }
                Ok(r) if r.status == 429 || r.status >= 500 => {
                    last_error = format!("HTTP {}", r.status);
                }
                Ok(r) => {
                    return Err(FmError::Status {
                        status: r.status,
                        body: String::from_utf8_lossy(&r.body).chars().take(500).collect(),
                    })
                }
                Err(e) if e.transient => last_error = e.message,
                Err(e) => {
                    return Err(FmError::Transport {
                        attempts: attempt,
                        message: e.message,
                    })
                }
            }
        }
        Err(FmError::Transport {
            attempts: retry.max_attempts,
            message: last_error,
        })
    }
}

impl Completer for FmClient {
    fn provider(&self) -> &ProviderConfig {
        &self.provider
    }

    fn complete(&self, prompt: &Prompt) -> Result<FmResponse, FmError> {
        self.preflight(prompt)?;
        match &self.provider.stub {
            Some(script) => Ok(self.respond_stub(script, prompt)),
            None => self.send(prompt),
        }
    }

    fn cost(&self, prompt_tokens: u64, completion_tokens: u64) -> f64 {
        self.price.cost(prompt_tokens, completion_tokens)
    }
}
