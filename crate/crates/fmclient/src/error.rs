use thiserror::Error;

#[derive(Debug, Error)]
pub enum FmError {
    #[error("provider {provider} does not accept image inputs")]
    ModalityUnsupported { provider: String },
    #[error("estimated {estimate} prompt tokens exceeds the limit of {limit}")]
    TokenLimitExceeded { estimate: u64, limit: u64 },
    #[error("environment variable {var} with the API key is not set")]
    AuthMissing { var: String },
    #[error("transport failed after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("provider returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("could not decode provider response: {0}")]
    Decode(String),
    #[error("no cassette entry for prompt {hash}")]
    CacheMiss { hash: String },
    #[error("cassette {path}: {message}")]
    Cassette { path: String, message: String },
    #[error("invalid provider config: {0}")]
    Config(String),
}

impl FmError {
    /// Errors raised before any request is sent.
    pub fn is_preflight(&self) -> bool {
        matches!(
            self,
            FmError::ModalityUnsupported { .. } | FmError::TokenLimitExceeded { .. } | FmError::AuthMissing { .. }
        )
    }
}
