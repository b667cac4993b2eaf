//! Provider-agnostic chat-completion client.
//!
//! A [`ProviderConfig`] describes one endpoint declaratively; [`FmClient`]
//! turns a [`subtask_core::prompt::Prompt`] into a request, enforces the
//! pre-flight checks, retries transient failures and reports usage. A stub
//! provider and record/replay cassettes make whole pipelines runnable offline.

pub mod cassette;
pub mod client;
pub mod config;
pub mod embed;
pub mod error;
pub mod request;
pub mod stub;
pub mod transport;

pub use cassette::{Cassette, CassetteClient, CassetteEntry, CassetteMode};
pub use client::{Completer, FmClient, FmResponse, Sleeper};
pub use config::{Price, PriceTable, ProviderConfig, RequestTemplate, RetryPolicy};
pub use embed::{EmbeddingConfig, RemoteEncoder};
pub use error::FmError;
pub use stub::{stub_provider, NoiseMode, NoiseSchedule, NoiseTarget, StubScript};
pub use transport::{FailingTransport, HttpRequest, HttpResponse, HttpTransport, Transport, TransportError};

/// Hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(bytes))
}
