//! Text encoders used for semantic similarity.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EncodeError {
    #[error("cannot encode empty text")]
    EmptyText,
    #[error("encoder backend: {0}")]
    Backend(String),
}

/// Maps a description to a fixed-dimension real vector.
///
/// Implementations must be deterministic (same text, same vector) and must not
/// return the zero vector for non-empty text. They are shared across threads.
pub trait Encoder: Send + Sync {
    fn id(&self) -> &str;
    fn encode(&self, text: &str) -> Result<Vec<f64>, EncodeError>;
}

impl<E: Encoder + ?Sized> Encoder for std::sync::Arc<E> {
    fn id(&self) -> &str {
        (**self).id()
    }

    fn encode(&self, text: &str) -> Result<Vec<f64>, EncodeError> {
        (**self).encode(text)
    }
}

impl<E: Encoder + ?Sized> Encoder for Box<E> {
    fn id(&self) -> &str {
        (**self).id()
    }

    fn encode(&self, text: &str) -> Result<Vec<f64>, EncodeError> {
        (**self).encode(text)
    }
}

pub const DEFAULT_BAG_DIMENSION: usize = 256;

/// Hashed bag-of-words counts. Deterministic and dependency-free, meant for
/// tests and offline runs.
///
/// Text is lowercased and split on runs of non-alphanumeric characters; each
/// token adds 1 to bucket `fnv1a64(token) mod d`. Text without any
/// alphanumeric token is hashed whole so the result is never zero.
#[derive(Debug, Clone)]
pub struct BagEncoder {
    dimension: usize,
    id: String,
}

impl BagEncoder {
    pub fn new(dimension: usize) -> Self {
        assert!(dimension > 0, "bag encoder dimension must be positive");
        Self {
            dimension,
            id: format!("bag-fnv1a64-d{dimension}"),
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn bucket(&self, token: &str) -> usize {
        (fnv1a64(token.as_bytes()) % self.dimension as u64) as usize
    }
}

impl Default for BagEncoder {
    fn default() -> Self {
        Self::new(DEFAULT_BAG_DIMENSION)
    }
}

pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

impl Encoder for BagEncoder {
    fn id(&self) -> &str {
        &self.id
    }

    fn encode(&self, text: &str) -> Result<Vec<f64>, EncodeError> {
        let trimmed = text.trim();
        if trimmed.is_empty() {
            return Err(EncodeError::EmptyText);
        }
        let mut v = vec![0.0; self.dimension];
        let tokens = tokenize(trimmed);
        if tokens.is_empty() {
            v[self.bucket(trimmed)] += 1.0;
        }
        for t in &tokens {
            v[self.bucket(t)] += 1.0;
        }
        Ok(v)
    }
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    bytes
        .iter()
        .fold(OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(PRIME))
}
