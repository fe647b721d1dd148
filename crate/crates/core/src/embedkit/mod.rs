//! Text embeddings, document chunking and exact cosine-similarity search.

mod chunk;
mod hashing;
mod index;
mod remote;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use chunk::{chunk_document, Chunk};
pub use hashing::{fnv1a_64, HashedLocalEmbedder};
pub use index::{cosine, SearchHit, VectorIndex};
pub use remote::RemoteEmbedder;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("embedding provider unavailable: {0}")]
    ProviderUnavailable(String),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimsMismatch { expected: usize, actual: usize },
    #[error("index is empty")]
    EmptyIndex,
    #[error("query vector is all zeros")]
    DegenerateQuery,
    #[error("embedding dimension must be positive")]
    ZeroDims,
    #[error("non-finite value in embedding")]
    NonFinite,
    #[error("chunk {0:?} already indexed")]
    DuplicateChunk(String),
    #[error("bad window parameters: max_tokens={max_tokens}, overlap={overlap}")]
    BadWindowParams { max_tokens: usize, overlap: usize },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed index file at line {line}: {reason}")]
    Corrupt { line: usize, reason: String },
}

/// A dense vector, L2-normalized unless it is the all-zero sentinel for empty text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    values: Vec<f64>,
}

impl EmbeddingVector {
    /// Normalizes `values` to unit length. All-zero input stays all-zero.
    pub fn normalized(mut values: Vec<f64>) -> Result<Self, EmbedError> {
        if values.is_empty() {
            return Err(EmbedError::ZeroDims);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(EmbedError::NonFinite);
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for v in &mut values {
                *v /= norm;
            }
        }
        Ok(Self { values })
    }

    pub fn zeros(dims: usize) -> Self {
        Self {
            values: vec![0.0; dims],
        }
    }

    pub fn dims(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }
}

/// Anything that turns text into an [`EmbeddingVector`] of a fixed width.
pub trait Embedder: Send + Sync {
    fn dims(&self) -> usize;
    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError>;
    /// Identifier recorded alongside stored vectors.
    fn provider_id(&self) -> String;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    Remote,
    HashedLocal,
}

/// Embeds with either provider kind. `remote` must be configured for [`ProviderKind::Remote`].
pub fn embed_text(
    text: &str,
    provider: ProviderKind,
    local: &HashedLocalEmbedder,
    remote: Option<&RemoteEmbedder>,
) -> Result<EmbeddingVector, EmbedError> {
    match provider {
        ProviderKind::HashedLocal => local.embed(text),
        ProviderKind::Remote => remote
            .ok_or_else(|| EmbedError::ProviderUnavailable("no remote endpoint configured".into()))?
            .embed(text),
    }
}
