use super::{EmbedError, Embedder, EmbeddingVector};
use crate::text::word_tokens;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit FNV-1a.
pub fn fnv1a_64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

/// Deterministic signed feature hashing over lowercase alphanumeric tokens.
///
/// Each token adds ±1 at `fnv1a(token) mod dims`; the sign is `-1` when the top bit of the
/// hash is set. The sum is L2-normalized.
#[derive(Debug, Clone)]
pub struct HashedLocalEmbedder {
    dims: usize,
}

impl HashedLocalEmbedder {
    pub fn new(dims: usize) -> Result<Self, EmbedError> {
        if dims == 0 {
            return Err(EmbedError::ZeroDims);
        }
        Ok(Self { dims })
    }

    /// Bucket and sign for one token.
    pub fn slot(&self, token: &str) -> (usize, f64) {
        let h = fnv1a_64(token.as_bytes());
        let index = (h % self.dims as u64) as usize;
        let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
        (index, sign)
    }
}

impl Embedder for HashedLocalEmbedder {
    fn dims(&self) -> usize {
        self.dims
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        let mut acc = vec![0.0; self.dims];
        for token in word_tokens(text) {
            let (i, sign) = self.slot(&token);
            acc[i] += sign;
        }
        EmbeddingVector::normalized(acc)
    }

    fn provider_id(&self) -> String {
        format!("hashed_local/fnv1a64/{}", self.dims)
    }
}
