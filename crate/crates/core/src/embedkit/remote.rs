use serde_json::Value;

use super::{EmbedError, Embedder, EmbeddingVector};
use crate::provider::{EndpointConfig, HttpJsonClient};

/// Embedding service speaking `{"text": ...}` -> `{"embedding": [f64, ...]}`.
#[derive(Debug, Clone)]
pub struct RemoteEmbedder {
    client: HttpJsonClient,
    dims: usize,
}

impl RemoteEmbedder {
    pub fn new(config: EndpointConfig, dims: usize) -> Result<Self, EmbedError> {
        if dims == 0 {
            return Err(EmbedError::ZeroDims);
        }
        Ok(Self {
            client: HttpJsonClient::new(config),
            dims,
        })
    }
}

impl Embedder for RemoteEmbedder {
    fn dims(&self) -> usize {
        self.dims
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        let reply = self
            .client
            .post(&serde_json::json!({ "text": text }))
            .map_err(|e| EmbedError::ProviderUnavailable(e.to_string()))?;
        let values: Vec<f64> = reply
            .get("embedding")
            .and_then(Value::as_array)
            .ok_or_else(|| EmbedError::ProviderUnavailable("reply lacks \"embedding\" array".into()))?
            .iter()
            .map(|v| v.as_f64().ok_or(EmbedError::NonFinite))
            .collect::<Result<_, _>>()?;
        if values.len() != self.dims {
            return Err(EmbedError::DimsMismatch {
                expected: self.dims,
                actual: values.len(),
            });
        }
        EmbeddingVector::normalized(values)
    }

    fn provider_id(&self) -> String {
        format!("remote:{}/{}", self.client.url(), self.dims)
    }
}
