//! Blocking JSON-over-HTTP client shared by the remote embedding, design and LLM providers.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("request to {url} failed after {attempts} attempt(s): {reason}")]
    Unavailable {
        url: String,
        attempts: u32,
        reason: String,
    },
    #[error("unexpected response from {url}: {reason}")]
    BadResponse { url: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointConfig {
    pub url: String,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_retries")]
    pub retries: u32,
    /// Name of an environment variable holding a bearer token.
    #[serde(default)]
    pub api_key_env: Option<String>,
}

fn default_timeout_ms() -> u64 {
    30_000
}

fn default_retries() -> u32 {
    1
}

impl EndpointConfig {
    pub fn new(url: impl Into<String>) -> Self {
        Self {
            url: url.into(),
            timeout_ms: default_timeout_ms(),
            retries: default_retries(),
            api_key_env: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct HttpJsonClient {
    config: EndpointConfig,
    agent: ureq::Agent,
}

impl HttpJsonClient {
    pub fn new(config: EndpointConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(config.timeout_ms)))
            .http_status_as_error(false)
            .build()
            .into();
        Self { config, agent }
    }

    pub fn url(&self) -> &str {
        &self.config.url
    }

    /// POSTs `body` and parses the JSON reply. Transport errors and 5xx are retried.
    pub fn post(&self, body: &Value) -> Result<Value, ProviderError> {
        let token = self
            .config
            .api_key_env
            .as_deref()
            .and_then(|var| std::env::var(var).ok());
        let attempts = self.config.retries + 1;
        let mut last = String::new();
        for _ in 0..attempts {
            let mut request = self.agent.post(&self.config.url);
            if let Some(token) = &token {
                request = request.header("Authorization", &format!("Bearer {token}"));
            }
            match request.send_json(body) {
                Ok(mut response) => {
                    let status = response.status().as_u16();
                    if status >= 500 {
                        last = format!("HTTP {status}");
                        continue;
                    }
                    if status >= 400 {
                        return Err(ProviderError::BadResponse {
                            url: self.config.url.clone(),
                            reason: format!("HTTP {status}"),
                        });
                    }
                    return response.body_mut().read_json::<Value>().map_err(|e| {
                        ProviderError::BadResponse {
                            url: self.config.url.clone(),
                            reason: e.to_string(),
                        }
                    });
                }
                Err(err) => last = err.to_string(),
            }
        }
        Err(ProviderError::Unavailable {
            url: self.config.url.clone(),
            attempts,
            reason: last,
        })
    }
}

/// Text-in, text-out model endpoint: `{"prompt": ...}` -> `{"text": ...}`.
pub trait LanguageModel: Send + Sync {
    fn complete(&self, prompt: &str) -> Result<String, ProviderError>;
    fn model_id(&self) -> String;
}

#[derive(Debug, Clone)]
pub struct HttpLanguageModel {
    client: HttpJsonClient,
}

impl HttpLanguageModel {
    pub fn new(config: EndpointConfig) -> Self {
        Self {
            client: HttpJsonClient::new(config),
        }
    }
}

impl LanguageModel for HttpLanguageModel {
    fn complete(&self, prompt: &str) -> Result<String, ProviderError> {
        let reply = self.client.post(&serde_json::json!({ "prompt": prompt }))?;
        reply
            .get("text")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| ProviderError::BadResponse {
                url: self.client.url().to_string(),
                reason: "missing string field \"text\"".into(),
            })
    }

    fn model_id(&self) -> String {
        format!("http:{}", self.client.url())
    }
}
