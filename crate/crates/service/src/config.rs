use std::path::{Path, PathBuf};

use evidesk_core::corpus::EligibilityRubric;
use evidesk_core::provider::EndpointConfig;
use evidesk_core::ragflow::AnswerConfig;
use evidesk_core::screener::{ComplianceConfig, ModelConfig, TrainConfig};
use evidesk_core::topicmill::{RedundancyConfig, TopicParams};
use serde::{Deserialize, Serialize};

use crate::error::ServiceError;

/// The whole deployment in one JSON document. Every field has a default, so `{}` is valid.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub server: ServerConfig,
    pub storage: StorageConfig,
    pub providers: ProviderConfig,
    pub chunking: ChunkingConfig,
    pub screening: ScreeningConfig,
    pub design: DesignConfig,
    /// `max_distance` is the topic assignment cutoff; `seed` drives clustering.
    pub topics: TopicParams,
    pub redundancy: RedundancyConfig,
    pub retrieval: RetrievalConfig,
    pub living: LivingConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ServerConfig {
    pub bind: String,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1:8080".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StorageConfig {
    /// State directory. Without it the service keeps everything in memory.
    pub data_dir: Option<PathBuf>,
    pub audit_max_bytes: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EmbeddingProvider {
    HashedLocal { dims: usize },
    Remote { endpoint: EndpointConfig, dims: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    /// Deterministic local implementation.
    #[default]
    Local,
    Llm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProviderConfig {
    pub embedding: EmbeddingProvider,
    /// Completion endpoint shared by every `llm` backend.
    pub llm: Option<EndpointConfig>,
    pub router: Backend,
    pub grader: Backend,
    pub synthesizer: Backend,
    pub design: Backend,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self {
            embedding: EmbeddingProvider::HashedLocal { dims: 256 },
            llm: None,
            router: Backend::Local,
            grader: Backend::Local,
            synthesizer: Backend::Local,
            design: Backend::Local,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChunkingConfig {
    pub max_tokens: usize,
    pub overlap: usize,
}

impl Default for ChunkingConfig {
    fn default() -> Self {
        Self {
            max_tokens: 128,
            overlap: 16,
        }
    }
}

/// Synthetic-corpus training used when no screener model file is given.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BootstrapConfig {
    pub corpus_size: usize,
    pub corpus_seed: u64,
    pub model: ModelConfig,
    pub train: TrainConfig,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            corpus_size: 600,
            corpus_seed: 1,
            model: ModelConfig {
                embed_dim: 16,
                hidden: 16,
                dense_units: 16,
                dropout: 0.3,
            },
            train: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScreeningConfig {
    /// Rubric mode and the per-element probability threshold.
    pub compliance: ComplianceConfig,
    pub eligibility: EligibilityRubric,
    pub model_path: Option<PathBuf>,
    pub bootstrap: BootstrapConfig,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DesignConfig {
    pub lexicon_path: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RetrievalConfig {
    /// Overlap ratio at which the local grader calls evidence relevant.
    pub relevance_threshold: f64,
    pub answer: AnswerConfig,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        Self {
            relevance_threshold: 0.2,
            answer: AnswerConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LivingConfig {
    /// Outlier share above which an update flags the topic model for refitting.
    pub refit_outlier_fraction: f64,
}

impl Default for LivingConfig {
    fn default() -> Self {
        Self {
            refit_outlier_fraction: 0.2,
        }
    }
}

fn bad(field: &str, reason: impl Into<String>) -> ServiceError {
    ServiceError::BadConfig {
        field: field.into(),
        reason: reason.into(),
    }
}

fn unit_interval(field: &str, value: f64) -> Result<(), ServiceError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(bad(field, format!("must lie in [0, 1], got {value}")))
    }
}

impl Config {
    /// Parses JSON, naming the offending field on type errors and out-of-range values.
    pub fn from_json(text: &str) -> Result<Self, ServiceError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: Config = serde_path_to_error::deserialize(de).map_err(|e| {
            let field = e.path().to_string();
            bad(if field == "." { "<root>" } else { &field }, e.into_inner().to_string())
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ServiceError> {
        let text = std::fs::read_to_string(path).map_err(|e| bad("<file>", format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), ServiceError> {
        let dims = match &self.providers.embedding {
            EmbeddingProvider::HashedLocal { dims } | EmbeddingProvider::Remote { dims, .. } => *dims,
        };
        if dims == 0 {
            return Err(bad("providers.embedding.dims", "must be positive"));
        }
        let needs_llm = [
            ("providers.router", self.providers.router),
            ("providers.grader", self.providers.grader),
            ("providers.synthesizer", self.providers.synthesizer),
            ("providers.design", self.providers.design),
        ];
        if let Some((field, _)) = needs_llm.iter().find(|(_, b)| *b == Backend::Llm) {
            if self.providers.llm.is_none() {
                return Err(bad(field, "llm backend selected but providers.llm is not set"));
            }
        }
        if self.chunking.max_tokens == 0 || self.chunking.overlap >= self.chunking.max_tokens {
            return Err(bad("chunking.overlap", "must be smaller than a positive chunking.max_tokens"));
        }
        unit_interval("screening.compliance.threshold", self.screening.compliance.threshold)?;
        self.screening
            .eligibility
            .validate()
            .map_err(|e| bad("screening.eligibility", e.to_string()))?;
        if self.screening.bootstrap.corpus_size == 0 {
            return Err(bad("screening.bootstrap.corpus_size", "must be positive"));
        }
        self.screening
            .bootstrap
            .model
            .validate()
            .map_err(|e| bad("screening.bootstrap.model", e.to_string()))?;
        self.topics.validate().map_err(|e| bad("topics", e.to_string()))?;
        unit_interval("redundancy.min_similarity", self.redundancy.min_similarity)?;
        if self.redundancy.window_years < 1 {
            return Err(bad("redundancy.window_years", "must be at least 1"));
        }
        unit_interval("retrieval.relevance_threshold", self.retrieval.relevance_threshold)?;
        if self.retrieval.answer.top_k == 0 {
            return Err(bad("retrieval.answer.top_k", "must be positive"));
        }
        unit_interval("living.refit_outlier_fraction", self.living.refit_outlier_fraction)?;
        Ok(())
    }

    pub fn embedding_dims(&self) -> usize {
        match &self.providers.embedding {
            EmbeddingProvider::HashedLocal { dims } | EmbeddingProvider::Remote { dims, .. } => *dims,
        }
    }
}
