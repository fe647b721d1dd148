use evidesk_core::corpus::CorpusError;
use evidesk_core::designclf::DesignError;
use evidesk_core::embedkit::EmbedError;
use evidesk_core::evalkit::EvalError;
use evidesk_core::graphcore::GraphError;
use evidesk_core::ragflow::RagError;
use evidesk_core::screener::ScreenerError;
use evidesk_core::topicmill::TopicError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("bad config at {field}: {reason}")]
    BadConfig { field: String, reason: String },
    #[error("address {addr} is already in use")]
    PortInUse { addr: String },
    #[error("no topic model fitted yet")]
    NotInitialized,
    #[error("{what} {id:?} not found")]
    NotFound { what: &'static str, id: String },
    #[error("conflict: {0}")]
    Conflict(String),
    #[error("invalid request: {0}")]
    BadRequest(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Screener(#[from] ScreenerError),
    #[error(transparent)]
    Design(#[from] DesignError),
    #[error(transparent)]
    Topic(#[from] TopicError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Rag(#[from] RagError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl ServiceError {
    /// Short machine-readable code used in API error bodies.
    pub fn code(&self) -> &'static str {
        match self {
            Self::BadConfig { .. } => "bad_config",
            Self::PortInUse { .. } => "port_in_use",
            Self::NotInitialized => "not_initialized",
            Self::NotFound { .. } => "not_found",
            Self::Conflict(_) => "conflict",
            Self::BadRequest(_) => "bad_request",
            Self::Rag(RagError::EmptyQuery) => "empty_query",
            Self::Rag(RagError::StorageFull { .. }) => "storage_full",
            Self::Rag(RagError::BackendDown { .. }) => "backend_down",
            Self::Rag(RagError::GraderUnavailable(_) | RagError::ProviderUnavailable(_)) => "provider_unavailable",
            Self::Corpus(_) => "corpus_error",
            Self::Embed(_) => "embedding_error",
            Self::Screener(_) => "screener_error",
            Self::Design(_) => "design_error",
            Self::Topic(_) => "topic_error",
            Self::Graph(_) => "graph_error",
            Self::Rag(_) => "query_error",
            Self::Eval(_) => "eval_error",
            Self::Io(_) => "io_error",
        }
    }
}
