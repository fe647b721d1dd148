use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderName, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use evidesk_core::corpus::{CorpusError, SourceFormat};
use evidesk_core::ragflow::RagError;
use serde::Deserialize;

use crate::engine::{Engine, ReviewStatus};
use crate::error::ServiceError;
use crate::ops::{self, Reply, TrendFormat};

impl IntoResponse for Reply {
    fn into_response(self) -> Response {
        let mut response = (StatusCode::OK, [(header::CONTENT_TYPE, self.content_type)], self.body).into_response();
        for (name, value) in self.headers {
            if let Ok(v) = HeaderValue::from_str(&value) {
                response.headers_mut().insert(HeaderName::from_static(name), v);
            }
        }
        response
    }
}

impl ServiceError {
    pub fn status(&self) -> StatusCode {
        match self {
            Self::BadRequest(_)
            | Self::Rag(RagError::EmptyQuery)
            | Self::Corpus(CorpusError::UnknownFormat(_) | CorpusError::EmptyPayload | CorpusError::InvalidUtf8(_)) => {
                StatusCode::BAD_REQUEST
            }
            Self::NotFound { .. } => StatusCode::NOT_FOUND,
            Self::Conflict(_) | Self::NotInitialized => StatusCode::CONFLICT,
            Self::Rag(RagError::StorageFull { .. }) => StatusCode::INSUFFICIENT_STORAGE,
            Self::Rag(RagError::BackendDown { .. } | RagError::GraderUnavailable(_) | RagError::ProviderUnavailable(_)) => {
                StatusCode::SERVICE_UNAVAILABLE
            }
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let body = serde_json::json!({ "error": self.code(), "message": self.to_string() });
        (self.status(), axum::Json(body)).into_response()
    }
}

type AppState = Arc<Engine>;
type ApiResult = Result<Reply, ServiceError>;

/// Runs an engine call off the async workers.
async fn blocking(engine: AppState, f: impl FnOnce(&Engine) -> ApiResult + Send + 'static) -> ApiResult {
    tokio::task::spawn_blocking(move || f(&engine))
        .await
        .map_err(|e| ServiceError::BadRequest(format!("request aborted: {e}")))?
}

#[derive(Debug, Deserialize)]
struct IngestParams {
    #[serde(default)]
    format: Option<String>,
}

async fn ingest(State(engine): State<AppState>, Query(p): Query<IngestParams>, body: Bytes) -> ApiResult {
    let format: SourceFormat = p.format.as_deref().unwrap_or("jsonl").parse()?;
    blocking(engine, move |e| ops::ingest(e, &body, format)).await
}

async fn update(State(engine): State<AppState>, body: Bytes) -> ApiResult {
    blocking(engine, move |e| ops::update(e, &body)).await
}

async fn fit(State(engine): State<AppState>) -> ApiResult {
    blocking(engine, ops::fit).await
}

#[derive(Debug, Deserialize)]
struct PageParams {
    #[serde(default)]
    offset: usize,
    limit: Option<usize>,
}

async fn records(State(engine): State<AppState>, Query(p): Query<PageParams>) -> ApiResult {
    ops::records(&engine, p.offset, p.limit)
}

#[derive(Debug, Deserialize)]
struct QueueParams {
    status: Option<ReviewStatus>,
}

async fn queue(State(engine): State<AppState>, Query(p): Query<QueueParams>) -> ApiResult {
    ops::screening_queue(&engine, p.status)
}

async fn screening(State(engine): State<AppState>, Path(id): Path<String>) -> ApiResult {
    ops::screening(&engine, &id)
}

async fn decide(State(engine): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult {
    blocking(engine, move |e| ops::decide(e, &id, &body)).await
}

async fn topics(State(engine): State<AppState>) -> ApiResult {
    ops::topics(&engine)
}

#[derive(Debug, Deserialize)]
struct TrendParams {
    from: Option<i32>,
    to: Option<i32>,
    #[serde(default)]
    format: TrendFormat,
}

async fn trends(State(engine): State<AppState>, Query(p): Query<TrendParams>) -> ApiResult {
    let range = match (p.from, p.to) {
        (None, None) => None,
        (Some(from), Some(to)) => Some((from, to)),
        _ => return Err(ServiceError::BadRequest("give both from and to, or neither".into())),
    };
    ops::trends(&engine, range, p.format)
}

async fn terms(State(engine): State<AppState>, Path(id): Path<i64>) -> ApiResult {
    ops::terms(&engine, id)
}

async fn query(State(engine): State<AppState>, body: Bytes) -> ApiResult {
    blocking(engine, move |e| ops::query(e, &body)).await
}

async fn graph_query(State(engine): State<AppState>, body: Bytes) -> ApiResult {
    blocking(engine, move |e| ops::graph_query(e, &body)).await
}

async fn metrics(State(engine): State<AppState>) -> ApiResult {
    ops::metrics(&engine)
}

#[derive(Debug, Deserialize)]
struct AuditParams {
    #[serde(default)]
    since: u64,
}

async fn audit(State(engine): State<AppState>, Query(p): Query<AuditParams>) -> ApiResult {
    ops::audit(&engine, p.since)
}

async fn health(State(engine): State<AppState>) -> ApiResult {
    ops::health(&engine)
}

pub fn router(engine: Arc<Engine>) -> Router {
    Router::new()
        .route("/ingest", post(ingest))
        .route("/update", post(update))
        .route("/fit", post(fit))
        .route("/records", get(records))
        .route("/screening", get(queue))
        .route("/screening/{id}", get(screening))
        .route("/screening/{id}/decision", post(decide))
        .route("/topics", get(topics))
        .route("/topics/trends", get(trends))
        .route("/topics/{id}/terms", get(terms))
        .route("/query", post(query))
        .route("/graph/query", post(graph_query))
        .route("/metrics", get(metrics))
        .route("/audit", get(audit))
        .route("/health", get(health))
        .with_state(engine)
}

/// Binds the configured address and serves until ctrl-c.
pub async fn serve(engine: Arc<Engine>) -> Result<(), ServiceError> {
    let addr = engine.config().server.bind.clone();
    let listener = tokio::net::TcpListener::bind(&addr).await.map_err(|e| match e.kind() {
        std::io::ErrorKind::AddrInUse => ServiceError::PortInUse { addr: addr.clone() },
        _ => ServiceError::Io(e),
    })?;
    tracing::info!(%addr, "listening");
    axum::serve(listener, router(engine))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
