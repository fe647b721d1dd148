//! One function per endpoint. The HTTP layer and the CLI both call these, so a subcommand prints
//! exactly the body the matching endpoint returns.

use evidesk_core::corpus::{parse_records, Reject, SourceFormat, StudyRecord};
use evidesk_core::topicmill::{trends as topic_trends, word_cloud, RedundancyAlert, TermWeight};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::engine::{ChangeReport, DecisionRequest, Engine, ReviewStatus, ScreeningResult};
use crate::error::ServiceError;
use crate::graphq::{run_graph_query, GraphQuery};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reply {
    pub body: Vec<u8>,
    pub content_type: &'static str,
    pub headers: Vec<(&'static str, String)>,
}

impl Reply {
    pub fn json<T: Serialize>(value: &T) -> Self {
        Self {
            body: serde_json::to_vec(value).expect("plain data"),
            content_type: "application/json",
            headers: Vec::new(),
        }
    }

    fn text(body: String, content_type: &'static str) -> Self {
        Self {
            body: body.into_bytes(),
            content_type,
            headers: Vec::new(),
        }
    }
}

fn parse_body<T: DeserializeOwned>(body: &[u8]) -> Result<T, ServiceError> {
    let de = &mut serde_json::Deserializer::from_slice(body);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        ServiceError::BadRequest(format!("at {path}: {}", e.into_inner()))
    })
}

#[derive(Debug, Serialize)]
struct IngestReply {
    rejects: Vec<Reject>,
    report: ChangeReport,
}

pub fn ingest(engine: &Engine, payload: &[u8], format: SourceFormat) -> Result<Reply, ServiceError> {
    let parsed = parse_records(payload, format)?;
    let report = engine.ingest(parsed.records)?;
    Ok(Reply::json(&IngestReply {
        rejects: parsed.rejects,
        report,
    }))
}

pub fn update(engine: &Engine, body: &[u8]) -> Result<Reply, ServiceError> {
    let delta: Vec<StudyRecord> = parse_body(body)?;
    Ok(Reply::json(&engine.living_update(delta)?))
}

pub fn fit(engine: &Engine) -> Result<Reply, ServiceError> {
    Ok(Reply::json(&engine.fit()?))
}

#[derive(Debug, Serialize)]
struct RecordsPage<'a> {
    total: usize,
    offset: usize,
    records: &'a [StudyRecord],
}

pub fn records(engine: &Engine, offset: usize, limit: Option<usize>) -> Result<Reply, ServiceError> {
    let snap = engine.snapshot();
    let all = snap.corpus.records();
    let start = offset.min(all.len());
    let end = limit.map_or(all.len(), |l| (start + l).min(all.len()));
    Ok(Reply::json(&RecordsPage {
        total: all.len(),
        offset: start,
        records: &all[start..end],
    }))
}

#[derive(Debug, Serialize)]
pub struct ScreeningView<'a> {
    pub status: ReviewStatus,
    pub title: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub year: Option<i32>,
    #[serde(flatten)]
    pub result: &'a ScreeningResult,
}

fn screening_view<'a>(result: &'a ScreeningResult, record: &'a StudyRecord) -> ScreeningView<'a> {
    ScreeningView {
        status: result.status(),
        title: &record.title,
        year: record.year,
        result,
    }
}

/// The reviewer queue in corpus order, optionally filtered by status.
pub fn screening_queue(engine: &Engine, status: Option<ReviewStatus>) -> Result<Reply, ServiceError> {
    let snap = engine.snapshot();
    let items: Vec<ScreeningView> = snap
        .corpus
        .records()
        .iter()
        .map(|r| screening_view(&snap.screening[&r.id], r))
        .filter(|v| status.is_none_or(|s| v.status == s))
        .collect();
    Ok(Reply::json(&items))
}

pub fn screening(engine: &Engine, id: &str) -> Result<Reply, ServiceError> {
    let snap = engine.snapshot();
    let (Some(result), Some(record)) = (snap.screening.get(id), snap.corpus.get(id)) else {
        return Err(ServiceError::NotFound {
            what: "record",
            id: id.into(),
        });
    };
    Ok(Reply::json(&screening_view(result, record)))
}

pub fn decide(engine: &Engine, id: &str, body: &[u8]) -> Result<Reply, ServiceError> {
    let request: DecisionRequest = parse_body(body)?;
    engine.decide(id, request)?;
    screening(engine, id)
}

#[derive(Debug, Serialize)]
struct TopicView<'a> {
    id: i64,
    label: &'a str,
    size: usize,
    terms: &'a [TermWeight],
}

#[derive(Debug, Serialize)]
struct TopicsReply<'a> {
    topics: Vec<TopicView<'a>>,
    outlier_fraction: f64,
    alerts: &'a [RedundancyAlert],
    refit_pending: bool,
}

pub fn topics(engine: &Engine) -> Result<Reply, ServiceError> {
    let snap = engine.snapshot();
    let model = snap.topic_model()?;
    Ok(Reply::json(&TopicsReply {
        topics: model
            .topics
            .iter()
            .map(|t| TopicView {
                id: t.id,
                label: &t.label,
                size: t.members.len(),
                terms: &t.terms,
            })
            .collect(),
        outlier_fraction: model.outlier_fraction(),
        alerts: &snap.alerts,
        refit_pending: snap.refit_pending,
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrendFormat {
    #[default]
    Json,
    Csv,
    Jsonl,
}

pub fn trends(engine: &Engine, range: Option<(i32, i32)>, format: TrendFormat) -> Result<Reply, ServiceError> {
    if let Some((from, to)) = range {
        if from > to {
            return Err(ServiceError::BadRequest(format!("empty year range {from}..{to}")));
        }
    }
    let snap = engine.snapshot();
    let t = topic_trends(snap.topic_model()?, range);
    Ok(match format {
        TrendFormat::Json => Reply::json(&t),
        TrendFormat::Csv => Reply::text(t.to_csv(), "text/csv"),
        TrendFormat::Jsonl => Reply::text(t.to_jsonl(), "application/x-ndjson"),
    })
}

pub fn terms(engine: &Engine, topic: i64) -> Result<Reply, ServiceError> {
    let snap = engine.snapshot();
    let entry = word_cloud(snap.topic_model()?)
        .into_iter()
        .find(|e| e.topic == topic)
        .ok_or_else(|| ServiceError::NotFound {
            what: "topic",
            id: topic.to_string(),
        })?;
    Ok(Reply::json(&entry))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryRequest {
    pub query: String,
}

/// Body is the grounded answer itself; the route and audit sequence travel as headers.
pub fn query(engine: &Engine, body: &[u8]) -> Result<Reply, ServiceError> {
    let request: QueryRequest = parse_body(body)?;
    let outcome = engine.query(&request.query)?;
    let mut reply = Reply::json(&outcome.answer);
    reply.headers.push(("x-audit-seq", outcome.audit_seq.to_string()));
    reply.headers.push(("x-route", outcome.trace.route.route.as_str().to_string()));
    Ok(reply)
}

pub fn graph_query(engine: &Engine, body: &[u8]) -> Result<Reply, ServiceError> {
    let q: GraphQuery = parse_body(body)?;
    Ok(Reply::json(&run_graph_query(&engine.snapshot().graph, &q)?))
}

pub fn metrics(engine: &Engine) -> Result<Reply, ServiceError> {
    Ok(Reply::json(&engine.metrics()))
}

pub fn audit(engine: &Engine, since: u64) -> Result<Reply, ServiceError> {
    Ok(Reply::json(&engine.audit_records(since)))
}

pub fn health(engine: &Engine) -> Result<Reply, ServiceError> {
    Ok(Reply::json(&engine.health()))
}
