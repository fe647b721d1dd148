mod common;

use std::sync::Arc;

use axum::body::{to_bytes, Body};
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use evidesk_core::graphcore::{EntityKind, Relation};
use evidesk_core::ragflow::{answer, Backends, ExtractiveSynthesizer, OverlapGrader, Providers};
use evidesk_service::api::{router, serve};
use evidesk_service::config::Config;
use evidesk_service::engine::Engine;
use evidesk_service::error::ServiceError;
use serde_json::{json, Value};
use tower::ServiceExt;

struct Resp {
    status: StatusCode,
    content_type: String,
    headers: axum::http::HeaderMap,
    body: Vec<u8>,
}

impl Resp {
    fn json(&self) -> Value {
        serde_json::from_slice(&self.body).unwrap()
    }
}

async fn call(app: &Router, method: Method, uri: &str, body: impl Into<Body>) -> Resp {
    let req = Request::builder().method(method).uri(uri).body(body.into()).unwrap();
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let headers = res.headers().clone();
    let content_type = headers.get("content-type").map(|v| v.to_str().unwrap().to_string()).unwrap_or_default();
    let body = to_bytes(res.into_body(), usize::MAX).await.unwrap().to_vec();
    Resp {
        status,
        content_type,
        headers,
        body,
    }
}

async fn get(app: &Router, uri: &str) -> Resp {
    call(app, Method::GET, uri, Body::empty()).await
}

async fn post(app: &Router, uri: &str, body: impl Into<String>) -> Resp {
    call(app, Method::POST, uri, Body::from(body.into())).await
}

fn jsonl(records: &[evidesk_core::corpus::StudyRecord]) -> String {
    evidesk_core::corpus::records_to_jsonl(records)
}

/// App with 60 ingested records and fitted topics.
async fn fitted_app() -> (Arc<Engine>, Router) {
    let engine = Arc::new(common::engine(common::config()));
    let app = router(engine.clone());
    let r = post(&app, "/ingest?format=jsonl", jsonl(&common::corpus(60, 21))).await;
    assert_eq!(r.status, StatusCode::OK, "{}", String::from_utf8_lossy(&r.body));
    assert_eq!(post(&app, "/fit", "").await.status, StatusCode::OK);
    (engine, app)
}

#[tokio::test]
async fn health_on_fresh_start() {
    let app = router(Arc::new(common::engine(common::config())));
    let r = get(&app, "/health").await;
    assert_eq!(r.status, StatusCode::OK);
    let body = r.json();
    assert_eq!(body["status"], "ok");
    let modules = body["modules"].as_object().unwrap();
    for m in ["corpus", "embedkit", "screener", "designclf", "topicmill", "graphcore", "ragflow", "evalkit"] {
        assert_eq!(modules[m]["ready"], true, "{m}");
    }
}

#[tokio::test]
async fn query_matches_direct_library_call() {
    let (engine, app) = fitted_app().await;
    for q in [
        "does tai chi reduce falls in older adults",
        "studies linking metformin and hba1c",
        "how many trials in 2019 on stroke",
        "quantum chromodynamics of gluons",
    ] {
        let r = post(&app, "/query", json!({ "query": q }).to_string()).await;
        assert_eq!(r.status, StatusCode::OK);
        assert!(r.headers.contains_key("x-audit-seq"));

        let snap = engine.snapshot();
        let backends = Backends {
            embedder: engine.parts().embedder.as_ref(),
            index: &snap.index,
            chunks: &snap.chunks,
            corpus: &snap.corpus,
            graph: &snap.graph,
        };
        let grader = OverlapGrader { threshold: 0.2 };
        let providers = Providers {
            router: None,
            grader: &grader,
            synthesizer: &ExtractiveSynthesizer,
        };
        let (direct, _) = answer(q, &backends, &providers, &Config::default().retrieval.answer).unwrap();
        assert_eq!(r.body, serde_json::to_vec(&direct).unwrap(), "{q}");
    }
    let audit = get(&app, "/audit").await.json();
    assert_eq!(audit.as_array().unwrap().len(), 4);
    assert_eq!(get(&app, "/audit?since=4").await.json().as_array().unwrap().len(), 1);
}

#[tokio::test]
async fn empty_query_is_rejected() {
    let (_, app) = fitted_app().await;
    let r = post(&app, "/query", r#"{"query": "   "}"#).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    assert_eq!(r.json()["error"], "empty_query");
    let r = post(&app, "/query", r#"{"question": "x"}"#).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn topics_need_a_fit() {
    let app = router(Arc::new(common::engine(common::config())));
    assert_eq!(get(&app, "/topics").await.status, StatusCode::CONFLICT);
    let r = post(&app, "/update", "[]").await;
    assert_eq!(r.status, StatusCode::CONFLICT);
    assert_eq!(r.json()["error"], "not_initialized");
}

#[tokio::test]
async fn topic_feeds() {
    let (engine, app) = fitted_app().await;
    let topics = get(&app, "/topics").await.json();
    let list = topics["topics"].as_array().unwrap();
    assert_eq!(list.len(), 5);
    let total: u64 = list.iter().map(|t| t["size"].as_u64().unwrap()).sum();
    assert_eq!(total, 60);

    let trends = get(&app, "/topics/trends").await.json();
    let counts: u64 = trends["counts"].as_array().unwrap().iter().flat_map(|row| row.as_array().unwrap()).map(|c| c.as_u64().unwrap()).sum();
    assert_eq!(counts, 60);
    let csv = get(&app, "/topics/trends?format=csv&from=2015&to=2018").await;
    assert!(csv.content_type.starts_with("text/csv"));
    assert!(String::from_utf8(csv.body).unwrap().starts_with("topic,label,2015,2016,2017,2018\n"));
    assert_eq!(get(&app, "/topics/trends?from=2015").await.status, StatusCode::BAD_REQUEST);

    let terms = get(&app, "/topics/0/terms").await.json();
    let label = engine.snapshot().topics.as_ref().unwrap().topic(0).unwrap().label.clone();
    assert_eq!(terms["label"], label);
    assert!(!terms["terms"].as_array().unwrap().is_empty());
    assert_eq!(get(&app, "/topics/99/terms").await.status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn living_update_over_http() {
    let (_, app) = fitted_app().await;
    let delta = serde_json::to_string(&common::corpus(70, 21)[60..]).unwrap();
    let report = post(&app, "/update", delta).await.json();
    assert_eq!(report["ingested"], 10);
    assert_eq!(report["duplicates"], 0);
    let dup = serde_json::to_string(&common::corpus(61, 21)[60..]).unwrap();
    assert_eq!(post(&app, "/update", dup).await.json()["duplicates"], 1);
    let records = get(&app, "/records?offset=65&limit=10").await.json();
    assert_eq!(records["total"], 70);
    assert_eq!(records["records"].as_array().unwrap().len(), 5);
    let bad = post(&app, "/update", r#"[{"id": 5}]"#).await;
    assert_eq!(bad.status, StatusCode::BAD_REQUEST);
    assert!(bad.json()["message"].as_str().unwrap().contains("[0]"));
}

#[tokio::test]
async fn reviewer_decisions_are_audited_once() {
    let (engine, app) = fitted_app().await;
    let queue = get(&app, "/screening?status=pending").await.json();
    assert_eq!(queue.as_array().unwrap().len(), 60);
    let item = get(&app, "/screening/r004").await.json();
    assert_eq!(item["status"], "pending");
    assert_eq!(item["design"]["path"].as_array().unwrap().last().unwrap(), "rct");

    let accept = json!({ "decision": "accepted", "reviewer": "rev-a" }).to_string();
    let r = post(&app, "/screening/r004/decision", accept.clone()).await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.json()["status"], "accepted");
    let again = post(&app, "/screening/r004/decision", accept).await;
    assert_eq!(again.status, StatusCode::CONFLICT);
    assert_eq!(get(&app, "/audit").await.json().as_array().unwrap().len(), 1);

    let over = json!({ "decision": "overridden", "reviewer": "rev-b", "override": { "design": "cohort" } }).to_string();
    let r = post(&app, "/screening/r005/decision", over).await.json();
    assert_eq!(r["status"], "overridden");
    assert_eq!(r["review"]["reviewer"], "rev-b");
    assert_eq!(r["review"]["override"]["design"], "cohort");
    assert_eq!(r["design"]["path"].as_array().unwrap().last().unwrap(), "rct");
    let snap = engine.snapshot();
    let study = snap.graph.find(EntityKind::Study, "r005").unwrap();
    let designs = snap.graph.neighbors(study, Some(Relation::HasDesign), evidesk_core::graphcore::Direction::Outgoing).unwrap();
    assert_eq!(designs.len(), 1);
    assert_eq!(snap.graph.entity(designs[0]).unwrap().name, "cohort");

    let audit = get(&app, "/audit").await.json();
    let entries = audit.as_array().unwrap();
    assert_eq!(entries.len(), 2);
    assert_eq!(entries[1]["event"]["kind"], "review");
    assert_eq!(entries[1]["event"]["reviewer"], "rev-b");
    assert_eq!(get(&app, "/screening?status=pending").await.json().as_array().unwrap().len(), 58);

    let missing = json!({ "decision": "overridden", "reviewer": "rev-b" }).to_string();
    assert_eq!(post(&app, "/screening/r006/decision", missing).await.status, StatusCode::BAD_REQUEST);
    let ghost = json!({ "decision": "accepted", "reviewer": "x" }).to_string();
    assert_eq!(post(&app, "/screening/nope/decision", ghost).await.status, StatusCode::NOT_FOUND);
    assert_eq!(get(&app, "/audit").await.json().as_array().unwrap().len(), 2);

    let metrics = get(&app, "/metrics").await.json();
    assert_eq!(metrics["reviewed"], 2);
    assert_eq!(metrics["pending"], 58);
}

#[tokio::test]
async fn graph_queries() {
    let (engine, app) = fitted_app().await;
    let r = post(
        &app,
        "/graph/query",
        r#"{"op":"neighbors","entity":{"kind":"intervention","name":"tai chi"},"relation":"evaluates"}"#,
    )
    .await
    .json();
    let snap = engine.snapshot();
    let expected = snap
        .corpus
        .records()
        .iter()
        .filter(|r| r.interventions.as_ref().unwrap().iter().any(|i| i == "tai chi"))
        .count();
    assert_eq!(r["neighbors"].as_array().unwrap().len(), expected);
    assert!(expected > 0);

    let stats = post(&app, "/graph/query", r#"{"op":"stats"}"#).await.json();
    assert_eq!(stats["stats"]["entities"]["study"], 60);
    assert_eq!(stats["stats"]["edges"]["assigned_topic"], 60);
    let missing = post(&app, "/graph/query", r#"{"op":"neighbors","entity":{"kind":"venue","name":"Nature"}}"#).await;
    assert_eq!(missing.status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn ingest_reports_rejects() {
    let app = router(Arc::new(common::engine(common::config())));
    let payload = format!("{}not json\n", jsonl(&common::corpus(3, 1)));
    let body = post(&app, "/ingest", payload).await.json();
    assert_eq!(body["report"]["ingested"], 3);
    assert_eq!(body["rejects"].as_array().unwrap().len(), 1);
    assert_eq!(post(&app, "/ingest?format=xml", "x").await.status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn occupied_port_is_reported() {
    let taken = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let mut config = common::config();
    config.server.bind = taken.local_addr().unwrap().to_string();
    let engine = Arc::new(common::engine(config));
    assert!(matches!(serve(engine).await, Err(ServiceError::PortInUse { .. })));
}

#[test]
fn malformed_config_names_the_field() {
    let err = Config::from_json(r#"{"retrieval": {"relevance_threshold": "high"}}"#).unwrap_err();
    let ServiceError::BadConfig { field, .. } = err else {
        panic!("{err:?}")
    };
    assert_eq!(field, "retrieval.relevance_threshold");
}
