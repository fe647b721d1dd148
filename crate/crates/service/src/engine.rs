//! Service state and the write paths that change it.
//!
//! Readers take an `Arc<Snapshot>` and never block writers for longer than a pointer swap.
//! Writers serialize on one mutex, mutate a private copy and publish it whole, so a reader sees
//! either the state before an update or the state after it.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, MutexGuard, RwLock};

use chrono::{DateTime, Utc};
use evidesk_core::corpus::{evaluate_eligibility, Corpus, EligibilityAssessment, StudyRecord};
use evidesk_core::designclf::{classify_design, CueLexicon, DesignLabel, DesignNode, DesignProvider};
use evidesk_core::embedkit::{chunk_document, Chunk, Embedder, EmbeddingVector, HashedLocalEmbedder, RemoteEmbedder, VectorIndex};
use evidesk_core::evalkit::{derive_metrics, ConfusionCounts, MetricsReport};
use evidesk_core::graphcore::{Direction, EdgeKey, EntityKind, EvidenceGraph, Properties, Relation};
use evidesk_core::provider::{HttpLanguageModel, LanguageModel};
use evidesk_core::ragflow::{
    answer, AuditEvent, AuditLog, AuditRecord, Backends, ExtractiveSynthesizer, Grader, GroundedAnswer, LlmGrader,
    LlmRouter, LlmSynthesizer, OverlapGrader, Providers, QueryTrace, RagError, ReviewAction, RouteProvider,
    Synthesizer,
};
use evidesk_core::screener::{
    load_model, save_model, screen_abstract, synthetic_corpus, train, PicosAssessment, SequenceModel,
};
use evidesk_core::topicmill::{
    fit_topics, redundancy_alerts, RedundancyAlert, TopicDocument, TopicModel, OUTLIER,
};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::{Backend, Config, EmbeddingProvider};
use crate::error::ServiceError;

/// Machine screening of one record plus the reviewer's decision, if any.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreeningResult {
    pub record_id: String,
    pub eligibility: EligibilityAssessment,
    /// Absent when the record has no abstract to tag.
    pub picos: Option<PicosAssessment>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub picos_note: Option<String>,
    pub design: DesignLabel,
    pub design_provider: DesignProvider,
    pub review: Option<ReviewDecision>,
}

impl ScreeningResult {
    pub fn status(&self) -> ReviewStatus {
        self.review.as_ref().map_or(ReviewStatus::Pending, |r| r.status)
    }

    /// The reviewer's design when overridden, otherwise the machine leaf.
    pub fn effective_design(&self) -> DesignNode {
        self.review
            .as_ref()
            .and_then(|r| r.override_payload.as_ref())
            .and_then(|o| o.design)
            .unwrap_or_else(|| self.design.leaf())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReviewStatus {
    Pending,
    Accepted,
    Overridden,
}

/// Corrections a reviewer makes to the machine verdicts.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScreeningOverride {
    #[serde(default)]
    pub design: Option<DesignNode>,
    #[serde(default)]
    pub compliant: Option<bool>,
    #[serde(default)]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewDecision {
    pub status: ReviewStatus,
    pub reviewer: String,
    pub decided_at: DateTime<Utc>,
    #[serde(rename = "override", default, skip_serializing_if = "Option::is_none")]
    pub override_payload: Option<ScreeningOverride>,
    pub audit_seq: u64,
}

/// Body of a reviewer decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecisionRequest {
    pub decision: ReviewStatus,
    pub reviewer: String,
    #[serde(rename = "override", default)]
    pub override_payload: Option<ScreeningOverride>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectedRecord {
    pub id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangeReport {
    pub ingested: u64,
    pub duplicates: u64,
    pub rejected: Vec<RejectedRecord>,
    pub newly_compliant: u64,
    /// New members per topic id.
    pub topic_deltas: BTreeMap<i64, u64>,
    pub new_alerts: Vec<RedundancyAlert>,
    pub outlier_fraction: f64,
    pub refit_triggered: bool,
    pub timestamp: DateTime<Utc>,
}

impl ChangeReport {
    fn new() -> Self {
        Self {
            ingested: 0,
            duplicates: 0,
            rejected: Vec::new(),
            newly_compliant: 0,
            topic_deltas: BTreeMap::new(),
            new_alerts: Vec::new(),
            outlier_fraction: 0.0,
            refit_triggered: false,
            timestamp: Utc::now(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub documents: usize,
    pub topics: usize,
    pub outlier_fraction: f64,
    pub alerts: usize,
}

/// Everything a reader can observe, published as one unit.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub corpus: Corpus,
    pub vectors: BTreeMap<String, EmbeddingVector>,
    pub chunks: BTreeMap<String, Chunk>,
    pub index: VectorIndex,
    pub graph: EvidenceGraph,
    pub screening: BTreeMap<String, ScreeningResult>,
    pub topics: Option<TopicModel>,
    pub alerts: Vec<RedundancyAlert>,
    pub refit_pending: bool,
}

impl Snapshot {
    fn empty(dims: usize) -> Result<Self, ServiceError> {
        Ok(Self {
            corpus: Corpus::new(),
            vectors: BTreeMap::new(),
            chunks: BTreeMap::new(),
            index: VectorIndex::new(dims)?,
            graph: EvidenceGraph::new(),
            screening: BTreeMap::new(),
            topics: None,
            alerts: Vec::new(),
            refit_pending: false,
        })
    }

    pub fn topic_documents(&self) -> Vec<TopicDocument> {
        self.corpus
            .records()
            .iter()
            .map(|r| TopicDocument {
                id: r.id.clone(),
                vector: self.vectors[&r.id].clone(),
                text: r.full_text(),
                year: r.year,
            })
            .collect()
    }

    pub fn topic_model(&self) -> Result<&TopicModel, ServiceError> {
        self.topics.as_ref().ok_or(ServiceError::NotInitialized)
    }
}

/// Externally built collaborators, so tests can inject stubs.
pub struct Parts {
    pub embedder: Arc<dyn Embedder>,
    pub llm: Option<Arc<dyn LanguageModel>>,
    pub screener: SequenceModel,
    pub lexicon: CueLexicon,
}

impl Parts {
    /// Builds providers from config. The screener is loaded from `screening.model_path`, then from
    /// a cached bootstrap model in the data directory, and otherwise trained and cached there.
    pub fn from_config(config: &Config) -> Result<Self, ServiceError> {
        let embedder: Arc<dyn Embedder> = match &config.providers.embedding {
            EmbeddingProvider::HashedLocal { dims } => Arc::new(HashedLocalEmbedder::new(*dims)?),
            EmbeddingProvider::Remote { endpoint, dims } => Arc::new(RemoteEmbedder::new(endpoint.clone(), *dims)?),
        };
        let llm = config
            .providers
            .llm
            .clone()
            .map(|e| Arc::new(HttpLanguageModel::new(e)) as Arc<dyn LanguageModel>);
        let lexicon = match &config.design.lexicon_path {
            Some(path) => CueLexicon::load(path)?,
            None => CueLexicon::default(),
        };
        let cached = config.storage.data_dir.as_ref().map(|d| d.join("screener.bin"));
        let screener = match (&config.screening.model_path, &cached) {
            (Some(path), _) => load_model(path)?,
            (None, Some(path)) if path.exists() => load_model(path)?,
            (None, _) => {
                let model = bootstrap_screener(config)?;
                if let Some(path) = &cached {
                    std::fs::create_dir_all(path.parent().expect("joined path"))?;
                    save_model(&model, path)?;
                }
                model
            }
        };
        Ok(Self {
            embedder,
            llm,
            screener,
            lexicon,
        })
    }
}

pub fn bootstrap_screener(config: &Config) -> Result<SequenceModel, ServiceError> {
    let b = &config.screening.bootstrap;
    let data = synthetic_corpus(b.corpus_size, b.corpus_seed);
    Ok(train(&data, b.model, &b.train)?.model)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PersistedFlags {
    refit_pending: bool,
}

/// Reviewer decisions as persisted, one per line.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct PersistedReview {
    record_id: String,
    decision: ReviewDecision,
}

#[derive(Debug, Clone, Serialize)]
pub struct ModuleHealth {
    pub ready: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Health {
    pub status: &'static str,
    pub modules: BTreeMap<&'static str, ModuleHealth>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ServiceMetrics {
    pub records: usize,
    pub chunks: usize,
    pub graph_entities: usize,
    pub graph_edges: usize,
    pub topics: usize,
    pub outlier_fraction: Option<f64>,
    pub alerts: usize,
    pub refit_pending: bool,
    pub audit_records: usize,
    pub reviewed: usize,
    pub pending: usize,
    /// Machine PICOS compliance against reviewer decisions.
    pub screening: Option<MetricsReport>,
    pub screening_counts: ConfusionCounts,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub screening_note: Option<String>,
}

/// Outcome of a question: the answer and the audit entry that recorded it.
#[derive(Debug, Clone)]
pub struct QueryOutcome {
    pub answer: GroundedAnswer,
    pub trace: QueryTrace,
    pub audit_seq: u64,
}

pub struct Engine {
    config: Config,
    parts: Parts,
    state: RwLock<Arc<Snapshot>>,
    writer: Mutex<()>,
    audit: Mutex<AuditLog>,
}

fn topic_entity_name(topic: i64) -> String {
    format!("topic {topic}")
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|p| p.into_inner())
}

/// Writes `contents` next to `path` and renames it into place.
fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), ServiceError> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

impl Engine {
    pub fn new(config: Config) -> Result<Self, ServiceError> {
        let parts = Parts::from_config(&config)?;
        Self::with_parts(config, parts)
    }

    /// Opens the engine, restoring any state kept in `storage.data_dir`.
    pub fn with_parts(config: Config, parts: Parts) -> Result<Self, ServiceError> {
        config.validate()?;
        if parts.embedder.dims() != config.embedding_dims() {
            return Err(ServiceError::BadConfig {
                field: "providers.embedding.dims".into(),
                reason: format!("embedder produces {} dims", parts.embedder.dims()),
            });
        }
        let audit = match &config.storage.data_dir {
            Some(dir) => {
                std::fs::create_dir_all(dir)?;
                AuditLog::open(&dir.join("audit.log"), config.storage.audit_max_bytes)?
            }
            None => AuditLog::in_memory(),
        };
        let engine = Self {
            state: RwLock::new(Arc::new(Snapshot::empty(config.embedding_dims())?)),
            writer: Mutex::new(()),
            audit: Mutex::new(audit),
            config,
            parts,
        };
        engine.restore()?;
        Ok(engine)
    }

    pub fn config(&self) -> &Config {
        &self.config
    }

    pub fn parts(&self) -> &Parts {
        &self.parts
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.state.read().unwrap_or_else(|p| p.into_inner()).clone()
    }

    fn data_file(&self, name: &str) -> Option<PathBuf> {
        self.config.storage.data_dir.as_ref().map(|d| d.join(name))
    }

    /// Runs `f` on a private copy and publishes it only when `f` succeeds.
    fn write<T>(&self, f: impl FnOnce(&mut Snapshot) -> Result<T, ServiceError>) -> Result<T, ServiceError> {
        let _guard = lock(&self.writer);
        let mut next = Snapshot::clone(&self.snapshot());
        let out = f(&mut next)?;
        self.persist(&next)?;
        *self.state.write().unwrap_or_else(|p| p.into_inner()) = Arc::new(next);
        Ok(out)
    }

    fn persist(&self, snap: &Snapshot) -> Result<(), ServiceError> {
        let Some(dir) = &self.config.storage.data_dir else {
            return Ok(());
        };
        let tmp = dir.join("corpus.jsonl.tmp");
        snap.corpus.save(&tmp)?;
        std::fs::rename(&tmp, dir.join("corpus.jsonl"))?;
        let topics = dir.join("topics.json");
        match &snap.topics {
            Some(model) => write_atomic(&topics, model.to_json().as_bytes())?,
            None if topics.exists() => std::fs::remove_file(&topics)?,
            None => {}
        }
        let mut reviews = String::new();
        for (id, s) in &snap.screening {
            if let Some(decision) = &s.review {
                let line = PersistedReview {
                    record_id: id.clone(),
                    decision: decision.clone(),
                };
                reviews.push_str(&serde_json::to_string(&line).expect("plain data"));
                reviews.push('\n');
            }
        }
        write_atomic(&dir.join("reviews.jsonl"), reviews.as_bytes())?;
        let flags = PersistedFlags {
            refit_pending: snap.refit_pending,
        };
        write_atomic(&dir.join("flags.json"), serde_json::to_string(&flags).expect("plain data").as_bytes())
    }

    /// Rebuilds derived state by replaying the stored corpus, then reinstates topics and reviews.
    fn restore(&self) -> Result<(), ServiceError> {
        let Some(corpus_path) = self.data_file("corpus.jsonl").filter(|p| p.exists()) else {
            return Ok(());
        };
        let records = Corpus::load(&corpus_path)?.records().to_vec();
        let topics = match self.data_file("topics.json").filter(|p| p.exists()) {
            Some(path) => Some(TopicModel::load(&path)?),
            None => None,
        };
        let reviews: Vec<PersistedReview> = match self.data_file("reviews.jsonl").filter(|p| p.exists()) {
            Some(path) => std::fs::read_to_string(&path)?
                .lines()
                .filter(|l| !l.trim().is_empty())
                .map(|l| serde_json::from_str(l).map_err(|e| ServiceError::BadRequest(format!("reviews.jsonl: {e}"))))
                .collect::<Result<_, _>>()?,
            None => Vec::new(),
        };
        let flags: Option<PersistedFlags> = match self.data_file("flags.json").filter(|p| p.exists()) {
            Some(path) => serde_json::from_str(&std::fs::read_to_string(&path)?).ok(),
            None => None,
        };
        let _guard = lock(&self.writer);
        let mut snap = Snapshot::clone(&self.snapshot());
        self.apply(&mut snap, records)?;
        if let Some(model) = topics {
            self.install(&mut snap, model)?;
        }
        for r in reviews {
            self.apply_review(&mut snap, &r.record_id, r.decision)?;
        }
        snap.refit_pending = flags.is_some_and(|f| f.refit_pending);
        *self.state.write().unwrap_or_else(|p| p.into_inner()) = Arc::new(snap);
        Ok(())
    }

    fn screen(&self, record: &StudyRecord) -> Result<ScreeningResult, ServiceError> {
        let eligibility = evaluate_eligibility(record, &self.config.screening.eligibility)
            .map_err(|e| ServiceError::BadRequest(e.to_string()))?;
        let (picos, picos_note) = match record.abstract_text.as_deref().filter(|a| !a.trim().is_empty()) {
            Some(text) => (
                Some(screen_abstract(text, &self.parts.screener, &self.config.screening.compliance)?),
                None,
            ),
            None => (None, Some("no abstract to tag".to_string())),
        };
        let provider = match self.config.providers.design {
            Backend::Local => DesignProvider::Rules,
            Backend::Llm => DesignProvider::Llm,
        };
        let design = classify_design(record, provider, &self.parts.lexicon, self.parts.llm.as_deref())?;
        Ok(ScreeningResult {
            record_id: record.id.clone(),
            eligibility,
            picos,
            picos_note,
            design,
            design_provider: provider,
            review: None,
        })
    }

    /// Points the study at its topic, or drops the link for outliers.
    fn link_topic(graph: &mut EvidenceGraph, record_id: &str, topic: i64) -> Result<(), ServiceError> {
        let study = graph.find(EntityKind::Study, record_id).expect("study ingested before linking");
        if topic == OUTLIER {
            for to in graph.neighbors(study, Some(Relation::AssignedTopic), Direction::Outgoing)? {
                graph.remove_edge(&EdgeKey {
                    from: study,
                    to,
                    relation: Relation::AssignedTopic,
                });
            }
        } else {
            graph.relink(study, Relation::AssignedTopic, &topic_entity_name(topic))?;
        }
        Ok(())
    }

    /// Refreshes topic terms, labels the topic entities and recomputes alerts.
    fn refresh_topics(&self, snap: &mut Snapshot) -> Result<(), ServiceError> {
        let docs = snap.topic_documents();
        let Some(model) = snap.topics.as_mut() else {
            return Ok(());
        };
        model.refresh(&docs)?;
        for topic in model.clustered().filter(|t| !t.members.is_empty()) {
            let mut props = Properties::new();
            props.insert("topic_id".into(), Value::from(topic.id));
            props.insert("label".into(), Value::String(topic.label.clone()));
            snap.graph.upsert_entity(EntityKind::Topic, &topic_entity_name(topic.id), props)?;
        }
        snap.alerts = redundancy_alerts(model, &docs, &self.config.redundancy);
        Ok(())
    }

    /// Dedupe, embed, screen, assign and link each record, then refresh topics.
    fn apply(&self, snap: &mut Snapshot, records: Vec<StudyRecord>) -> Result<ChangeReport, ServiceError> {
        let mut report = ChangeReport::new();
        let alerts_before: BTreeSet<i64> = snap.alerts.iter().map(|a| a.topic).collect();
        let chunking = self.config.chunking;
        for record in records {
            if let Err(e) = record.validate() {
                report.rejected.push(RejectedRecord {
                    id: record.id.clone(),
                    reason: e.to_string(),
                });
                continue;
            }
            if snap.corpus.find_duplicate(&record).is_some() {
                report.duplicates += 1;
                continue;
            }
            let vector = self.parts.embedder.embed(&record.full_text())?;
            for chunk in chunk_document(&record, chunking.max_tokens, chunking.overlap)? {
                snap.index.add(chunk.chunk_id.clone(), self.parts.embedder.embed(&chunk.text)?)?;
                snap.chunks.insert(chunk.chunk_id.clone(), chunk);
            }
            let screening = self.screen(&record)?;
            if screening.picos.as_ref().is_some_and(|p| p.compliant) {
                report.newly_compliant += 1;
            }
            let study = snap.graph.ingest_record(&record)?;
            snap.graph.relink(study, Relation::HasDesign, screening.design.leaf().as_str())?;
            if let Some(model) = snap.topics.as_mut() {
                let topic = model.assign(&vector)?;
                model.set_assignment(record.id.clone(), topic);
                *report.topic_deltas.entry(topic).or_insert(0) += 1;
                Self::link_topic(&mut snap.graph, &record.id, topic)?;
            }
            snap.screening.insert(record.id.clone(), screening);
            snap.vectors.insert(record.id.clone(), vector);
            snap.corpus.insert(record)?;
            report.ingested += 1;
        }
        if report.ingested > 0 {
            self.refresh_topics(snap)?;
        }
        report.new_alerts = snap.alerts.iter().filter(|a| !alerts_before.contains(&a.topic)).cloned().collect();
        if let Some(model) = &snap.topics {
            report.outlier_fraction = model.outlier_fraction();
            report.refit_triggered = report.ingested > 0 && report.outlier_fraction > self.config.living.refit_outlier_fraction;
            snap.refit_pending |= report.refit_triggered;
        }
        Ok(report)
    }

    /// Adopts `model`'s centroids and assigns every record to its nearest one.
    fn install(&self, snap: &mut Snapshot, mut model: TopicModel) -> Result<(), ServiceError> {
        model.assignments.clear();
        for r in snap.corpus.records() {
            let topic = model.assign(&snap.vectors[&r.id])?;
            model.set_assignment(r.id.clone(), topic);
            Self::link_topic(&mut snap.graph, &r.id, topic)?;
        }
        let stale: Vec<_> = snap
            .graph
            .entities()
            .filter(|e| e.kind == EntityKind::Topic)
            .map(|e| e.id)
            .filter(|&id| snap.graph.neighbors(id, None, Direction::Both).is_ok_and(|n| n.is_empty()))
            .collect();
        for id in stale {
            snap.graph.remove_entity(id)?;
        }
        snap.topics = Some(model);
        snap.refit_pending = false;
        self.refresh_topics(snap)
    }

    /// Bulk load. Records get topics only when a model is already fitted.
    pub fn ingest(&self, records: Vec<StudyRecord>) -> Result<ChangeReport, ServiceError> {
        self.write(|snap| self.apply(snap, records))
    }

    /// Incremental update of a fitted review.
    pub fn living_update(&self, delta: Vec<StudyRecord>) -> Result<ChangeReport, ServiceError> {
        self.write(|snap| {
            snap.topic_model()?;
            self.apply(snap, delta)
        })
    }

    /// Fits topics on the whole corpus and reassigns every record by nearest centroid.
    pub fn fit(&self) -> Result<FitReport, ServiceError> {
        self.write(|snap| {
            let docs = snap.topic_documents();
            let model = fit_topics(&docs, &self.config.topics)?;
            self.install(snap, model)?;
            let model = snap.topic_model()?;
            Ok(FitReport {
                documents: docs.len(),
                topics: model.clustered().count(),
                outlier_fraction: model.outlier_fraction(),
                alerts: snap.alerts.len(),
            })
        })
    }

    /// Installs a previously fitted model, as a full rebuild would.
    pub fn install_topics(&self, model: TopicModel) -> Result<(), ServiceError> {
        self.write(|snap| self.install(snap, model))
    }

    fn apply_review(&self, snap: &mut Snapshot, record_id: &str, decision: ReviewDecision) -> Result<(), ServiceError> {
        let entry = snap.screening.get_mut(record_id).ok_or_else(|| ServiceError::NotFound {
            what: "record",
            id: record_id.into(),
        })?;
        entry.review = Some(decision);
        let design = entry.effective_design();
        let study = snap.graph.find(EntityKind::Study, record_id).expect("screened records are in the graph");
        snap.graph.relink(study, Relation::HasDesign, design.as_str())?;
        Ok(())
    }

    /// Records a reviewer decision on a pending item. Each accepted call adds one audit record.
    pub fn decide(&self, record_id: &str, request: DecisionRequest) -> Result<ScreeningResult, ServiceError> {
        if request.reviewer.trim().is_empty() {
            return Err(ServiceError::BadRequest("reviewer is required".into()));
        }
        match (request.decision, &request.override_payload) {
            (ReviewStatus::Pending, _) => return Err(ServiceError::BadRequest("decision must be accepted or overridden".into())),
            (ReviewStatus::Overridden, None) => return Err(ServiceError::BadRequest("overridden requires an override payload".into())),
            (ReviewStatus::Accepted, Some(_)) => return Err(ServiceError::BadRequest("accepted takes no override payload".into())),
            _ => {}
        }
        self.write(|snap| {
            let current = snap.screening.get(record_id).ok_or_else(|| ServiceError::NotFound {
                what: "record",
                id: record_id.into(),
            })?;
            if current.review.is_some() {
                return Err(ServiceError::Conflict(format!("record {record_id:?} already decided")));
            }
            let action = ReviewAction {
                record_id: record_id.into(),
                decision: match request.decision {
                    ReviewStatus::Accepted => "accepted",
                    _ => "overridden",
                }
                .into(),
                reviewer: Some(request.reviewer.clone()),
                payload: serde_json::to_value(&request.override_payload).expect("plain data"),
            };
            let seq = lock(&self.audit).append(AuditEvent::Review(action))?.seq;
            let decision = ReviewDecision {
                status: request.decision,
                reviewer: request.reviewer.clone(),
                decided_at: Utc::now(),
                override_payload: request.override_payload.clone(),
                audit_seq: seq,
            };
            self.apply_review(snap, record_id, decision)?;
            Ok(snap.screening[record_id].clone())
        })
    }

    pub fn providers_for(&self) -> (Option<Box<dyn RouteProvider + '_>>, Box<dyn Grader + '_>, Box<dyn Synthesizer + '_>) {
        let llm = self.parts.llm.as_deref();
        let router: Option<Box<dyn RouteProvider>> = match (self.config.providers.router, llm) {
            (Backend::Llm, Some(model)) => Some(Box::new(LlmRouter { model })),
            _ => None,
        };
        let grader: Box<dyn Grader> = match (self.config.providers.grader, llm) {
            (Backend::Llm, Some(model)) => Box::new(LlmGrader { model }),
            _ => Box::new(OverlapGrader {
                threshold: self.config.retrieval.relevance_threshold,
            }),
        };
        let synthesizer: Box<dyn Synthesizer> = match (self.config.providers.synthesizer, llm) {
            (Backend::Llm, Some(model)) => Box::new(LlmSynthesizer { model }),
            _ => Box::new(ExtractiveSynthesizer),
        };
        (router, grader, synthesizer)
    }

    /// Answers against the current snapshot and logs the trace, including failed attempts.
    pub fn query(&self, question: &str) -> Result<QueryOutcome, ServiceError> {
        let snap = self.snapshot();
        let backends = Backends {
            embedder: self.parts.embedder.as_ref(),
            index: &snap.index,
            chunks: &snap.chunks,
            corpus: &snap.corpus,
            graph: &snap.graph,
        };
        let (router, grader, synthesizer) = self.providers_for();
        let providers = Providers {
            router: router.as_deref(),
            grader: grader.as_ref(),
            synthesizer: synthesizer.as_ref(),
        };
        match answer(question, &backends, &providers, &self.config.retrieval.answer) {
            Ok((answer, trace)) => {
                let audit_seq = lock(&self.audit).log_interaction(trace.clone())?.seq;
                Ok(QueryOutcome { answer, trace, audit_seq })
            }
            Err(RagError::BackendDown { reason, trace: Some(trace) }) => {
                lock(&self.audit).log_interaction((*trace).clone())?;
                Err(RagError::BackendDown {
                    reason,
                    trace: Some(trace),
                }
                .into())
            }
            Err(e) => Err(e.into()),
        }
    }

    pub fn audit_records(&self, since: u64) -> Vec<AuditRecord> {
        lock(&self.audit).records().iter().filter(|r| r.seq >= since).cloned().collect()
    }

    pub fn health(&self) -> Health {
        let snap = self.snapshot();
        let audit = lock(&self.audit);
        let ready = |detail: String| ModuleHealth { ready: true, detail };
        let mut modules = BTreeMap::new();
        modules.insert("corpus", ready(format!("{} records", snap.corpus.len())));
        modules.insert("embedkit", ready(format!("{} ({} dims)", self.parts.embedder.provider_id(), self.parts.embedder.dims())));
        modules.insert(
            "screener",
            ready(format!("{} tokens in vocabulary", self.parts.screener.vocab.len())),
        );
        modules.insert("designclf", ready(format!("{} design rules", self.parts.lexicon.designs.len())));
        modules.insert(
            "topicmill",
            ready(match &snap.topics {
                Some(m) => format!("{} topics", m.clustered().count()),
                None => "no model fitted".into(),
            }),
        );
        modules.insert("graphcore", ready(format!("{} entities, {} edges", snap.graph.entity_count(), snap.graph.edge_count())));
        modules.insert("ragflow", ready(format!("{} audit records", audit.records().len())));
        modules.insert("evalkit", ready("ok".into()));
        Health { status: "ok", modules }
    }

    pub fn metrics(&self) -> ServiceMetrics {
        let snap = self.snapshot();
        let pairs: Vec<(bool, bool)> = snap
            .screening
            .values()
            .filter_map(|s| {
                let machine = s.picos.as_ref()?.compliant;
                let review = s.review.as_ref()?;
                let human = review.override_payload.as_ref().and_then(|o| o.compliant).unwrap_or(machine);
                Some((machine, human))
            })
            .collect();
        let counts = ConfusionCounts::from_pairs(pairs);
        let (screening, screening_note) = match derive_metrics(counts) {
            Ok(m) => (Some(m), None),
            Err(e) => (None, Some(e.to_string())),
        };
        let reviewed = snap.screening.values().filter(|s| s.review.is_some()).count();
        ServiceMetrics {
            records: snap.corpus.len(),
            chunks: snap.chunks.len(),
            graph_entities: snap.graph.entity_count(),
            graph_edges: snap.graph.edge_count(),
            topics: snap.topics.as_ref().map_or(0, |m| m.clustered().count()),
            outlier_fraction: snap.topics.as_ref().map(TopicModel::outlier_fraction),
            alerts: snap.alerts.len(),
            refit_pending: snap.refit_pending,
            audit_records: lock(&self.audit).records().len(),
            reviewed,
            pending: snap.screening.len() - reviewed,
            screening,
            screening_counts: counts,
            screening_note,
        }
    }
}

/// Canonical graph contents keyed by entity kind and name, independent of id assignment order.
pub fn graph_signature(graph: &EvidenceGraph) -> Vec<String> {
    let key = |id| {
        let e = graph.entity(id).expect("edge endpoints exist");
        format!("{}:{}", e.kind, e.name)
    };
    let mut lines: Vec<String> = graph
        .entities()
        .map(|e| format!("entity {}:{} {}", e.kind, e.name, serde_json::to_string(&e.properties).expect("plain data")))
        .chain(graph.edges().map(|(k, props)| {
            format!(
                "edge {} -{}-> {} {}",
                key(k.from),
                k.relation,
                key(k.to),
                serde_json::to_string(props).expect("plain data")
            )
        }))
        .collect();
    lines.sort();
    lines
}
