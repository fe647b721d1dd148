use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;

use evidesk_core::corpus::{dedupe, parse_records, records_to_jsonl, Corpus, SourceFormat, StudyRecord};
use evidesk_core::designclf::{read_validation, replay};
use evidesk_core::embedkit::{chunk_document, Chunk, Embedder, HashedLocalEmbedder, VectorIndex};
use evidesk_core::evalkit::{derive_metrics, ConfusionCounts};
use evidesk_core::graphcore::{Direction, EntityKind, EvidenceGraph, Relation};
use evidesk_core::ragflow::{answer, AnswerConfig, Backends, ExtractiveSynthesizer, OverlapGrader, Providers};
use evidesk_core::topicmill::{fit_topics, TopicDocument, TopicModel, TopicParams, OUTLIER};

const THEMES: [(&str, &str, &str); 3] = [
    ("tai chi", "falls", "older adults with balance problems and fall risk"),
    ("metformin", "hba1c", "adults with type 2 diabetes and raised glucose"),
    ("mindfulness", "depressive symptoms", "adults with depression and low mood"),
];

fn records() -> Vec<StudyRecord> {
    (0..30)
        .map(|i| {
            let (intervention, outcome, population) = THEMES[i % 3];
            let mut r = StudyRecord::new(
                format!("s{i:02}"),
                format!("{intervention} for {population}: randomized trial number {i}"),
            )
            .with_abstract(format!(
                "We randomized {} {population} to {intervention} or usual care. {intervention} improved {outcome} at follow up.",
                40 + i
            ))
            .with_year(2015 + (i % 6) as i32);
            r.interventions = Some(vec![intervention.into()]);
            r.outcomes = Some(vec![outcome.into()]);
            r
        })
        .collect()
}

struct Stores {
    corpus: Corpus,
    index: VectorIndex,
    chunks: BTreeMap<String, Chunk>,
    graph: EvidenceGraph,
    docs: Vec<TopicDocument>,
}

fn build(records: Vec<StudyRecord>, embedder: &HashedLocalEmbedder) -> Stores {
    let mut s = Stores {
        corpus: Corpus::new(),
        index: VectorIndex::new(embedder.dims()).unwrap(),
        chunks: BTreeMap::new(),
        graph: EvidenceGraph::new(),
        docs: Vec::new(),
    };
    for r in records {
        for c in chunk_document(&r, 32, 8).unwrap() {
            s.index.add(c.chunk_id.clone(), embedder.embed(&c.text).unwrap()).unwrap();
            s.chunks.insert(c.chunk_id.clone(), c);
        }
        s.graph.ingest_record(&r).unwrap();
        s.docs.push(TopicDocument {
            id: r.id.clone(),
            vector: embedder.embed(&r.full_text()).unwrap(),
            text: r.full_text(),
            year: r.year,
        });
        s.corpus.insert(r).unwrap();
    }
    s
}

/// The three themes separate cleanly at this cutoff.
fn topic_params() -> TopicParams {
    TopicParams {
        min_cluster_size: 3,
        max_distance: 0.3,
        ..TopicParams::default()
    }
}

#[test]
fn ingest_to_grounded_answer() {
    let mut batch = records();
    let mut copy = batch[4].clone();
    copy.id = "dup".into();
    batch.push(copy);
    let parsed = parse_records(records_to_jsonl(&batch).as_bytes(), SourceFormat::Jsonl).unwrap();
    assert!(parsed.rejects.is_empty());
    let outcome = dedupe(parsed.records);
    assert_eq!(outcome.kept.len(), 30);
    assert_eq!(outcome.duplicates.len(), 1);

    let embedder = HashedLocalEmbedder::new(128).unwrap();
    let stores = build(outcome.kept, &embedder);
    let model = fit_topics(&stores.docs, &topic_params()).unwrap();
    assert_eq!(model.assignments.len(), 30);
    assert_eq!(model.clustered().count(), 3);

    let backends = Backends {
        embedder: &embedder,
        index: &stores.index,
        chunks: &stores.chunks,
        corpus: &stores.corpus,
        graph: &stores.graph,
    };
    let grader = OverlapGrader::default();
    let providers = Providers {
        router: None,
        grader: &grader,
        synthesizer: &ExtractiveSynthesizer,
    };
    let config = AnswerConfig::default();

    let (reply, trace) = answer("does tai chi reduce falls", &backends, &providers, &config).unwrap();
    assert!(!reply.insufficient);
    assert!(trace.is_grounded(&config));
    for c in &reply.citations {
        let record = stores.corpus.get(&c.record_id).unwrap();
        assert!(record.interventions.as_ref().unwrap().contains(&"tai chi".to_string()), "{c:?}");
        assert!(stores.chunks[&c.chunk_id].text.contains(&c.quote));
    }

    let (reply, trace) = answer("volcanic basalt erosion", &backends, &providers, &config).unwrap();
    assert!(reply.insufficient);
    assert!(reply.citations.is_empty());
    assert_eq!(trace.attempts.len(), config.max_retries + 1);
}

#[test]
fn graph_links_every_study_to_its_entities() {
    let embedder = HashedLocalEmbedder::new(64).unwrap();
    let stores = build(records(), &embedder);
    let tai_chi = stores.graph.find(EntityKind::Intervention, "tai chi").unwrap();
    let studies = stores.graph.neighbors(tai_chi, Some(Relation::Evaluates), Direction::Incoming).unwrap();
    assert_eq!(studies.len(), 10);
    let pairs = stores.graph.co_occurrence(EntityKind::Intervention, EntityKind::Outcome);
    assert_eq!(pairs.len(), 3);
    assert!(pairs.iter().all(|p| p.studies == 10));

    let mut buf = Vec::new();
    stores.graph.write_jsonl(&mut buf).unwrap();
    let back = EvidenceGraph::read_jsonl(buf.as_slice()).unwrap();
    assert_eq!(back.stats(), stores.graph.stats());
    assert_eq!(back.entities().count(), stores.graph.entities().count());
}

#[test]
fn topic_model_survives_disk_and_reassigns_the_same() {
    let embedder = HashedLocalEmbedder::new(128).unwrap();
    let stores = build(records(), &embedder);
    let model = fit_topics(&stores.docs, &topic_params()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("topics.json");
    model.save(&path).unwrap();
    let loaded = TopicModel::load(&path).unwrap();
    assert_eq!(loaded, model);
    for doc in &stores.docs {
        let topic = loaded.assign(&doc.vector).unwrap();
        assert_eq!(topic, model.assignments[&doc.id]);
        assert_ne!(topic, OUTLIER);
    }
}

#[test]
fn design_fixture_replays_to_the_reported_table() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/design_validation.jsonl");
    let entries = read_validation(BufReader::new(File::open(path).unwrap())).unwrap();
    assert_eq!(entries.len(), 164);
    let counts = replay(&entries);
    assert_eq!(counts, ConfusionCounts::new(74, 7, 83, 0));
    let m = derive_metrics(counts).unwrap();
    assert!((m.accuracy.unwrap() - 157.0 / 164.0).abs() < 1e-12);
}
