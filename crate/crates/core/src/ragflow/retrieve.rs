use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{overlap_ratio, RagError, Route};
use crate::corpus::Corpus;
use crate::embedkit::{Chunk, EmbedError, Embedder, VectorIndex};
use crate::graphcore::{Direction, EntityKind, EvidenceGraph};
use crate::text::{contains_phrase, word_tokens};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvidenceOrigin {
    Vector,
    Graph,
    Structured,
}

/// One retrieved passage. `text` is the stored chunk text; `context` carries backend-specific
/// extras (matched graph links, filters) that are graded but never quoted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceItem {
    pub record_id: String,
    pub chunk_id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context: Option<String>,
    pub score: f64,
    pub origin: EvidenceOrigin,
}

impl EvidenceItem {
    pub fn graded_text(&self) -> String {
        match &self.context {
            Some(c) => format!("{} {}", self.text, c),
            None => self.text.clone(),
        }
    }
}

pub trait Retriever {
    /// Up to `k` items for the route, best first.
    fn retrieve(&self, route: Route, query: &str, k: usize) -> Result<Vec<EvidenceItem>, RagError>;
    fn chunk(&self, chunk_id: &str) -> Option<&Chunk>;
}

/// Live stores: vector index over chunks, property graph and the record corpus.
pub struct Backends<'a> {
    pub embedder: &'a dyn Embedder,
    pub index: &'a VectorIndex,
    pub chunks: &'a BTreeMap<String, Chunk>,
    pub corpus: &'a Corpus,
    pub graph: &'a EvidenceGraph,
}

const LINKED_KINDS: [EntityKind; 6] = [
    EntityKind::Intervention,
    EntityKind::Outcome,
    EntityKind::Author,
    EntityKind::Venue,
    EntityKind::Topic,
    EntityKind::Design,
];

/// Four-digit years 1900..=2100 mentioned in the query.
fn query_years(tokens: &[String]) -> BTreeSet<i32> {
    tokens
        .iter()
        .filter(|t| t.len() == 4)
        .filter_map(|t| t.parse::<i32>().ok())
        .filter(|y| (1900..=2100).contains(y))
        .collect()
}

impl Backends<'_> {
    fn lead_chunk(&self, record_id: &str) -> Option<&Chunk> {
        self.chunks.get(&Chunk::make_id(record_id, 0))
    }

    fn vector(&self, query: &str, k: usize) -> Result<Vec<EvidenceItem>, RagError> {
        let q = self.embedder.embed(query).map_err(|e| RagError::backend(format!("embedding failed: {e}")))?;
        let hits = match self.index.search(&q, k) {
            Ok(h) => h,
            Err(EmbedError::EmptyIndex | EmbedError::DegenerateQuery) => return Ok(Vec::new()),
            Err(e) => return Err(RagError::backend(format!("vector search failed: {e}"))),
        };
        Ok(hits
            .into_iter()
            .filter_map(|h| {
                let chunk = self.chunks.get(&h.chunk_id)?;
                Some(EvidenceItem {
                    record_id: chunk.record_id.clone(),
                    chunk_id: chunk.chunk_id.clone(),
                    text: chunk.text.clone(),
                    context: None,
                    score: h.score,
                    origin: EvidenceOrigin::Vector,
                })
            })
            .collect())
    }

    /// Studies linked to entities whose names appear in the query, ranked by how many matched.
    fn graph(&self, query: &str, k: usize) -> Result<Vec<EvidenceItem>, RagError> {
        let tokens = word_tokens(query);
        let mut hits: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for entity in self.graph.entities().filter(|e| LINKED_KINDS.contains(&e.kind)) {
            if !contains_phrase(&tokens, &word_tokens(&entity.name)) {
                continue;
            }
            let studies = self
                .graph
                .neighbors(entity.id, None, Direction::Incoming)
                .map_err(|e| RagError::backend(e.to_string()))?;
            for s in studies {
                let study = self.graph.entity(s).expect("neighbor exists");
                hits.entry(study.name.clone())
                    .or_default()
                    .push(format!("{} {}", entity.kind, entity.name));
            }
        }
        let mut ranked: Vec<(String, Vec<String>)> = hits.into_iter().collect();
        ranked.sort_by(|a, b| b.1.len().cmp(&a.1.len()).then_with(|| a.0.cmp(&b.0)));
        Ok(ranked
            .into_iter()
            .filter_map(|(record_id, links)| {
                let chunk = self.lead_chunk(&record_id)?;
                Some(EvidenceItem {
                    record_id,
                    chunk_id: chunk.chunk_id.clone(),
                    text: chunk.text.clone(),
                    score: links.len() as f64,
                    context: Some(format!("linked: {}", links.join(", "))),
                    origin: EvidenceOrigin::Graph,
                })
            })
            .take(k)
            .collect())
    }

    /// Records filtered by the years named in the query, ranked by lexical overlap.
    fn structured(&self, query: &str, k: usize) -> Vec<EvidenceItem> {
        let years = query_years(&word_tokens(query));
        let mut rows: Vec<(f64, &str)> = self
            .corpus
            .records()
            .iter()
            .filter(|r| years.is_empty() || r.year.is_some_and(|y| years.contains(&y)))
            .map(|r| (overlap_ratio(query, &r.full_text()), r.id.as_str()))
            .collect();
        rows.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
        let filter = if years.is_empty() {
            "all years".to_string()
        } else {
            format!("years {}", years.iter().map(i32::to_string).collect::<Vec<_>>().join(", "))
        };
        rows.into_iter()
            .filter_map(|(score, id)| {
                let chunk = self.lead_chunk(id)?;
                let record = self.corpus.get(id)?;
                let year = record.year.map_or("undated".to_string(), |y| y.to_string());
                Some(EvidenceItem {
                    record_id: id.to_string(),
                    chunk_id: chunk.chunk_id.clone(),
                    text: chunk.text.clone(),
                    context: Some(format!("published {year}; filter {filter}")),
                    score,
                    origin: EvidenceOrigin::Structured,
                })
            })
            .take(k)
            .collect()
    }
}

impl Retriever for Backends<'_> {
    fn retrieve(&self, route: Route, query: &str, k: usize) -> Result<Vec<EvidenceItem>, RagError> {
        match route {
            Route::Vector => self.vector(query, k),
            Route::Graph => self.graph(query, k),
            Route::Structured => Ok(self.structured(query, k)),
            Route::Hybrid => {
                let mut items = self.vector(query, k)?;
                let seen: BTreeSet<String> = items.iter().map(|i| i.chunk_id.clone()).collect();
                items.extend(self.graph(query, k)?.into_iter().filter(|i| !seen.contains(&i.chunk_id)));
                Ok(items)
            }
        }
    }

    fn chunk(&self, chunk_id: &str) -> Option<&Chunk> {
        self.chunks.get(chunk_id)
    }
}
