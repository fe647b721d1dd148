//! Embedding clusters, class-based term weights, topic labels, year trends and redundancy alerts.

mod alerts;
mod cluster;
mod ctfidf;
mod trends;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedkit::EmbeddingVector;

pub use alerts::{redundancy_alerts, RedundancyAlert, RedundancyConfig};
pub use cluster::{cluster, Clustering};
pub use ctfidf::{ctfidf, label_topic, parse_label, term_counts, TermCounts, TermWeight};
pub use trends::{trends, word_cloud, TopicTrends, WordCloudEntry};

pub const OUTLIER: i64 = -1;

#[derive(Debug, Error)]
pub enum TopicError {
    #[error("need at least {needed} documents, got {got}")]
    TooFewDocuments { needed: usize, got: usize },
    #[error("topic {0} has no terms")]
    EmptyTopic(i64),
    #[error("vector has {actual} dims, model expects {expected}")]
    DimsMismatch { expected: usize, actual: usize },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("corrupt topic model: {0}")]
    Corrupt(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TopicParams {
    pub min_cluster_size: usize,
    /// Largest cosine distance at which a document still joins a centroid.
    pub max_distance: f64,
    pub max_iterations: usize,
    pub seed: u64,
    pub top_terms: usize,
    pub max_ngram: usize,
}

impl Default for TopicParams {
    fn default() -> Self {
        Self {
            min_cluster_size: 5,
            max_distance: 0.7,
            max_iterations: 50,
            seed: 42,
            top_terms: 10,
            max_ngram: 1,
        }
    }
}

impl TopicParams {
    pub fn validate(&self) -> Result<(), TopicError> {
        if self.min_cluster_size == 0 {
            return Err(TopicError::InvalidParams("min_cluster_size must be at least 1".into()));
        }
        if !(0.0..=2.0).contains(&self.max_distance) {
            return Err(TopicError::InvalidParams("max_distance must lie in [0, 2]".into()));
        }
        if self.top_terms == 0 || self.max_ngram == 0 {
            return Err(TopicError::InvalidParams("top_terms and max_ngram must be positive".into()));
        }
        Ok(())
    }
}

/// Input to fitting and refreshing: one embedded record.
#[derive(Debug, Clone)]
pub struct TopicDocument {
    pub id: String,
    pub vector: EmbeddingVector,
    pub text: String,
    pub year: Option<i32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topic {
    pub id: i64,
    pub label: String,
    pub terms: Vec<TermWeight>,
    pub members: Vec<String>,
    pub year_counts: BTreeMap<i32, u64>,
    pub undated: u64,
    /// Unit centroid; absent for the outlier topic.
    pub centroid: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicModel {
    pub params: TopicParams,
    pub dims: usize,
    /// Clustered topics in id order, followed by the outlier topic when it has members.
    pub topics: Vec<Topic>,
    pub assignments: BTreeMap<String, i64>,
}

pub fn fit_topics(docs: &[TopicDocument], params: &TopicParams) -> Result<TopicModel, TopicError> {
    params.validate()?;
    if docs.len() < params.min_cluster_size || docs.is_empty() {
        return Err(TopicError::TooFewDocuments {
            needed: params.min_cluster_size.max(1),
            got: docs.len(),
        });
    }
    let dims = docs[0].vector.dims();
    if let Some(bad) = docs.iter().find(|d| d.vector.dims() != dims) {
        return Err(TopicError::DimsMismatch {
            expected: dims,
            actual: bad.vector.dims(),
        });
    }
    let vectors: Vec<&[f64]> = docs.iter().map(|d| d.vector.values()).collect();
    let clustering = cluster(
        &vectors,
        dims,
        params.min_cluster_size,
        params.max_distance,
        params.max_iterations,
        params.seed,
    );
    let topics = clustering
        .centroids
        .into_iter()
        .enumerate()
        .map(|(i, c)| Topic::empty(i as i64, Some(c)))
        .collect();
    let assignments = docs
        .iter()
        .zip(&clustering.labels)
        .map(|(d, l)| (d.id.clone(), l.map_or(OUTLIER, |c| c as i64)))
        .collect();
    let mut model = TopicModel {
        params: *params,
        dims,
        topics,
        assignments,
    };
    model.refresh(docs)?;
    Ok(model)
}

impl Topic {
    fn empty(id: i64, centroid: Option<Vec<f64>>) -> Self {
        Self {
            id,
            label: id.to_string(),
            terms: Vec::new(),
            members: Vec::new(),
            year_counts: BTreeMap::new(),
            undated: 0,
            centroid,
        }
    }
}

impl TopicModel {
    pub fn topic(&self, id: i64) -> Option<&Topic> {
        self.topics.iter().find(|t| t.id == id)
    }

    /// Clustered topics only.
    pub fn clustered(&self) -> impl Iterator<Item = &Topic> {
        self.topics.iter().filter(|t| t.id != OUTLIER)
    }

    /// Nearest centroid within the distance cutoff, otherwise the outlier id.
    pub fn assign(&self, vector: &EmbeddingVector) -> Result<i64, TopicError> {
        if vector.dims() != self.dims {
            return Err(TopicError::DimsMismatch {
                expected: self.dims,
                actual: vector.dims(),
            });
        }
        let centroids: Vec<Vec<f64>> = self.clustered().filter_map(|t| t.centroid.clone()).collect();
        Ok(cluster::nearest(&centroids, vector.values())
            .filter(|&(_, d)| d <= self.params.max_distance)
            .map_or(OUTLIER, |(i, _)| self.clustered().nth(i).map_or(OUTLIER, |t| t.id)))
    }

    /// Records `id` as belonging to `topic` without touching terms or counts; call
    /// [`TopicModel::refresh`] afterwards.
    pub fn set_assignment(&mut self, id: impl Into<String>, topic: i64) {
        self.assignments.insert(id.into(), topic);
    }

    pub fn remove_assignment(&mut self, id: &str) -> Option<i64> {
        self.assignments.remove(id)
    }

    pub fn outlier_fraction(&self) -> f64 {
        if self.assignments.is_empty() {
            return 0.0;
        }
        let outliers = self.assignments.values().filter(|&&t| t == OUTLIER).count();
        outliers as f64 / self.assignments.len() as f64
    }

    /// Rebuilds members, year tallies, term weights and labels from the assignment map. Documents
    /// without an assignment are ignored.
    pub fn refresh(&mut self, docs: &[TopicDocument]) -> Result<(), TopicError> {
        let mut by_topic: BTreeMap<i64, Vec<&TopicDocument>> = BTreeMap::new();
        for d in docs {
            if let Some(&t) = self.assignments.get(&d.id) {
                by_topic.entry(t).or_default().push(d);
            }
        }
        self.topics.retain(|t| t.id != OUTLIER);
        if by_topic.contains_key(&OUTLIER) {
            self.topics.push(Topic::empty(OUTLIER, None));
        }
        let mut classes: BTreeMap<i64, TermCounts> = BTreeMap::new();
        for topic in &mut self.topics {
            let members = by_topic.get(&topic.id).map(Vec::as_slice).unwrap_or(&[]);
            let mut ids: Vec<String> = members.iter().map(|d| d.id.clone()).collect();
            ids.sort();
            topic.members = ids;
            topic.year_counts.clear();
            topic.undated = 0;
            let mut counts = TermCounts::new();
            for d in members {
                match d.year {
                    Some(y) => *topic.year_counts.entry(y).or_insert(0) += 1,
                    None => topic.undated += 1,
                }
                for (term, n) in term_counts(&d.text, self.params.max_ngram) {
                    *counts.entry(term).or_insert(0) += n;
                }
            }
            if !counts.is_empty() {
                classes.insert(topic.id, counts);
            }
        }
        let weights = ctfidf(&classes, self.params.top_terms)?;
        for topic in &mut self.topics {
            topic.terms = weights.get(&topic.id).cloned().unwrap_or_default();
            let top: Vec<String> = topic.terms.iter().map(|t| t.term.clone()).collect();
            topic.label = label_topic(topic.id, &top);
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data")
    }

    pub fn from_json(text: &str) -> Result<Self, TopicError> {
        let model: Self = serde_json::from_str(text).map_err(|e| TopicError::Corrupt(e.to_string()))?;
        for t in model.clustered() {
            match &t.centroid {
                Some(c) if c.len() == model.dims => {}
                _ => return Err(TopicError::Corrupt(format!("topic {} centroid", t.id))),
            }
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<(), TopicError> {
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, self.to_json())?;
        fs::rename(tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, TopicError> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}
