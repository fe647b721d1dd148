use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{TopicDocument, TopicModel};
use crate::embedkit::cosine;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RedundancyConfig {
    /// Minimum mean pairwise cosine similarity among members.
    pub min_similarity: f64,
    /// Minimum members published inside the trailing window.
    pub min_recent: u64,
    pub window_years: i32,
    /// Last year of the window; the latest dated record when unset.
    pub reference_year: Option<i32>,
}

impl Default for RedundancyConfig {
    fn default() -> Self {
        Self {
            min_similarity: 0.8,
            min_recent: 5,
            window_years: 3,
            reference_year: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RedundancyAlert {
    pub topic: i64,
    pub label: String,
    pub mean_similarity: f64,
    pub recent_members: u64,
    pub member_count: usize,
    /// Inclusive year span checked for recency.
    pub window: (i32, i32),
    pub rule: String,
}

fn mean_pairwise(vectors: &[&[f64]]) -> Option<f64> {
    let n = vectors.len();
    if n < 2 {
        return None;
    }
    let mut sum = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            sum += cosine(vectors[i], vectors[j]);
        }
    }
    Some(sum / (n * (n - 1) / 2) as f64)
}

/// Flags clustered topics that are both tight and still growing. Members missing from `docs`
/// are skipped.
pub fn redundancy_alerts(model: &TopicModel, docs: &[TopicDocument], config: &RedundancyConfig) -> Vec<RedundancyAlert> {
    let by_id: HashMap<&str, &TopicDocument> = docs.iter().map(|d| (d.id.as_str(), d)).collect();
    let reference = config
        .reference_year
        .or_else(|| model.topics.iter().filter_map(|t| t.year_counts.keys().next_back().copied()).max());
    let Some(end) = reference else {
        return Vec::new();
    };
    let start = end - config.window_years.max(1) + 1;
    let mut alerts = Vec::new();
    for topic in model.clustered() {
        let members: Vec<&TopicDocument> = topic.members.iter().filter_map(|m| by_id.get(m.as_str()).copied()).collect();
        let vectors: Vec<&[f64]> = members.iter().map(|d| d.vector.values()).collect();
        let Some(similarity) = mean_pairwise(&vectors) else {
            continue;
        };
        let recent = members
            .iter()
            .filter(|d| d.year.is_some_and(|y| (start..=end).contains(&y)))
            .count() as u64;
        if similarity >= config.min_similarity && recent >= config.min_recent {
            alerts.push(RedundancyAlert {
                topic: topic.id,
                label: topic.label.clone(),
                mean_similarity: similarity,
                recent_members: recent,
                member_count: members.len(),
                window: (start, end),
                rule: format!(
                    "mean similarity {similarity:.3} >= {} and {recent} members in {start}-{end} >= {}",
                    config.min_similarity, config.min_recent
                ),
            });
        }
    }
    alerts
}
