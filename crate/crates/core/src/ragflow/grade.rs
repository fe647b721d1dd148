use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::RagError;
use crate::provider::LanguageModel;
use crate::text::{content_tokens, word_tokens};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grade {
    Relevant,
    Irrelevant,
}

pub trait Grader: Send + Sync {
    fn grade(&self, query: &str, evidence: &str) -> Result<Grade, RagError>;
    fn provider_id(&self) -> String;
}

/// Fraction of the query's distinct content tokens that also occur in `evidence`. Zero when the
/// query has no content tokens.
pub fn overlap_ratio(query: &str, evidence: &str) -> f64 {
    let q: BTreeSet<String> = content_tokens(query).into_iter().collect();
    if q.is_empty() {
        return 0.0;
    }
    let e: BTreeSet<String> = content_tokens(evidence).into_iter().collect();
    q.intersection(&e).count() as f64 / q.len() as f64
}

/// Deterministic grader: relevant when [`overlap_ratio`] reaches `threshold`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverlapGrader {
    pub threshold: f64,
}

impl Default for OverlapGrader {
    fn default() -> Self {
        Self { threshold: 0.2 }
    }
}

impl Grader for OverlapGrader {
    fn grade(&self, query: &str, evidence: &str) -> Result<Grade, RagError> {
        Ok(if overlap_ratio(query, evidence) >= self.threshold {
            Grade::Relevant
        } else {
            Grade::Irrelevant
        })
    }

    fn provider_id(&self) -> String {
        format!("overlap:{}", self.threshold)
    }
}

pub struct LlmGrader<'a> {
    pub model: &'a dyn LanguageModel,
}

impl Grader for LlmGrader<'_> {
    fn grade(&self, query: &str, evidence: &str) -> Result<Grade, RagError> {
        let prompt = format!(
            "Does the evidence help answer the question? Reply with one word: relevant or irrelevant.\n\
             Question: {query}\nEvidence: {evidence}\n"
        );
        let reply = self
            .model
            .complete(&prompt)
            .map_err(|e| RagError::GraderUnavailable(e.to_string()))?;
        match word_tokens(&reply).first().map(String::as_str) {
            Some("relevant") | Some("yes") => Ok(Grade::Relevant),
            Some("irrelevant") | Some("no") | Some("not") => Ok(Grade::Irrelevant),
            _ => Err(RagError::GraderUnavailable(format!("unrecognized grade reply {reply:?}"))),
        }
    }

    fn provider_id(&self) -> String {
        self.model.model_id()
    }
}
