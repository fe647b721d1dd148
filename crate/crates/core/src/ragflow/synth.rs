use serde::{Deserialize, Serialize};

use super::{overlap_ratio, EvidenceItem, RagError};
use crate::provider::LanguageModel;
use crate::text::split_sentences;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Citation {
    pub record_id: String,
    pub chunk_id: String,
    /// Verbatim span of the cited chunk.
    pub quote: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundedAnswer {
    pub text: String,
    pub citations: Vec<Citation>,
    pub insufficient: bool,
}

impl GroundedAnswer {
    pub fn refusal() -> Self {
        Self {
            text: "Insufficient evidence: no retrieved source was graded relevant to this question.".into(),
            citations: Vec::new(),
            insufficient: true,
        }
    }
}

/// The sentence of `text` sharing most content tokens with the query (earliest on ties).
pub fn best_span(query: &str, text: &str) -> String {
    let sentences = split_sentences(text);
    let mut best: Option<(f64, &String)> = None;
    for s in &sentences {
        let r = overlap_ratio(query, s);
        if best.is_none_or(|(b, _)| r > b) {
            best = Some((r, s));
        }
    }
    best.map_or_else(|| text.trim().to_string(), |(_, s)| s.clone())
}

pub trait Synthesizer: Send + Sync {
    /// Answer text from `evidence`, which holds the relevant items in citation order.
    fn synthesize(&self, query: &str, evidence: &[Citation]) -> Result<String, RagError>;
    fn provider_id(&self) -> String;
}

/// Joins the quoted spans with numbered markers.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExtractiveSynthesizer;

impl Synthesizer for ExtractiveSynthesizer {
    fn synthesize(&self, _query: &str, evidence: &[Citation]) -> Result<String, RagError> {
        Ok(evidence
            .iter()
            .enumerate()
            .map(|(i, c)| format!("{} [{}]", c.quote, i + 1))
            .collect::<Vec<_>>()
            .join(" "))
    }

    fn provider_id(&self) -> String {
        "extractive".into()
    }
}

pub struct LlmSynthesizer<'a> {
    pub model: &'a dyn LanguageModel,
}

impl Synthesizer for LlmSynthesizer<'_> {
    fn synthesize(&self, query: &str, evidence: &[Citation]) -> Result<String, RagError> {
        let mut prompt = format!(
            "Answer the question using only the numbered sources. Cite sources as [n].\nQuestion: {query}\n"
        );
        for (i, c) in evidence.iter().enumerate() {
            prompt.push_str(&format!("[{}] ({}) {}\n", i + 1, c.record_id, c.quote));
        }
        self.model
            .complete(&prompt)
            .map_err(|e| RagError::ProviderUnavailable(e.to_string()))
    }

    fn provider_id(&self) -> String {
        self.model.model_id()
    }
}

pub(crate) fn citations_for(query: &str, items: &[&EvidenceItem]) -> Vec<Citation> {
    items
        .iter()
        .map(|item| Citation {
            record_id: item.record_id.clone(),
            chunk_id: item.chunk_id.clone(),
            quote: best_span(query, &item.text),
        })
        .collect()
}
