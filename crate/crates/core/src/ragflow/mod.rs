//! Question answering over graded evidence: route, retrieve, grade, retry or refuse, synthesize
//! with citations, and audit.

mod audit;
mod grade;
mod retrieve;
mod router;
mod synth;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use audit::{AuditEvent, AuditLog, AuditRecord, ReviewAction};
pub use grade::{overlap_ratio, Grade, Grader, LlmGrader, OverlapGrader};
pub use retrieve::{Backends, EvidenceItem, EvidenceOrigin, Retriever};
pub use router::{route, route_with, LlmRouter, Route, RouteDecision, RouteProvider};
pub use synth::{best_span, Citation, ExtractiveSynthesizer, GroundedAnswer, LlmSynthesizer, Synthesizer};

#[derive(Debug, Error)]
pub enum RagError {
    #[error("query is empty")]
    EmptyQuery,
    #[error("relevance grader unavailable: {0}")]
    GraderUnavailable(String),
    #[error("provider unavailable: {0}")]
    ProviderUnavailable(String),
    #[error("backend down: {reason}")]
    BackendDown {
        reason: String,
        /// Progress up to the failure, when it happened inside [`answer`].
        trace: Option<Box<QueryTrace>>,
    },
    #[error("audit log full: {needed} bytes needed, limit {limit}")]
    StorageFull { needed: u64, limit: u64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl RagError {
    pub(crate) fn backend(reason: impl Into<String>) -> Self {
        RagError::BackendDown {
            reason: reason.into(),
            trace: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnswerConfig {
    pub top_k: usize,
    /// Extra retrieval rounds after the first when nothing is graded relevant.
    pub max_retries: usize,
    /// Each retry multiplies k by this factor.
    pub widen_factor: usize,
    pub max_citations: usize,
}

impl Default for AnswerConfig {
    fn default() -> Self {
        Self {
            top_k: 5,
            max_retries: 2,
            widen_factor: 2,
            max_citations: 3,
        }
    }
}

impl AnswerConfig {
    pub fn k_for_attempt(&self, attempt: usize) -> usize {
        self.top_k.max(1) * self.widen_factor.max(1).pow(attempt as u32)
    }
}

pub struct Providers<'a> {
    pub router: Option<&'a dyn RouteProvider>,
    pub grader: &'a dyn Grader,
    pub synthesizer: &'a dyn Synthesizer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradedItem {
    pub item: EvidenceItem,
    pub grade: Grade,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalAttempt {
    pub k: usize,
    pub items: Vec<GradedItem>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderIds {
    pub router: String,
    pub grader: String,
    pub synthesizer: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryTrace {
    pub query: String,
    pub route: RouteDecision,
    pub attempts: Vec<RetrievalAttempt>,
    /// `None` when the run failed before an answer or refusal was formed.
    pub answer: Option<GroundedAnswer>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub started_at: DateTime<Utc>,
    pub finished_at: DateTime<Utc>,
    pub providers: ProviderIds,
}

impl QueryTrace {
    pub fn relevant(&self) -> impl Iterator<Item = &EvidenceItem> {
        self.attempts
            .iter()
            .flat_map(|a| &a.items)
            .filter(|g| g.grade == Grade::Relevant)
            .map(|g| &g.item)
    }

    /// Every citation names an item graded relevant, and a refusal happens exactly when every
    /// allowed attempt came back without a relevant item.
    pub fn is_grounded(&self, config: &AnswerConfig) -> bool {
        let Some(answer) = &self.answer else {
            return true;
        };
        let cited_ok = answer.citations.iter().all(|c| {
            self.relevant()
                .any(|i| i.chunk_id == c.chunk_id && i.record_id == c.record_id && i.text.contains(&c.quote))
        });
        let none_relevant = self.relevant().next().is_none();
        let refusal_ok = answer.insufficient == (none_relevant && self.attempts.len() == config.max_retries + 1);
        let cites_ok = answer.insufficient == answer.citations.is_empty();
        cited_ok && refusal_ok && cites_ok
    }
}

pub fn grade_relevance(query: &str, item: &EvidenceItem, grader: &dyn Grader) -> Result<Grade, RagError> {
    grader.grade(query, &item.graded_text())
}

/// Runs the full pipeline. On a backend or provider failure the error carries the partial trace.
pub fn answer(
    query: &str,
    retriever: &dyn Retriever,
    providers: &Providers<'_>,
    config: &AnswerConfig,
) -> Result<(GroundedAnswer, QueryTrace), RagError> {
    let started_at = Utc::now();
    let decision = route_with(query, providers.router)?;
    let mut trace = QueryTrace {
        query: query.to_string(),
        route: decision,
        attempts: Vec::new(),
        answer: None,
        error: None,
        started_at,
        finished_at: started_at,
        providers: ProviderIds {
            router: providers.router.map_or("heuristic".into(), |r| r.provider_id()),
            grader: providers.grader.provider_id(),
            synthesizer: providers.synthesizer.provider_id(),
        },
    };
    let fail = |mut trace: QueryTrace, reason: String| {
        trace.error = Some(reason.clone());
        trace.finished_at = Utc::now();
        RagError::BackendDown {
            reason,
            trace: Some(Box::new(trace)),
        }
    };

    for attempt in 0..=config.max_retries {
        let k = config.k_for_attempt(attempt);
        let items = match retriever.retrieve(trace.route.route, query, k) {
            Ok(items) => items,
            Err(e) => return Err(fail(trace, e.to_string())),
        };
        let mut graded = Vec::with_capacity(items.len());
        for item in items {
            match grade_relevance(query, &item, providers.grader) {
                Ok(grade) => graded.push(GradedItem { item, grade }),
                Err(e) => return Err(fail(trace, e.to_string())),
            }
        }
        let found = graded.iter().any(|g| g.grade == Grade::Relevant);
        trace.attempts.push(RetrievalAttempt { k, items: graded });
        if found {
            break;
        }
    }

    let last = trace.attempts.last().expect("at least one attempt");
    let relevant: Vec<&EvidenceItem> = last
        .items
        .iter()
        .filter(|g| g.grade == Grade::Relevant && retriever.chunk(&g.item.chunk_id).is_some())
        .map(|g| &g.item)
        .take(config.max_citations.max(1))
        .collect();
    let result = if relevant.is_empty() {
        GroundedAnswer::refusal()
    } else {
        let citations = synth::citations_for(query, &relevant);
        match providers.synthesizer.synthesize(query, &citations) {
            Ok(text) => GroundedAnswer {
                text,
                citations,
                insufficient: false,
            },
            Err(e) => return Err(fail(trace, e.to_string())),
        }
    };
    trace.answer = Some(result.clone());
    trace.finished_at = Utc::now();
    Ok((result, trace))
}

#[cfg(test)]
mod tests {
    use super::retrieve::testing::Fixture;
    use super::*;
    use crate::corpus::StudyRecord;
    use crate::embedkit::Chunk;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn stub<'a>(grader: &'a OverlapGrader) -> Providers<'a> {
        Providers {
            router: None,
            grader,
            synthesizer: &ExtractiveSynthesizer,
        }
    }

    #[test]
    fn single_chunk_answers_verbatim_query() {
        let q = "Tai chi reduced falls in older adults";
        let f = Fixture::new(vec![StudyRecord::new("only", q)]);
        let grader = OverlapGrader::default();
        let (ans, trace) = answer(q, &f.backends(), &stub(&grader), &AnswerConfig::default()).unwrap();
        assert!(!ans.insufficient);
        assert_eq!(ans.citations.len(), 1);
        assert_eq!(ans.citations[0].chunk_id, "only#0000");
        assert_eq!(ans.citations[0].quote, q);
        assert_eq!(trace.attempts.len(), 1);
        assert!(trace.is_grounded(&AnswerConfig::default()));
    }

    #[test]
    fn no_relevant_chunk_refuses_after_retries() {
        let f = Fixture::new(vec![
            StudyRecord::new("a", "Dietary sodium and kidney stones"),
            StudyRecord::new("b", "Sleep hygiene for shift workers"),
        ]);
        let grader = OverlapGrader::default();
        let cfg = AnswerConfig::default();
        let (ans, trace) = answer("tai chi balance", &f.backends(), &stub(&grader), &cfg).unwrap();
        assert!(ans.insufficient);
        assert!(ans.citations.is_empty());
        assert_eq!(trace.attempts.len(), 3);
        assert_eq!(trace.attempts.iter().map(|a| a.k).collect::<Vec<_>>(), vec![5, 10, 20]);
        assert!(trace.is_grounded(&cfg));
    }

    struct Down;

    impl Retriever for Down {
        fn retrieve(&self, _: Route, _: &str, _: usize) -> Result<Vec<EvidenceItem>, RagError> {
            Err(RagError::backend("index offline"))
        }
        fn chunk(&self, _: &str) -> Option<&Chunk> {
            None
        }
    }

    #[test]
    fn backend_failure_keeps_partial_trace() {
        let grader = OverlapGrader::default();
        let err = answer("exercise", &Down, &stub(&grader), &AnswerConfig::default()).unwrap_err();
        match err {
            RagError::BackendDown { trace: Some(t), .. } => {
                assert_eq!(t.route.route, Route::Vector);
                assert!(t.attempts.is_empty());
                assert!(t.error.unwrap().contains("index offline"));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(answer("", &Down, &stub(&grader), &AnswerConfig::default()), Err(RagError::EmptyQuery)));
    }

    const VOCAB: &[&str] = &[
        "exercise", "stroke", "balance", "falls", "diet", "sodium", "pain", "sleep", "yoga", "memory", "trial",
        "adults", "risk", "therapy", "heart", "mortality", "anxiety", "walking", "diabetes", "insulin",
    ];

    fn sentence(rng: &mut ChaCha8Rng, words: usize) -> String {
        let mut s: Vec<&str> = (0..words).map(|_| *VOCAB.choose(rng).unwrap()).collect();
        s[0] = VOCAB[rng.gen_range(0..VOCAB.len())];
        format!("{}.", s.join(" "))
    }

    #[test]
    fn randomized_trials_never_cite_irrelevant_items() {
        let mut rng = ChaCha8Rng::seed_from_u64(200);
        let mut refusals = 0;
        for trial in 0..200 {
            let n = rng.gen_range(0..12);
            let records: Vec<StudyRecord> = (0..n)
                .map(|i| {
                    let title = format!("{} {}", sentence(&mut rng, 3), i);
                    StudyRecord::new(format!("r{trial}-{i}"), title).with_abstract(format!(
                        "{} {}",
                        sentence(&mut rng, 6),
                        sentence(&mut rng, 5)
                    ))
                })
                .collect();
            let f = Fixture::new(records);
            let query = (0..rng.gen_range(1..5)).map(|_| *VOCAB.choose(&mut rng).unwrap()).collect::<Vec<_>>().join(" ");
            let grader = OverlapGrader {
                threshold: rng.gen_range(0.2..0.9),
            };
            let cfg = AnswerConfig {
                top_k: rng.gen_range(1..4),
                max_retries: rng.gen_range(0..3),
                ..AnswerConfig::default()
            };
            let (ans, trace) = answer(&query, &f.backends(), &stub(&grader), &cfg).unwrap();
            assert!(trace.is_grounded(&cfg), "trial {trial}: {trace:?}");
            for c in &ans.citations {
                assert!(f.chunks.contains_key(&c.chunk_id));
                let graded = trace
                    .attempts
                    .iter()
                    .flat_map(|a| &a.items)
                    .find(|g| g.item.chunk_id == c.chunk_id)
                    .unwrap();
                assert_eq!(graded.grade, Grade::Relevant);
            }
            if ans.insufficient {
                refusals += 1;
            }
        }
        assert!(refusals > 0 && refusals < 200, "{refusals}");
    }
}
