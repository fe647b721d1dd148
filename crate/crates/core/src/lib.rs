//! Evidence-synthesis engine for living systematic reviews.
//!
//! The crate is organized by pipeline stage:
//!
//! - [`corpus`]: record parsing, deduplication, eligibility rubric and storage
//! - [`embedkit`]: embeddings, chunking and exact cosine search
//! - [`screener`]: Bi-LSTM sentence tagger and PICOS compliance verdicts
//! - [`designclf`]: hierarchical study-design and setting classification
//! - [`topicmill`]: clustering, c-TF-IDF terms, trends and redundancy alerts
//! - [`graphcore`]: property graph of studies and their entities
//! - [`ragflow`]: routed, relevance-graded question answering with an audit log
//! - [`evalkit`]: confusion-matrix rates, MRR and ROUGE

pub mod corpus;
pub mod text;
pub mod embedkit;
pub mod provider;
pub mod screener;
pub mod evalkit;
pub mod topicmill;
pub mod graphcore;
pub mod designclf;
pub mod ragflow;
