//! Study records: parsing, normalization, deduplication, eligibility screening and storage.
//!
//! A [`Corpus`] is the single source of truth the rest of the engine reads. Records enter
//! through [`parse_records`], pass [`dedupe`], and are kept in insertion order.

mod dedupe;
mod eligibility;
mod parse;

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

pub use dedupe::{dedupe, normalize_title, DedupeOutcome, DuplicatePair, DuplicateReason};
pub use eligibility::{
    evaluate_eligibility, Criterion, CriterionOutcome, CriterionRule, EligibilityAssessment,
    EligibilityRubric, EligibilityVerdict, RubricError,
};
pub use parse::{parse_records, records_to_jsonl, rejects_to_jsonl, ParseOutcome, Reject, SourceFormat};

pub const MIN_YEAR: i32 = 1800;
pub const MAX_YEAR: i32 = 2100;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("unknown record format: {0}")]
    UnknownFormat(String),
    #[error("payload is empty")]
    EmptyPayload,
    #[error("payload is not valid UTF-8: {0}")]
    InvalidUtf8(#[from] std::str::Utf8Error),
    #[error("invalid record {id:?}: {reason}")]
    InvalidRecord { id: String, reason: String },
    #[error("record {0:?} already present")]
    Duplicate(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed corpus file at line {line}: {source}")]
    Corrupt {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

/// One bibliographic record. Unrecognized input fields are preserved in `raw` and written
/// back out as top-level keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRecord {
    pub id: String,
    pub title: String,
    #[serde(rename = "abstract", default, skip_serializing_if = "Option::is_none")]
    pub abstract_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub year: Option<i32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub venue: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub authors: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interventions: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcomes: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub population: Option<Vec<String>>,
    #[serde(default)]
    pub source_tag: String,
    #[serde(flatten)]
    pub raw: BTreeMap<String, Value>,
}

impl StudyRecord {
    pub fn new(id: impl Into<String>, title: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            title: title.into(),
            abstract_text: None,
            year: None,
            venue: None,
            authors: Vec::new(),
            interventions: None,
            outcomes: None,
            population: None,
            source_tag: String::new(),
            raw: BTreeMap::new(),
        }
    }

    pub fn with_abstract(mut self, text: impl Into<String>) -> Self {
        self.abstract_text = Some(text.into());
        self
    }

    pub fn with_year(mut self, year: i32) -> Self {
        self.year = Some(year);
        self
    }

    /// Title followed by the abstract, if any.
    pub fn full_text(&self) -> String {
        match &self.abstract_text {
            Some(abs) if !abs.trim().is_empty() => format!("{} {}", self.title, abs),
            _ => self.title.clone(),
        }
    }

    pub fn has_abstract(&self) -> bool {
        self.abstract_text
            .as_deref()
            .is_some_and(|a| !a.trim().is_empty())
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        let fail = |reason: &str| CorpusError::InvalidRecord {
            id: self.id.clone(),
            reason: reason.to_string(),
        };
        if self.id.trim().is_empty() {
            return Err(fail("id is empty"));
        }
        if self.title.trim().is_empty() {
            return Err(fail("title is empty"));
        }
        if let Some(year) = self.year {
            if !(MIN_YEAR..=MAX_YEAR).contains(&year) {
                return Err(fail(&format!("year {year} outside [{MIN_YEAR}, {MAX_YEAR}]")));
            }
        }
        Ok(())
    }

    /// Lowercases and collapses whitespace in the entity lists.
    pub(crate) fn normalize_entities(&mut self) {
        for list in [&mut self.interventions, &mut self.outcomes, &mut self.population]
            .into_iter()
            .flatten()
        {
            for item in list.iter_mut() {
                *item = normalize_entity(item);
            }
            list.retain(|s| !s.is_empty());
        }
    }
}

pub fn normalize_entity(name: &str) -> String {
    name.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// Insertion-ordered record store with id and normalized-title indexes.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    records: Vec<StudyRecord>,
    by_id: HashMap<String, usize>,
    by_title: HashMap<String, usize>,
}

impl Corpus {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[StudyRecord] {
        &self.records
    }

    pub fn get(&self, id: &str) -> Option<&StudyRecord> {
        self.by_id.get(id).map(|&i| &self.records[i])
    }

    /// The stored record `record` would duplicate, if any.
    pub fn find_duplicate(&self, record: &StudyRecord) -> Option<(&StudyRecord, DuplicateReason)> {
        if let Some(&i) = self.by_id.get(&record.id) {
            return Some((&self.records[i], DuplicateReason::Id));
        }
        self.by_title
            .get(&normalize_title(&record.title))
            .map(|&i| (&self.records[i], DuplicateReason::Title))
    }

    pub fn insert(&mut self, record: StudyRecord) -> Result<(), CorpusError> {
        record.validate()?;
        if let Some((existing, _)) = self.find_duplicate(&record) {
            return Err(CorpusError::Duplicate(existing.id.clone()));
        }
        let idx = self.records.len();
        self.by_id.insert(record.id.clone(), idx);
        self.by_title.insert(normalize_title(&record.title), idx);
        self.records.push(record);
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<(), CorpusError> {
        let mut out = BufWriter::new(fs::File::create(path)?);
        for record in &self.records {
            serde_json::to_writer(&mut out, record).map_err(std::io::Error::from)?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let reader = BufReader::new(fs::File::open(path)?);
        let mut corpus = Self::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let record: StudyRecord = serde_json::from_str(&line)
                .map_err(|source| CorpusError::Corrupt { line: n + 1, source })?;
            corpus.insert(record)?;
        }
        Ok(corpus)
    }
}
