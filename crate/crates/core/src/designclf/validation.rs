use std::io::BufRead;

use serde::{Deserialize, Serialize};

use super::{classify_with_rules, CueLexicon, DesignError, DesignNode, Verdict};
use crate::corpus::StudyRecord;
use crate::evalkit::ConfusionCounts;

/// One scored record of a single-design validation set: the reference verdict and the verdict a
/// classifier produced for `target`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidationEntry {
    pub id: String,
    pub title: String,
    #[serde(default, rename = "abstract")]
    pub abstract_text: Option<String>,
    pub target: DesignNode,
    pub gold: Verdict,
    pub predicted: Verdict,
}

impl ValidationEntry {
    pub fn record(&self) -> StudyRecord {
        let mut r = StudyRecord::new(self.id.clone(), self.title.clone());
        r.abstract_text = self.abstract_text.clone();
        r
    }
}

pub fn read_validation<R: BufRead>(input: R) -> Result<Vec<ValidationEntry>, DesignError> {
    let mut entries = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        entries.push(serde_json::from_str(&line).map_err(|e| DesignError::Corrupt {
            line: i + 1,
            reason: e.to_string(),
        })?);
    }
    Ok(entries)
}

/// Confusion counts of the recorded predictions against the reference verdicts.
pub fn replay(entries: &[ValidationEntry]) -> ConfusionCounts {
    ConfusionCounts::from_pairs(entries.iter().map(|e| (e.predicted.is_yes(), e.gold.is_yes())))
}

/// Entries whose recorded prediction the rule classifier reproduces.
pub fn rules_agreement(entries: &[ValidationEntry], lexicon: &CueLexicon) -> usize {
    entries
        .iter()
        .filter(|e| classify_with_rules(&e.record(), lexicon).verdict(e.target) == e.predicted)
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIXTURE: &str = include_str!("../../tests/fixtures/design_validation.jsonl");

    #[test]
    fn replay_reproduces_reference_counts() {
        let entries = read_validation(FIXTURE.as_bytes()).unwrap();
        assert_eq!(entries.len(), 164);
        assert!(entries.iter().all(|e| e.target == DesignNode::Rct));
        assert_eq!(replay(&entries), ConfusionCounts::new(74, 7, 83, 0));
    }

    #[test]
    fn rules_reproduce_recorded_predictions() {
        let entries = read_validation(FIXTURE.as_bytes()).unwrap();
        assert_eq!(rules_agreement(&entries, &CueLexicon::default()), entries.len());
    }

    #[test]
    fn malformed_line_is_reported() {
        let text = "{\"id\":\"a\",\"title\":\"t\",\"target\":\"rct\",\"gold\":\"YES\",\"predicted\":\"NO\"}\n{\"id\":1}\n";
        assert!(matches!(read_validation(text.as_bytes()), Err(DesignError::Corrupt { line: 2, .. })));
    }
}
