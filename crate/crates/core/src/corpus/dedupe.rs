use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::StudyRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DuplicateReason {
    Id,
    Title,
}

/// `duplicate` was dropped in favour of the earlier `kept`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DuplicatePair {
    pub kept: String,
    pub duplicate: String,
    pub reason: DuplicateReason,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DedupeOutcome {
    pub kept: Vec<StudyRecord>,
    pub duplicates: Vec<DuplicatePair>,
}

/// Lowercase, punctuation removed, whitespace collapsed.
pub fn normalize_title(title: &str) -> String {
    let stripped: String = title
        .chars()
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .flat_map(char::to_lowercase)
        .collect();
    stripped.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// First occurrence wins; kept records stay in input order.
pub fn dedupe(records: Vec<StudyRecord>) -> DedupeOutcome {
    let mut by_id: HashMap<String, String> = HashMap::new();
    let mut by_title: HashMap<String, String> = HashMap::new();
    let mut outcome = DedupeOutcome::default();
    for record in records {
        let title_key = normalize_title(&record.title);
        let hit = by_id
            .get(&record.id)
            .map(|k| (k.clone(), DuplicateReason::Id))
            .or_else(|| by_title.get(&title_key).map(|k| (k.clone(), DuplicateReason::Title)));
        match hit {
            Some((kept, reason)) => outcome.duplicates.push(DuplicatePair {
                kept,
                duplicate: record.id.clone(),
                reason,
            }),
            None => {
                by_id.insert(record.id.clone(), record.id.clone());
                by_title.insert(title_key, record.id.clone());
                outcome.kept.push(record);
            }
        }
    }
    outcome
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(id: &str, title: &str) -> StudyRecord {
        StudyRecord::new(id, title)
    }

    #[test]
    fn title_normalization_rule() {
        assert_eq!(normalize_title("A Trial."), "a trial");
        assert_eq!(normalize_title("a  trial"), "a trial");
        let out = dedupe(vec![rec("1", "A Trial."), rec("2", "a  trial")]);
        assert_eq!(out.kept.len(), 1);
        assert_eq!(
            out.duplicates,
            vec![DuplicatePair { kept: "1".into(), duplicate: "2".into(), reason: DuplicateReason::Title }]
        );
    }

    #[test]
    fn disjoint_records_all_kept() {
        let out = dedupe(vec![rec("1", "Heart"), rec("2", "Brain"), rec("3", "Gut")]);
        assert_eq!(out.kept.len(), 3);
        assert!(out.duplicates.is_empty());
    }

    /// Brute-force oracle: a record is a duplicate iff some earlier *kept* record shares its
    /// id or normalized title.
    fn oracle_kept(records: &[StudyRecord]) -> Vec<String> {
        let mut kept: Vec<&StudyRecord> = Vec::new();
        for r in records {
            let dup = kept.iter().any(|k| {
                k.id == r.id || normalize_title(&k.title) == normalize_title(&r.title)
            });
            if !dup {
                kept.push(r);
            }
        }
        kept.iter().map(|r| r.id.clone()).collect()
    }

    #[test]
    fn ten_record_fixture_with_three_planted_duplicates() {
        let records = vec![
            rec("r1", "Aerobic exercise and cognition"),
            rec("r2", "Blood pressure in stroke survivors"),
            rec("r3", "Heart rate variability after TBI"),
            rec("r4", "Aerobic Exercise and Cognition."), // title dup of r1
            rec("r5", "Sleep and atrial fibrillation"),
            rec("r2", "A completely different title"), // id dup of r2
            rec("r6", "Mindfulness for cardiac patients"),
            rec("r7", "heart-rate variability after TBI"), // "heartrate" != "heart rate": not a dup
            rec("r8", "  sleep AND atrial   fibrillation "), // title dup of r5
            rec("r9", "Statins and dementia risk"),
        ];
        let out = dedupe(records.clone());
        assert_eq!(out.kept.len(), 7);
        let ids: Vec<String> = out.kept.iter().map(|r| r.id.clone()).collect();
        assert_eq!(ids, oracle_kept(&records));
        assert_eq!(out.duplicates.len(), 3);
    }

    fn arb_record() -> impl Strategy<Value = StudyRecord> {
        ("[a-d]", prop::sample::select(vec!["A trial", "a  TRIAL!", "Cohort", "cohort.", "Review"]))
            .prop_map(|(id, title)| rec(&id, title))
    }

    proptest! {
        #[test]
        fn dedupe_is_idempotent(records in prop::collection::vec(arb_record(), 0..12)) {
            let once = dedupe(records);
            let twice = dedupe(once.kept.clone());
            prop_assert_eq!(&twice.kept, &once.kept);
            prop_assert!(twice.duplicates.is_empty());
        }

        #[test]
        fn dedupe_matches_pairwise_oracle(records in prop::collection::vec(arb_record(), 0..12)) {
            let ids: Vec<String> = dedupe(records.clone()).kept.into_iter().map(|r| r.id).collect();
            prop_assert_eq!(ids, oracle_kept(&records));
        }
    }
}
