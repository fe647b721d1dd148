use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::StudyRecord;
use crate::text::{word_tokens, CueSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Participants,
    Intervention,
    Comparator,
    Outcomes,
    Timing,
}

impl Criterion {
    pub const ALL: [Criterion; 5] = [
        Criterion::Participants,
        Criterion::Intervention,
        Criterion::Comparator,
        Criterion::Outcomes,
        Criterion::Timing,
    ];
}

/// A criterion passes when every cue group has at least one phrase present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionRule {
    pub enabled: bool,
    pub cue_groups: Vec<Vec<String>>,
}

impl CriterionRule {
    fn new(groups: &[&[&str]]) -> Self {
        Self {
            enabled: true,
            cue_groups: groups
                .iter()
                .map(|g| g.iter().map(|s| s.to_string()).collect())
                .collect(),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RubricError {
    #[error("eligibility rubric has no enabled criteria")]
    NoCriteriaEnabled,
    #[error("criterion {0:?} is enabled but has an empty cue set")]
    EmptyCues(Criterion),
}

/// Eligibility requirements for participants, intervention, comparator, outcome measures and
/// assessment timing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EligibilityRubric {
    /// Human participants plus a diagnostic-criteria cue.
    pub participants: CriterionRule,
    /// A planned, structured and replicable intervention.
    pub intervention: CriterionRule,
    pub comparator: CriterionRule,
    /// An outcome mention plus a validated-instrument cue.
    pub outcomes: CriterionRule,
    /// A post-intervention cue plus a follow-up cue.
    pub timing: CriterionRule,
}

impl Default for EligibilityRubric {
    fn default() -> Self {
        Self {
            participants: CriterionRule::new(&[
                &["participants", "patients", "adults", "subjects", "people", "individuals", "survivors", "men", "women"],
                &[
                    "diagnosed", "diagnosis", "diagnostic criteria", "confirmed", "with stroke",
                    "with heart failure", "with dementia", "with hypertension", "with atrial fibrillation",
                    "with coronary", "with depression",
                ],
            ]),
            intervention: CriterionRule::new(&[&[
                "intervention", "program", "programme", "training", "protocol", "sessions",
                "exercise", "rehabilitation", "therapy", "treatment",
            ]]),
            comparator: CriterionRule::new(&[&[
                "control", "controls", "usual care", "placebo", "no intervention", "waitlist",
                "wait list", "sham", "compared with", "compared to", "versus", "standard care",
            ]]),
            outcomes: CriterionRule::new(&[
                &["outcome", "outcomes", "measured", "assessed", "evaluated", "endpoint"],
                &[
                    "scale", "questionnaire", "inventory", "index", "test", "validated", "sf 36",
                    "moca", "mmse", "barthel", "eq 5d", "score",
                ],
            ]),
            timing: CriterionRule::new(&[
                &["post intervention", "postintervention", "immediately after", "end of treatment", "post treatment", "posttest"],
                &["follow up", "followup", "months later", "weeks later", "long term", "short term"],
            ]),
        }
    }
}

impl EligibilityRubric {
    pub fn rule(&self, criterion: Criterion) -> &CriterionRule {
        match criterion {
            Criterion::Participants => &self.participants,
            Criterion::Intervention => &self.intervention,
            Criterion::Comparator => &self.comparator,
            Criterion::Outcomes => &self.outcomes,
            Criterion::Timing => &self.timing,
        }
    }

    pub fn rule_mut(&mut self, criterion: Criterion) -> &mut CriterionRule {
        match criterion {
            Criterion::Participants => &mut self.participants,
            Criterion::Intervention => &mut self.intervention,
            Criterion::Comparator => &mut self.comparator,
            Criterion::Outcomes => &mut self.outcomes,
            Criterion::Timing => &mut self.timing,
        }
    }

    pub fn validate(&self) -> Result<(), RubricError> {
        let mut any = false;
        for criterion in Criterion::ALL {
            let rule = self.rule(criterion);
            if !rule.enabled {
                continue;
            }
            any = true;
            let empty = rule.cue_groups.is_empty()
                || rule.cue_groups.iter().any(|g| CueSet::new(g).is_empty());
            if empty {
                return Err(RubricError::EmptyCues(criterion));
            }
        }
        if any {
            Ok(())
        } else {
            Err(RubricError::NoCriteriaEnabled)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EligibilityVerdict {
    Pass,
    Fail,
    /// No abstract to judge from. Never treated as exclusion.
    Indeterminate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriterionOutcome {
    pub passed: bool,
    pub matched: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EligibilityAssessment {
    pub criteria: BTreeMap<Criterion, CriterionOutcome>,
    pub verdict: EligibilityVerdict,
}

/// Scores each enabled criterion by cue presence in title and abstract.
pub fn evaluate_eligibility(
    record: &StudyRecord,
    rubric: &EligibilityRubric,
) -> Result<EligibilityAssessment, RubricError> {
    rubric.validate()?;
    let tokens = word_tokens(&record.full_text());
    let mut criteria = BTreeMap::new();
    for criterion in Criterion::ALL {
        let rule = rubric.rule(criterion);
        if !rule.enabled {
            continue;
        }
        let mut matched = Vec::new();
        let mut passed = true;
        for group in &rule.cue_groups {
            let hits = CueSet::new(group).matches(&tokens);
            passed &= !hits.is_empty();
            matched.extend(hits);
        }
        criteria.insert(criterion, CriterionOutcome { passed, matched });
    }
    let verdict = if !record.has_abstract() {
        EligibilityVerdict::Indeterminate
    } else if criteria.values().all(|c| c.passed) {
        EligibilityVerdict::Pass
    } else {
        EligibilityVerdict::Fail
    };
    Ok(EligibilityAssessment { criteria, verdict })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const CUE_COMPLETE: &str = "Forty adults diagnosed with chronic stroke were randomized to a \
        12-week exercise program or usual care. Cognition was assessed with the MoCA scale \
        post-intervention and at 6-month follow-up.";

    #[test]
    fn cue_complete_abstract_passes() {
        let rec = StudyRecord::new("s1", "Exercise after stroke").with_abstract(CUE_COMPLETE);
        let out = evaluate_eligibility(&rec, &EligibilityRubric::default()).unwrap();
        assert_eq!(out.verdict, EligibilityVerdict::Pass, "{:?}", out.criteria);
        assert_eq!(out.criteria.len(), 5);
    }

    #[test]
    fn missing_comparator_fails() {
        let text = CUE_COMPLETE.replace("or usual care", "");
        let rec = StudyRecord::new("s1", "Exercise after stroke").with_abstract(text);
        let out = evaluate_eligibility(&rec, &EligibilityRubric::default()).unwrap();
        assert_eq!(out.verdict, EligibilityVerdict::Fail);
        assert!(!out.criteria[&Criterion::Comparator].passed);
    }

    #[test]
    fn absent_abstract_is_indeterminate() {
        let rec = StudyRecord::new("s1", "Exercise versus usual care in adults with stroke");
        let out = evaluate_eligibility(&rec, &EligibilityRubric::default()).unwrap();
        assert_eq!(out.verdict, EligibilityVerdict::Indeterminate);
    }

    #[test]
    fn all_flags_off_is_a_precondition_error() {
        let mut rubric = EligibilityRubric::default();
        for c in Criterion::ALL {
            rubric.rule_mut(c).enabled = false;
        }
        let rec = StudyRecord::new("s1", "T").with_abstract("x");
        assert_eq!(evaluate_eligibility(&rec, &rubric), Err(RubricError::NoCriteriaEnabled));
    }

    #[test]
    fn enabled_criterion_needs_cues() {
        let mut rubric = EligibilityRubric::default();
        rubric.comparator.cue_groups = vec![vec![]];
        assert_eq!(rubric.validate(), Err(RubricError::EmptyCues(Criterion::Comparator)));
    }

    proptest! {
        #[test]
        fn never_fails_without_abstract(title in "[a-zA-Z ]{1,60}") {
            prop_assume!(!title.trim().is_empty());
            let rec = StudyRecord::new("x", title);
            let out = evaluate_eligibility(&rec, &EligibilityRubric::default()).unwrap();
            prop_assert_eq!(out.verdict, EligibilityVerdict::Indeterminate);
        }
    }
}
