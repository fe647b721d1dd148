use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DesignError, DesignLabel, DesignNode, Setting};
use crate::corpus::StudyRecord;
use crate::text::{word_tokens, CueSet};

/// Fires when every cue group has a phrase present and no exclusion phrase is present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignRule {
    pub leaf: DesignNode,
    pub cue_groups: Vec<Vec<String>>,
    #[serde(default)]
    pub exclude: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettingRule {
    pub setting: Setting,
    pub cues: Vec<String>,
}

/// Design rules and setting cues, each list in priority order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CueLexicon {
    pub designs: Vec<DesignRule>,
    pub settings: Vec<SettingRule>,
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

fn rule(leaf: DesignNode, groups: &[&[&str]], exclude: &[&str]) -> DesignRule {
    DesignRule {
        leaf,
        cue_groups: groups.iter().map(|g| strings(g)).collect(),
        exclude: strings(exclude),
    }
}

const NOT_RANDOMIZED: &[&str] = &[
    "non randomized", "non randomised", "nonrandomized", "nonrandomised", "quasi randomized",
    "quasi randomised", "not randomized", "not randomised",
];

impl Default for CueLexicon {
    fn default() -> Self {
        use DesignNode::*;
        Self {
            designs: vec![
                rule(SystematicReview, &[&["systematic review", "systematic literature review", "scoping review", "umbrella review"]], &[]),
                rule(MetaAnalysis, &[&["meta analysis", "metaanalysis", "meta analyses", "pooled analysis"]], &[]),
                rule(
                    Rct,
                    &[
                        &["randomized", "randomised", "randomly assigned", "randomly allocated", "rct"],
                        &["controlled", "trial", "rct", "randomly assigned", "randomly allocated"],
                    ],
                    NOT_RANDOMIZED,
                ),
                rule(
                    NonRandomized,
                    &[&[
                        "non randomized", "non randomised", "nonrandomized", "nonrandomised", "quasi experimental",
                        "quasi randomized", "quasi randomised", "single arm", "pre post", "before and after",
                        "open label trial", "pilot trial", "feasibility trial", "controlled before",
                    ]],
                    &[],
                ),
                rule(CaseControl, &[&["case control", "matched controls", "cases and controls"]], &[]),
                rule(Cohort, &[&["cohort", "followed up", "followed for", "longitudinal study", "prospective study", "retrospective study", "registry based"]], &[]),
                rule(CrossSectional, &[&["cross sectional", "survey", "prevalence study"]], &[]),
            ],
            settings: vec![
                SettingRule {
                    setting: Setting::LockedFacility,
                    cues: strings(&[
                        "locked facility", "locked ward", "secure unit", "secure hospital", "forensic", "prison",
                        "prisoners", "jail", "correctional", "detention", "incarcerated", "inmates",
                    ]),
                },
                SettingRule {
                    setting: Setting::Hospital,
                    cues: strings(&[
                        "hospital", "hospitalized", "hospitalised", "inpatient", "inpatients", "intensive care",
                        "icu", "emergency department", "ward", "wards", "stroke unit", "tertiary care",
                    ]),
                },
                SettingRule {
                    setting: Setting::Community,
                    cues: strings(&[
                        "community", "community dwelling", "home based", "at home", "primary care",
                        "general practice", "outpatient", "outpatients", "schools", "workplace", "nursing home",
                    ]),
                },
            ],
        }
    }
}

impl CueLexicon {
    pub fn validate(&self) -> Result<(), DesignError> {
        for r in &self.designs {
            if !DesignNode::LEAVES.contains(&r.leaf) {
                return Err(DesignError::InvalidLexicon(format!("{} is not a design leaf", r.leaf)));
            }
            if r.cue_groups.is_empty() || r.cue_groups.iter().any(|g| CueSet::new(g).is_empty()) {
                return Err(DesignError::InvalidLexicon(format!("rule for {} has an empty cue group", r.leaf)));
            }
        }
        for s in &self.settings {
            if s.setting == Setting::OtherUnknown || CueSet::new(&s.cues).is_empty() {
                return Err(DesignError::InvalidLexicon(format!("bad cue list for setting {}", s.setting.as_str())));
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, DesignError> {
        let text = std::fs::read_to_string(path)?;
        let lexicon: Self = serde_json::from_str(&text).map_err(|e| DesignError::InvalidLexicon(e.to_string()))?;
        lexicon.validate()?;
        Ok(lexicon)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data")
    }
}

fn record_tokens(record: &StudyRecord) -> Vec<String> {
    word_tokens(&record.full_text())
}

/// First rule in priority order that fires, with the phrases that made it fire.
fn match_design(lexicon: &CueLexicon, tokens: &[String]) -> Option<(DesignNode, Vec<String>)> {
    lexicon.designs.iter().find_map(|r| {
        if CueSet::new(&r.exclude).any_match(tokens) {
            return None;
        }
        let mut hits = Vec::new();
        for group in &r.cue_groups {
            let found = CueSet::new(group).matches(tokens);
            if found.is_empty() {
                return None;
            }
            for f in found {
                if !hits.contains(&f) {
                    hits.push(f);
                }
            }
        }
        Some((r.leaf, hits))
    })
}

fn match_setting(lexicon: &CueLexicon, tokens: &[String]) -> (Setting, Vec<String>) {
    lexicon
        .settings
        .iter()
        .find_map(|s| {
            let hits = CueSet::new(&s.cues).matches(tokens);
            (!hits.is_empty()).then_some((s.setting, hits))
        })
        .unwrap_or((Setting::OtherUnknown, Vec::new()))
}

pub fn classify_setting_with(record: &StudyRecord, lexicon: &CueLexicon) -> Setting {
    match_setting(lexicon, &record_tokens(record)).0
}

pub fn classify_setting(record: &StudyRecord) -> Setting {
    classify_setting_with(record, &CueLexicon::default())
}

/// Deterministic cue-based classifier.
pub fn classify_with_rules(record: &StudyRecord, lexicon: &CueLexicon) -> DesignLabel {
    let tokens = record_tokens(record);
    let (leaf, design_hits) = match_design(lexicon, &tokens).unwrap_or((DesignNode::Unclassified, Vec::new()));
    let (setting, setting_hits) = match_setting(lexicon, &tokens);
    let mut rationale: Vec<String> = design_hits.into_iter().map(|h| format!("design cue \"{h}\"")).collect();
    rationale.extend(setting_hits.into_iter().map(|h| format!("setting cue \"{h}\"")));
    DesignLabel::for_leaf(leaf, setting, rationale.join("; "))
}
