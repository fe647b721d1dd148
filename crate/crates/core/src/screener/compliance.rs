use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{PicoLabel, SentenceTag};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RubricMode {
    /// P, I, C, O and S all required.
    #[default]
    AllFive,
    /// Comparator optional.
    PioS,
}

impl RubricMode {
    pub fn required(self) -> &'static [PicoLabel] {
        match self {
            RubricMode::AllFive => &PicoLabel::ELEMENTS,
            RubricMode::PioS => &[PicoLabel::P, PicoLabel::I, PicoLabel::O, PicoLabel::S],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplianceConfig {
    #[serde(default)]
    pub mode: RubricMode,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

fn default_threshold() -> f64 {
    0.5
}

impl Default for ComplianceConfig {
    fn default() -> Self {
        Self {
            mode: RubricMode::AllFive,
            threshold: default_threshold(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PicosAssessment {
    pub labels: Vec<PicoLabel>,
    pub present: BTreeMap<PicoLabel, bool>,
    pub compliant: bool,
    pub confidence: f64,
    pub evidence: BTreeMap<PicoLabel, Vec<usize>>,
    pub mode: RubricMode,
}

/// Element `e` is present when some sentence is tagged `e` with probability at least the threshold.
/// Confidence is the smallest, over required elements, of the best sentence probability for it.
pub fn assess_compliance(tags: &[SentenceTag], config: &ComplianceConfig) -> PicosAssessment {
    let mut present = BTreeMap::new();
    let mut evidence = BTreeMap::new();
    for element in PicoLabel::ELEMENTS {
        let hits: Vec<usize> = tags
            .iter()
            .filter(|t| t.label == element && t.probabilities[element.index()] >= config.threshold)
            .map(|t| t.index)
            .collect();
        present.insert(element, !hits.is_empty());
        evidence.insert(element, hits);
    }
    let required = config.mode.required();
    let compliant = required.iter().all(|e| present[e]);
    let confidence = required
        .iter()
        .map(|e| {
            tags.iter()
                .map(|t| t.probabilities[e.index()])
                .filter(|p| p.is_finite())
                .fold(0.0, f64::max)
        })
        .fold(1.0, f64::min)
        .clamp(0.0, 1.0);
    PicosAssessment {
        labels: tags.iter().map(|t| t.label).collect(),
        present,
        compliant,
        confidence,
        evidence,
        mode: config.mode,
    }
}
