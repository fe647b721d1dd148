//! Hierarchical study-design classification with per-design YES/NO verdicts and a setting
//! category.

mod hierarchy;
mod llm;
mod rules;
mod store;
mod validation;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::StudyRecord;
use crate::provider::LanguageModel;

pub use hierarchy::DesignNode;
pub use llm::{classify_with_llm, design_prompt};
pub use rules::{classify_setting, classify_setting_with, classify_with_rules, CueLexicon, DesignRule, SettingRule};
pub use store::{DesignStore, StoredDesignLabel};
pub use validation::{read_validation, replay, rules_agreement, ValidationEntry};

#[derive(Debug, Error)]
pub enum DesignError {
    #[error("design provider unavailable: {0}")]
    ProviderUnavailable(String),
    #[error("provider reply could not be used: {0}")]
    BadReply(String),
    #[error("invalid cue lexicon: {0}")]
    InvalidLexicon(String),
    #[error("record has no title")]
    MissingTitle,
    #[error("malformed line {line}: {reason}")]
    Corrupt { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "YES")]
    Yes,
    #[serde(rename = "NO")]
    No,
}

impl Verdict {
    pub fn is_yes(self) -> bool {
        self == Verdict::Yes
    }
}

impl From<bool> for Verdict {
    fn from(b: bool) -> Self {
        if b {
            Verdict::Yes
        } else {
            Verdict::No
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Setting {
    Community,
    LockedFacility,
    Hospital,
    OtherUnknown,
}

impl Setting {
    pub const ALL: [Setting; 4] = [Setting::Community, Setting::LockedFacility, Setting::Hospital, Setting::OtherUnknown];

    pub fn as_str(self) -> &'static str {
        match self {
            Setting::Community => "community",
            Setting::LockedFacility => "locked_facility",
            Setting::Hospital => "hospital",
            Setting::OtherUnknown => "other_unknown",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        let key = s.trim().to_lowercase().replace([' ', '-', '/'], "_");
        match key.as_str() {
            "other" | "unknown" | "other_unknown" => Some(Setting::OtherUnknown),
            _ => Self::ALL.into_iter().find(|x| x.as_str() == key),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignProvider {
    Rules,
    Llm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignLabel {
    /// Root-to-leaf node list.
    pub path: Vec<DesignNode>,
    /// One entry per design leaf.
    pub verdicts: BTreeMap<DesignNode, Verdict>,
    pub setting: Setting,
    pub rationale: String,
}

impl DesignLabel {
    /// Single-label verdicts: YES for `leaf` only (none for [`DesignNode::Unclassified`]).
    pub fn for_leaf(leaf: DesignNode, setting: Setting, rationale: String) -> Self {
        Self {
            path: leaf.path(),
            verdicts: DesignNode::LEAVES.into_iter().map(|l| (l, Verdict::from(l == leaf))).collect(),
            setting,
            rationale,
        }
    }

    pub fn leaf(&self) -> DesignNode {
        *self.path.last().unwrap_or(&DesignNode::Unclassified)
    }

    pub fn verdict(&self, design: DesignNode) -> Verdict {
        self.verdicts.get(&design).copied().unwrap_or(Verdict::No)
    }

    /// True when the verdict map covers every leaf, at most one leaf is YES and the path ends at it.
    pub fn is_consistent(&self) -> bool {
        let yes: Vec<DesignNode> = self.verdicts.iter().filter(|(_, v)| v.is_yes()).map(|(k, _)| *k).collect();
        let covers = DesignNode::LEAVES.iter().all(|l| self.verdicts.contains_key(l)) && self.verdicts.len() == DesignNode::LEAVES.len();
        let leaf = self.leaf();
        let path_ok = self.path == leaf.path() && leaf.is_leaf();
        let yes_ok = match leaf {
            DesignNode::Unclassified => yes.is_empty(),
            _ => yes == vec![leaf],
        };
        covers && path_ok && yes_ok
    }
}

/// Classifies with the chosen provider. The LLM provider needs `model`.
pub fn classify_design(
    record: &StudyRecord,
    provider: DesignProvider,
    lexicon: &CueLexicon,
    model: Option<&dyn LanguageModel>,
) -> Result<DesignLabel, DesignError> {
    if record.title.trim().is_empty() {
        return Err(DesignError::MissingTitle);
    }
    match provider {
        DesignProvider::Rules => Ok(classify_with_rules(record, lexicon)),
        DesignProvider::Llm => {
            let model = model.ok_or_else(|| DesignError::ProviderUnavailable("no language model configured".into()))?;
            classify_with_llm(record, model)
        }
    }
}
