use std::fmt;

use serde::{Deserialize, Serialize};

/// A node in the study-design tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignNode {
    Root,
    Interventional,
    Randomized,
    Rct,
    NonRandomized,
    Observational,
    Cohort,
    CaseControl,
    CrossSectional,
    Synthesis,
    SystematicReview,
    MetaAnalysis,
    /// Leaf for records with no design cue; never receives a YES verdict.
    Unclassified,
}

impl DesignNode {
    pub const ALL: [DesignNode; 13] = [
        DesignNode::Root,
        DesignNode::Interventional,
        DesignNode::Randomized,
        DesignNode::Rct,
        DesignNode::NonRandomized,
        DesignNode::Observational,
        DesignNode::Cohort,
        DesignNode::CaseControl,
        DesignNode::CrossSectional,
        DesignNode::Synthesis,
        DesignNode::SystematicReview,
        DesignNode::MetaAnalysis,
        DesignNode::Unclassified,
    ];

    /// Design leaves that carry a YES/NO verdict.
    pub const LEAVES: [DesignNode; 7] = [
        DesignNode::Rct,
        DesignNode::NonRandomized,
        DesignNode::Cohort,
        DesignNode::CaseControl,
        DesignNode::CrossSectional,
        DesignNode::SystematicReview,
        DesignNode::MetaAnalysis,
    ];

    pub fn parent(self) -> Option<DesignNode> {
        use DesignNode::*;
        match self {
            Root => None,
            Interventional | Observational | Synthesis | Unclassified => Some(Root),
            Randomized | NonRandomized => Some(Interventional),
            Rct => Some(Randomized),
            Cohort | CaseControl | CrossSectional => Some(Observational),
            SystematicReview | MetaAnalysis => Some(Synthesis),
        }
    }

    pub fn children(self) -> Vec<DesignNode> {
        Self::ALL.into_iter().filter(|n| n.parent() == Some(self)).collect()
    }

    pub fn is_leaf(self) -> bool {
        self.children().is_empty()
    }

    /// Root-to-node path.
    pub fn path(self) -> Vec<DesignNode> {
        let mut path = vec![self];
        while let Some(p) = path.last().and_then(|n| n.parent()) {
            path.push(p);
        }
        path.reverse();
        path
    }

    pub fn as_str(self) -> &'static str {
        use DesignNode::*;
        match self {
            Root => "root",
            Interventional => "interventional",
            Randomized => "randomized",
            Rct => "rct",
            NonRandomized => "non_randomized",
            Observational => "observational",
            Cohort => "cohort",
            CaseControl => "case_control",
            CrossSectional => "cross_sectional",
            Synthesis => "synthesis",
            SystematicReview => "systematic_review",
            MetaAnalysis => "meta_analysis",
            Unclassified => "unclassified",
        }
    }

    /// Accepts the snake_case name, ignoring case and treating spaces and hyphens as underscores.
    pub fn parse(s: &str) -> Option<Self> {
        let key = s.trim().to_lowercase().replace([' ', '-'], "_");
        Self::ALL.into_iter().find(|n| n.as_str() == key)
    }
}

impl fmt::Display for DesignNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}
