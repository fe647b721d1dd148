//! Confusion-matrix rates, Mean Reciprocal Rank and ROUGE.

mod rouge;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use rouge::{rouge_l, rouge_n, RougeScore};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("confusion counts sum to zero")]
    EmptyCounts,
    #[error("no queries to score")]
    EmptyInput,
    #[error("rank must be at least 1, got {0}")]
    InvalidRank(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn new(tp: u64, fp: u64, tn: u64, fn_: u64) -> Self {
        Self { tp, fp, tn, fn_ }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// Tallies paired predictions against truth.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (bool, bool)>) -> Self {
        let mut c = Self::default();
        for (predicted, actual) in pairs {
            match (predicted, actual) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        c
    }
}

/// Rates from a confusion matrix. `None` marks a zero denominator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub counts: ConfusionCounts,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub specificity: Option<f64>,
    pub accuracy: Option<f64>,
    pub npv: Option<f64>,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn derive_metrics(counts: ConfusionCounts) -> Result<MetricsReport, EvalError> {
    let ConfusionCounts { tp, fp, tn, fn_ } = counts;
    if counts.total() == 0 {
        return Err(EvalError::EmptyCounts);
    }
    Ok(MetricsReport {
        counts,
        precision: ratio(tp, tp + fp),
        recall: ratio(tp, tp + fn_),
        specificity: ratio(tn, tn + fp),
        accuracy: ratio(tp + tn, counts.total()),
        npv: ratio(tn, tn + fn_),
    })
}

impl MetricsReport {
    fn rows(&self) -> [(&'static str, Option<f64>); 5] {
        [
            ("precision", self.precision),
            ("recall", self.recall),
            ("specificity", self.specificity),
            ("accuracy", self.accuracy),
            ("npv", self.npv),
        ]
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data")
    }

    /// `metric,value` rows; undefined metrics have an empty value.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,value\n");
        let c = self.counts;
        for (name, v) in [("tp", c.tp), ("fp", c.fp), ("tn", c.tn), ("fn", c.fn_)] {
            out.push_str(&format!("{name},{v}\n"));
        }
        for (name, v) in self.rows() {
            match v {
                Some(v) => out.push_str(&format!("{name},{v}\n")),
                None => out.push_str(&format!("{name},\n")),
            }
        }
        out
    }

    /// Percentages rounded to one decimal, `"undefined"` where a rate has no denominator.
    pub fn summary(&self) -> String {
        self.rows()
            .iter()
            .map(|(name, v)| match v {
                Some(v) => format!("{name}: {:.1}%", v * 100.0),
                None => format!("{name}: undefined"),
            })
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// Mean of `1/rank`; `None` (no relevant item found) contributes zero.
pub fn mrr(first_relevant: &[Option<usize>]) -> Result<f64, EvalError> {
    if first_relevant.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let mut total = 0.0;
    for rank in first_relevant {
        match rank {
            Some(0) => return Err(EvalError::InvalidRank(0)),
            Some(r) => total += 1.0 / *r as f64,
            None => {}
        }
    }
    Ok(total / first_relevant.len() as f64)
}
