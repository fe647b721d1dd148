use std::collections::HashMap;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RougeScore {
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
}

impl RougeScore {
    fn from_overlap(overlap: usize, candidate_total: usize, reference_total: usize) -> Self {
        let recall = if reference_total == 0 { 0.0 } else { overlap as f64 / reference_total as f64 };
        let precision = if candidate_total == 0 { 0.0 } else { overlap as f64 / candidate_total as f64 };
        let f1 = if recall + precision == 0.0 {
            0.0
        } else {
            2.0 * recall * precision / (recall + precision)
        };
        Self { recall, precision, f1 }
    }
}

fn tokens(text: &str) -> Vec<String> {
    text.to_lowercase().split_whitespace().map(str::to_string).collect()
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if n > 0 && tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

/// ROUGE-N over lowercase whitespace tokens with clipped n-gram counts. `n == 0` scores zero.
pub fn rouge_n(candidate: &str, reference: &str, n: usize) -> RougeScore {
    let (cand, refr) = (tokens(candidate), tokens(reference));
    let cand_counts = ngram_counts(&cand, n);
    let ref_counts = ngram_counts(&refr, n);
    let overlap = cand_counts
        .iter()
        .map(|(gram, &c)| c.min(ref_counts.get(gram).copied().unwrap_or(0)))
        .sum();
    RougeScore::from_overlap(
        overlap,
        cand_counts.values().sum(),
        ref_counts.values().sum(),
    )
}

fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { cur[j].max(prev[j + 1]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// ROUGE-L: longest common subsequence over the token sequences.
pub fn rouge_l(candidate: &str, reference: &str) -> RougeScore {
    let (cand, refr) = (tokens(candidate), tokens(reference));
    RougeScore::from_overlap(lcs_len(&cand, &refr), cand.len(), refr.len())
}
