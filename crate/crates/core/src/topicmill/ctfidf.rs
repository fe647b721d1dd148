use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::TopicError;
use crate::text::term_tokens;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermWeight {
    pub term: String,
    pub weight: f64,
}

pub type TermCounts = BTreeMap<String, u64>;

/// Stemmed content-token counts, plus space-joined n-grams up to `max_ngram`.
pub fn term_counts(text: &str, max_ngram: usize) -> TermCounts {
    let tokens = term_tokens(text);
    let mut counts = TermCounts::new();
    for n in 1..=max_ngram.max(1) {
        if tokens.len() < n {
            break;
        }
        for gram in tokens.windows(n) {
            *counts.entry(gram.join(" ")).or_insert(0) += 1;
        }
    }
    counts
}

/// Class-based TF-IDF: `w(t, c) = tf(t, c) * ln(1 + A / f(t))` where `A` is the mean number of
/// term occurrences per class and `f(t)` the occurrences of `t` across all classes. Each ranking is
/// sorted by weight descending, then term ascending, and cut to `top_k`.
pub fn ctfidf(
    classes: &BTreeMap<i64, TermCounts>,
    top_k: usize,
) -> Result<BTreeMap<i64, Vec<TermWeight>>, TopicError> {
    if let Some((&id, _)) = classes.iter().find(|(_, c)| c.values().all(|&n| n == 0)) {
        return Err(TopicError::EmptyTopic(id));
    }
    if classes.is_empty() {
        return Ok(BTreeMap::new());
    }
    let mut frequency: BTreeMap<&str, u64> = BTreeMap::new();
    let mut total = 0u64;
    for counts in classes.values() {
        for (term, &n) in counts {
            *frequency.entry(term.as_str()).or_insert(0) += n;
            total += n;
        }
    }
    let mean_words = total as f64 / classes.len() as f64;
    Ok(classes
        .iter()
        .map(|(&id, counts)| {
            let mut ranked: Vec<TermWeight> = counts
                .iter()
                .filter(|(_, &n)| n > 0)
                .map(|(term, &tf)| TermWeight {
                    term: term.clone(),
                    weight: tf as f64 * (1.0 + mean_words / frequency[term.as_str()] as f64).ln(),
                })
                .collect();
            ranked.sort_by(|a, b| b.weight.total_cmp(&a.weight).then_with(|| a.term.cmp(&b.term)));
            ranked.truncate(top_k);
            (id, ranked)
        })
        .collect())
}

/// `"{id}_{t1}_{t2}_{t3}_{t4}"` from at most the first four terms.
pub fn label_topic(id: i64, terms: &[String]) -> String {
    std::iter::once(id.to_string())
        .chain(terms.iter().take(4).cloned())
        .collect::<Vec<_>>()
        .join("_")
}

/// Inverse of [`label_topic`].
pub fn parse_label(label: &str) -> Option<(i64, Vec<String>)> {
    let mut parts = label.split('_');
    let id = parts.next()?.parse().ok()?;
    Some((id, parts.map(str::to_string).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn counts(pairs: &[(&str, u64)]) -> TermCounts {
        pairs.iter().map(|(t, n)| (t.to_string(), *n)).collect()
    }

    fn weight(r: &[TermWeight], term: &str) -> f64 {
        r.iter().find(|w| w.term == term).unwrap().weight
    }

    #[test]
    fn toy_corpus_matches_hand_values() {
        // A = "heart heart brain", B = "brain trial". Mean words 2.5; f(heart)=2, f(brain)=2, f(trial)=1.
        // heart|A = 2 ln(2.25), brain|A = brain|B = ln(2.25), trial|B = ln(3.5).
        let mut classes = BTreeMap::new();
        classes.insert(0, counts(&[("heart", 2), ("brain", 1)]));
        classes.insert(1, counts(&[("brain", 1), ("trial", 1)]));
        let w = ctfidf(&classes, 10).unwrap();
        assert!((weight(&w[&0], "heart") - 1.6218604324326575).abs() < 1e-9);
        assert!((weight(&w[&0], "brain") - 0.8109302162163288).abs() < 1e-9);
        assert!((weight(&w[&1], "brain") - 0.8109302162163288).abs() < 1e-9);
        assert!((weight(&w[&1], "trial") - 1.252762968495368).abs() < 1e-9);
        assert_eq!(w[&1][0].term, "trial");
    }

    #[test]
    fn toy_corpus_through_tokenizer() {
        let a = term_counts("heart heart brain", 1);
        assert_eq!(a, counts(&[("heart", 2), ("brain", 1)]));
        let b = term_counts("heart rate variability", 2);
        assert_eq!(b.get("heart rate"), Some(&1));
        assert_eq!(b.get("rate variabl"), Some(&1));
        assert_eq!(b.len(), 5);
    }

    #[test]
    fn shared_term_weighs_equally() {
        let mut classes = BTreeMap::new();
        classes.insert(0, counts(&[("trial", 3), ("x", 1)]));
        classes.insert(1, counts(&[("trial", 3), ("y", 2)]));
        classes.insert(2, counts(&[("trial", 3)]));
        let w = ctfidf(&classes, 10).unwrap();
        let t0 = weight(&w[&0], "trial");
        assert_eq!(t0, weight(&w[&1], "trial"));
        assert_eq!(t0, weight(&w[&2], "trial"));
    }

    #[test]
    fn single_class_ranks_by_tf() {
        let mut classes = BTreeMap::new();
        classes.insert(0, counts(&[("a", 1), ("b", 5), ("c", 3), ("d", 3)]));
        let w = ctfidf(&classes, 10).unwrap();
        let order: Vec<&str> = w[&0].iter().map(|t| t.term.as_str()).collect();
        assert_eq!(order, vec!["b", "c", "d", "a"]);
        assert_eq!(ctfidf(&classes, 2).unwrap()[&0].len(), 2);
    }

    #[test]
    fn empty_class_is_an_error() {
        let mut classes = BTreeMap::new();
        classes.insert(3, TermCounts::new());
        assert!(matches!(ctfidf(&classes, 5), Err(TopicError::EmptyTopic(3))));
    }

    #[test]
    fn reference_labels() {
        let terms = |s: &[&str]| s.iter().map(|t| t.to_string()).collect::<Vec<_>>();
        assert_eq!(
            label_topic(0, &terms(&["outcom", "trial", "regist", "registr", "primari"])),
            "0_outcom_trial_regist_registr"
        );
        assert_eq!(
            label_topic(-1, &terms(&["report", "trial", "studi", "rct", "data", "use"])),
            "-1_report_trial_studi_rct"
        );
        assert_eq!(label_topic(5, &terms(&["size"])), "5_size");
        assert_eq!(label_topic(4, &terms(&["size", "sampl", "sampl size", "calcul"])), "4_size_sampl_sampl size_calcul");
    }

    proptest! {
        #[test]
        fn labels_reparse(id in -1i64..500, terms in prop::collection::vec("[a-z]{1,8}( [a-z]{1,8})?", 1..8)) {
            let label = label_topic(id, &terms);
            let (back_id, back_terms) = parse_label(&label).unwrap();
            prop_assert_eq!(back_id, id);
            prop_assert_eq!(&back_terms[..], &terms[..terms.len().min(4)]);
        }

        #[test]
        fn rankings_sorted_and_match_formula(
            raw in prop::collection::vec(prop::collection::btree_map("[a-e]", 1u64..6, 1..5), 1..5)
        ) {
            let classes: BTreeMap<i64, TermCounts> = raw.into_iter().enumerate().map(|(i, c)| (i as i64, c)).collect();
            let w = ctfidf(&classes, 100).unwrap();
            let total: u64 = classes.values().flat_map(|c| c.values()).sum();
            let a = total as f64 / classes.len() as f64;
            for (id, ranked) in &w {
                for pair in ranked.windows(2) {
                    prop_assert!(pair[0].weight >= pair[1].weight);
                }
                for tw in ranked {
                    let f: u64 = classes.values().filter_map(|c| c.get(&tw.term)).sum();
                    let tf = classes[id][&tw.term] as f64;
                    prop_assert!((tw.weight - tf * (1.0 + a / f as f64).ln()).abs() < 1e-9);
                }
            }
        }
    }
}
