use serde::{Deserialize, Serialize};

use super::EmbedError;
use crate::corpus::StudyRecord;

/// A window of whitespace tokens from one record. `span` is the half-open token range.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub chunk_id: String,
    pub record_id: String,
    pub ordinal: usize,
    pub text: String,
    pub span: (usize, usize),
}

impl Chunk {
    pub fn make_id(record_id: &str, ordinal: usize) -> String {
        format!("{record_id}#{ordinal:04}")
    }
}

/// Token windows `[start, start + max_tokens)` advancing by `max_tokens - overlap`.
pub(crate) fn windows(n_tokens: usize, max_tokens: usize, overlap: usize) -> Vec<(usize, usize)> {
    let stride = max_tokens - overlap;
    let mut out = Vec::new();
    let mut start = 0;
    loop {
        let end = (start + max_tokens).min(n_tokens);
        out.push((start, end));
        if end >= n_tokens {
            break;
        }
        start += stride;
    }
    out
}

/// Splits title plus abstract into overlapping windows. Records without an abstract get one
/// chunk holding the title.
pub fn chunk_document(
    record: &StudyRecord,
    max_tokens: usize,
    overlap: usize,
) -> Result<Vec<Chunk>, EmbedError> {
    if max_tokens == 0 || overlap >= max_tokens {
        return Err(EmbedError::BadWindowParams { max_tokens, overlap });
    }
    if !record.has_abstract() {
        let n = record.title.split_whitespace().count();
        return Ok(vec![Chunk {
            chunk_id: Chunk::make_id(&record.id, 0),
            record_id: record.id.clone(),
            ordinal: 0,
            text: record.title.split_whitespace().collect::<Vec<_>>().join(" "),
            span: (0, n),
        }]);
    }
    let text = record.full_text();
    let tokens: Vec<&str> = text.split_whitespace().collect();
    Ok(windows(tokens.len(), max_tokens, overlap)
        .into_iter()
        .enumerate()
        .map(|(ordinal, (start, end))| Chunk {
            chunk_id: Chunk::make_id(&record.id, ordinal),
            record_id: record.id.clone(),
            ordinal,
            text: tokens[start..end].join(" "),
            span: (start, end),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn words(n: usize) -> String {
        (0..n).map(|i| format!("w{i}")).collect::<Vec<_>>().join(" ")
    }

    #[test]
    fn ten_tokens_max_four_overlap_one() {
        assert_eq!(windows(10, 4, 1), vec![(0, 4), (3, 7), (6, 10)]);
    }

    #[test]
    fn short_text_single_chunk() {
        let rec = StudyRecord::new("r", "Short").with_abstract("just a few words");
        let chunks = chunk_document(&rec, 50, 5).unwrap();
        assert_eq!(chunks.len(), 1);
        assert_eq!(chunks[0].span, (0, 5));
    }

    #[test]
    fn twenty_five_tokens_max_ten_overlap_two() {
        // title "w0" + abstract w1..w24 -> 25 whitespace tokens
        let all = words(25);
        let (title, abs) = all.split_once(' ').unwrap();
        let rec = StudyRecord::new("r", title).with_abstract(abs);
        let chunks = chunk_document(&rec, 10, 2).unwrap();
        // Hand enumeration: stride 8 -> [0,10), [8,18), [16,25).
        let spans: Vec<_> = chunks.iter().map(|c| c.span).collect();
        assert_eq!(spans, vec![(0, 10), (8, 18), (16, 25)]);
        assert_eq!(chunks[1].text, "w8 w9 w10 w11 w12 w13 w14 w15 w16 w17");
        assert_eq!(chunks[2].text.split_whitespace().count(), 9);
        assert_eq!(chunks[2].chunk_id, "r#0002");
    }

    #[test]
    fn no_abstract_means_title_only() {
        let rec = StudyRecord::new("r", "A long title that exceeds the window size easily");
        let chunks = chunk_document(&rec, 3, 1).unwrap();
        assert_eq!(chunks.len(), 1);
        assert_eq!(chunks[0].text, rec.title);
    }

    #[test]
    fn bad_params() {
        let rec = StudyRecord::new("r", "t");
        assert!(matches!(chunk_document(&rec, 4, 4), Err(EmbedError::BadWindowParams { .. })));
        assert!(matches!(chunk_document(&rec, 0, 0), Err(EmbedError::BadWindowParams { .. })));
    }

    proptest! {
        #[test]
        fn windows_cover_contiguously(n in 1usize..200, max in 1usize..20, ov in 0usize..19) {
            prop_assume!(ov < max);
            let w = windows(n, max, ov);
            prop_assert_eq!(w[0].0, 0);
            prop_assert_eq!(w.last().unwrap().1, n);
            for pair in w.windows(2) {
                prop_assert_eq!(pair[1].0, pair[0].0 + max - ov);
                prop_assert!(pair[1].0 <= pair[0].1);
            }
            for &(s, e) in &w {
                prop_assert!(e > s && e - s <= max);
            }
        }
    }
}
