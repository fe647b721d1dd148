use std::collections::{BTreeSet, HashMap};

use crate::text::word_tokens;

pub const UNKNOWN: &str = "<unk>";
pub const NUMBER: &str = "<num>";

/// Token to row mapping. Row 0 is always `<unk>`, row 1 `<num>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

fn normalize(token: String) -> String {
    if token.bytes().all(|b| b.is_ascii_digit()) {
        NUMBER.to_string()
    } else {
        token
    }
}

/// Lowercased alphanumeric tokens with digit runs folded into `<num>`.
pub fn sentence_tokens(sentence: &str) -> Vec<String> {
    word_tokens(sentence).into_iter().map(normalize).collect()
}

impl Vocabulary {
    /// Builds a vocabulary from the distinct tokens of `sentences`, sorted for reproducibility.
    pub fn from_sentences<'a>(sentences: impl IntoIterator<Item = &'a str>) -> Self {
        let distinct: BTreeSet<String> = sentences
            .into_iter()
            .flat_map(sentence_tokens)
            .filter(|t| t != NUMBER)
            .collect();
        Self::from_tokens([UNKNOWN.to_string(), NUMBER.to_string()].into_iter().chain(distinct))
            .expect("distinct tokens")
    }

    /// Restores a vocabulary from its ordered token list. Returns `None` on duplicates or a
    /// missing `<unk>` at row 0.
    pub fn from_tokens(tokens: impl IntoIterator<Item = String>) -> Option<Self> {
        let tokens: Vec<String> = tokens.into_iter().collect();
        if tokens.first().map(String::as_str) != Some(UNKNOWN) {
            return None;
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return None;
            }
        }
        Some(Self { tokens, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(0)
    }

    pub fn encode(&self, sentence: &str) -> Vec<usize> {
        sentence_tokens(sentence).iter().map(|t| self.id(t)).collect()
    }
}
