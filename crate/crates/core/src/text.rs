//! Shared text normalization: word tokens, cue phrases, sentences, stopwords and stemming.

use std::sync::OnceLock;

use rust_stemmers::{Algorithm, Stemmer};

/// Lowercased alphanumeric runs. Everything else is a separator.
pub fn word_tokens(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            current.extend(ch.to_lowercase());
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// Word tokens with stopwords removed.
pub fn content_tokens(text: &str) -> Vec<String> {
    word_tokens(text)
        .into_iter()
        .filter(|t| !is_stopword(t))
        .collect()
}

/// Tokens used for topic term counts: content tokens, digits dropped, stemmed.
pub fn term_tokens(text: &str) -> Vec<String> {
    content_tokens(text)
        .into_iter()
        .filter(|t| t.chars().any(|c| c.is_alphabetic()) && t.chars().count() > 1)
        .map(|t| stem(&t))
        .collect()
}

pub fn stem(token: &str) -> String {
    static STEMMER: OnceLock<Stemmer> = OnceLock::new();
    STEMMER
        .get_or_init(|| Stemmer::create(Algorithm::English))
        .stem(token)
        .into_owned()
}

/// True if `phrase` (tokenized the same way as `tokens`) occurs as a contiguous run.
pub fn contains_phrase(tokens: &[String], phrase: &[String]) -> bool {
    if phrase.is_empty() || phrase.len() > tokens.len() {
        return false;
    }
    tokens.windows(phrase.len()).any(|w| w == phrase)
}

/// A set of cue phrases matched against tokenized text.
#[derive(Debug, Clone, Default)]
pub struct CueSet {
    phrases: Vec<(String, Vec<String>)>,
}

impl CueSet {
    pub fn new<I, S>(phrases: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let phrases = phrases
            .into_iter()
            .map(|p| (p.as_ref().to_string(), word_tokens(p.as_ref())))
            .filter(|(_, toks)| !toks.is_empty())
            .collect();
        Self { phrases }
    }

    pub fn is_empty(&self) -> bool {
        self.phrases.is_empty()
    }

    /// The original phrases that occur in `tokens`, in lexicon order.
    pub fn matches(&self, tokens: &[String]) -> Vec<String> {
        self.phrases
            .iter()
            .filter(|(_, p)| contains_phrase(tokens, p))
            .map(|(raw, _)| raw.clone())
            .collect()
    }

    pub fn any_match(&self, tokens: &[String]) -> bool {
        self.phrases.iter().any(|(_, p)| contains_phrase(tokens, p))
    }
}

/// Splits on `.`, `!` or `?` followed by whitespace or end of text.
/// Decimals such as "2.5" stay intact.
pub fn split_sentences(text: &str) -> Vec<String> {
    let mut sentences = Vec::new();
    let mut current = String::new();
    let mut chars = text.chars().peekable();
    while let Some(ch) = chars.next() {
        current.push(ch);
        if matches!(ch, '.' | '!' | '?') {
            let boundary = match chars.peek() {
                None => true,
                Some(next) => next.is_whitespace(),
            };
            if boundary {
                let trimmed = current.trim();
                if !trimmed.is_empty() {
                    sentences.push(trimmed.to_string());
                }
                current.clear();
            }
        }
    }
    let trimmed = current.trim();
    if !trimmed.is_empty() {
        sentences.push(trimmed.to_string());
    }
    sentences
}

pub fn is_stopword(token: &str) -> bool {
    STOPWORDS.binary_search(&token).is_ok()
}

// Sorted for binary search.
const STOPWORDS: &[&str] = &[
    "a", "about", "above", "after", "again", "against", "all", "also", "am", "among", "an", "and",
    "any", "are", "as", "at", "be", "because", "been", "before", "being", "below", "between",
    "both", "but", "by", "can", "could", "did", "do", "does", "doing", "down", "during", "each",
    "few", "for", "from", "further", "had", "has", "have", "having", "he", "her", "here", "hers",
    "herself", "him", "himself", "his", "how", "i", "if", "in", "into", "is", "it", "its",
    "itself", "just", "many", "may", "me", "might", "more", "most", "much", "must", "my",
    "myself", "no", "nor", "not", "now", "of", "off", "on", "once", "only", "or", "other", "our",
    "ours", "ourselves", "out", "over", "own", "same", "shall", "she", "should", "so", "some",
    "such", "than", "that", "the", "their", "theirs", "them", "themselves", "then", "there",
    "these", "they", "this", "those", "through", "to", "too", "under", "until", "up", "upon",
    "us", "very", "was", "we", "were", "what", "when", "where", "which", "while", "who", "whom",
    "why", "will", "with", "within", "without", "would", "you", "your", "yours", "yourself",
    "yourselves",
];
