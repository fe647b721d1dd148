//! Sentence-level PICO tagging with a bidirectional LSTM, and abstract-level compliance verdicts.

mod compliance;
mod gradcheck;
mod io;
mod network;
mod synthetic;
mod tensor;
mod train;
mod vocab;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use compliance::{assess_compliance, ComplianceConfig, PicosAssessment, RubricMode};
pub use gradcheck::{gradient_check, GradCheckReport, TensorCheck};
pub use io::{load_model, read_dataset, read_model, save_model, write_dataset, write_model, FORMAT_VERSION};
pub use network::{LstmParams, ModelConfig, Params, SentenceEncoding, SequenceModel, TENSOR_NAMES};
pub use synthetic::{synthetic_abstract, synthetic_corpus};
pub use tensor::Tensor;
pub use train::{accuracy, train, TrainConfig, TrainingOutcome};
pub use vocab::{sentence_tokens, Vocabulary};

#[derive(Debug, Error)]
pub enum ScreenerError {
    #[error("abstract contains no sentences")]
    EmptyAbstract,
    #[error("no usable model: {0}")]
    UnknownModel(String),
    #[error("training dataset is empty")]
    EmptyDataset,
    #[error("non-finite loss {loss} at epoch {epoch}, example {example} (parameter norm {param_norm})")]
    NonFiniteLoss {
        epoch: usize,
        example: usize,
        loss: f64,
        param_norm: f64,
    },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("dataset line {line}: {reason}")]
    BadDataset { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PicoLabel {
    P,
    I,
    C,
    O,
    S,
    #[serde(rename = "OTHER")]
    Other,
}

impl PicoLabel {
    pub const COUNT: usize = 6;
    pub const ALL: [PicoLabel; 6] = [Self::P, Self::I, Self::C, Self::O, Self::S, Self::Other];
    pub const ELEMENTS: [PicoLabel; 5] = [Self::P, Self::I, Self::C, Self::O, Self::S];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::P => "P",
            Self::I => "I",
            Self::C => "C",
            Self::O => "O",
            Self::S => "S",
            Self::Other => "OTHER",
        }
    }

    /// Label with the highest probability and that probability. Ties go to the earlier label.
    pub fn argmax(probabilities: &[f64]) -> (PicoLabel, f64) {
        let mut best = 0;
        for (i, p) in probabilities.iter().enumerate().take(Self::COUNT) {
            if *p > probabilities[best] {
                best = i;
            }
        }
        (Self::ALL[best], probabilities[best])
    }
}

impl fmt::Display for PicoLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PicoLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|l| l.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown label {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabeledSentence {
    pub sentence: String,
    pub label: PicoLabel,
}

impl LabeledSentence {
    pub fn new(sentence: impl Into<String>, label: PicoLabel) -> Self {
        Self {
            sentence: sentence.into(),
            label,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceTag {
    pub index: usize,
    pub text: String,
    pub label: PicoLabel,
    /// Softmax over labels in [`PicoLabel::ALL`] order.
    pub probabilities: Vec<f64>,
}

/// Splits on terminal punctuation and tags each sentence with its most probable label.
pub fn tag_sentences(abstract_text: &str, model: &SequenceModel) -> Result<Vec<SentenceTag>, ScreenerError> {
    let sentences = crate::text::split_sentences(abstract_text);
    if sentences.is_empty() {
        return Err(ScreenerError::EmptyAbstract);
    }
    Ok(sentences
        .into_iter()
        .enumerate()
        .map(|(index, text)| {
            let probabilities = model.predict_sentence(&text);
            let (label, _) = PicoLabel::argmax(&probabilities);
            SentenceTag {
                index,
                text,
                label,
                probabilities,
            }
        })
        .collect())
}

/// Tags `abstract_text` and applies the compliance rubric.
pub fn screen_abstract(
    abstract_text: &str,
    model: &SequenceModel,
    config: &ComplianceConfig,
) -> Result<PicosAssessment, ScreenerError> {
    Ok(assess_compliance(&tag_sentences(abstract_text, model)?, config))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::OnceLock;

    fn bench_config() -> (ModelConfig, TrainConfig) {
        (
            ModelConfig {
                embed_dim: 16,
                hidden: 16,
                dense_units: 16,
                dropout: 0.3,
            },
            TrainConfig {
                learning_rate: 0.5,
                epochs: 25,
                batch_size: 16,
                seed: 7,
                clip_norm: 5.0,
            },
        )
    }

    /// One trained model shared by the tests below.
    fn trained() -> &'static TrainingOutcome {
        static MODEL: OnceLock<TrainingOutcome> = OnceLock::new();
        MODEL.get_or_init(|| {
            let (m, t) = bench_config();
            train(&synthetic_corpus(600, 1), m, &t).unwrap()
        })
    }

    #[test]
    fn labels_round_trip_as_strings() {
        for l in PicoLabel::ALL {
            assert_eq!(l.as_str().parse::<PicoLabel>().unwrap(), l);
            assert_eq!(serde_json::to_string(&l).unwrap(), format!("\"{l}\""));
        }
        assert!("X".parse::<PicoLabel>().is_err());
        assert_eq!(PicoLabel::argmax(&[0.1, 0.5, 0.5, 0.0, 0.0, 0.0]).0, PicoLabel::I);
    }

    #[test]
    fn synthetic_training_generalizes() {
        let out = trained();
        assert!(out.loss_curve.last().unwrap() < &out.loss_curve[0]);
        let held_out = synthetic_corpus(600, 99);
        let acc = accuracy(&out.model, &held_out);
        assert!(acc >= 0.9, "held-out accuracy {acc}");
    }

    #[test]
    fn trained_model_tags_participant_sentence() {
        let tags = tag_sentences("Participants were 40 adults with stroke.", &trained().model).unwrap();
        assert_eq!(tags.len(), 1);
        assert_eq!(tags[0].label, PicoLabel::P);
        assert!((tags[0].probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn empty_abstract_errors() {
        assert!(matches!(
            tag_sentences("   ", &trained().model),
            Err(ScreenerError::EmptyAbstract)
        ));
    }

    #[test]
    fn full_abstract_is_compliant() {
        let text = synthetic_abstract(&PicoLabel::ALL, 5);
        let a = screen_abstract(&text, &trained().model, &ComplianceConfig::default()).unwrap();
        assert!(a.compliant, "{a:?}");
        let partial = synthetic_abstract(&[PicoLabel::P, PicoLabel::Other], 5);
        let b = screen_abstract(&partial, &trained().model, &ComplianceConfig::default()).unwrap();
        assert!(!b.compliant);
    }

    #[test]
    fn softmax_sums_to_one_for_every_sentence() {
        for ex in synthetic_corpus(60, 3) {
            let p = trained().model.predict_sentence(&ex.sentence);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
}
