use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::network::{ModelConfig, Params, SequenceModel};
use super::vocab::Vocabulary;
use super::{LabeledSentence, PicoLabel, ScreenerError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    #[serde(default = "default_clip")]
    pub clip_norm: f64,
}

fn default_clip() -> f64 {
    5.0
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.5,
            epochs: 25,
            batch_size: 16,
            seed: 7,
            clip_norm: default_clip(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainingOutcome {
    pub model: SequenceModel,
    /// Mean training cross-entropy in inference mode: before the first epoch, then after each.
    pub loss_curve: Vec<f64>,
}

/// Mean cross-entropy over `examples` with dropout disabled.
pub fn mean_loss(model: &SequenceModel, examples: &[(Vec<usize>, PicoLabel)]) -> f64 {
    let ones = vec![1.0; model.config.dense_units];
    let total: f64 = examples
        .iter()
        .map(|(tokens, label)| model.loss_with_mask(tokens, *label, &ones))
        .sum();
    total / examples.len() as f64
}

/// Fraction of examples whose argmax label matches.
pub fn accuracy(model: &SequenceModel, dataset: &[LabeledSentence]) -> f64 {
    if dataset.is_empty() {
        return 0.0;
    }
    let hits = dataset
        .iter()
        .filter(|ex| PicoLabel::argmax(&model.predict_sentence(&ex.sentence)).0 == ex.label)
        .count();
    hits as f64 / dataset.len() as f64
}

fn clip(grads: &mut Params, max_norm: f64) {
    let norm = grads.norm();
    if norm > max_norm && norm.is_finite() {
        let scale = max_norm / norm;
        for t in grads.tensors_mut() {
            t.data.iter_mut().for_each(|v| *v *= scale);
        }
    }
}

/// Mini-batch gradient descent on mean cross-entropy. Deterministic for a given seed.
pub fn train(
    dataset: &[LabeledSentence],
    model_config: ModelConfig,
    config: &TrainConfig,
) -> Result<TrainingOutcome, ScreenerError> {
    if dataset.is_empty() {
        return Err(ScreenerError::EmptyDataset);
    }
    if config.batch_size == 0 || !(config.learning_rate > 0.0) || !(config.clip_norm > 0.0) {
        return Err(ScreenerError::InvalidConfig(
            "batch_size, learning_rate and clip_norm must be positive".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let vocab = Vocabulary::from_sentences(dataset.iter().map(|ex| ex.sentence.as_str()));
    let mut model = SequenceModel::new(vocab, model_config, &mut rng)?;
    let examples: Vec<(Vec<usize>, PicoLabel)> = dataset
        .iter()
        .map(|ex| (model.vocab.encode(&ex.sentence), ex.label))
        .collect();

    let mut loss_curve = vec![mean_loss(&model, &examples)];
    let mut order: Vec<usize> = (0..examples.len()).collect();
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            let mut grads = model.params.zeros_like();
            for &idx in batch {
                let (tokens, label) = &examples[idx];
                let mask = model.sample_mask(&mut rng);
                let loss = model.accumulate_gradients(tokens, *label, &mask, &mut grads, true);
                if !loss.is_finite() {
                    return Err(ScreenerError::NonFiniteLoss {
                        epoch,
                        example: idx,
                        loss,
                        param_norm: model.params.norm(),
                    });
                }
            }
            let scale = 1.0 / batch.len() as f64;
            for t in grads.tensors_mut() {
                t.data.iter_mut().for_each(|v| *v *= scale);
            }
            clip(&mut grads, config.clip_norm);
            for (p, g) in model.params.tensors_mut().into_iter().zip(grads.tensors()) {
                for (w, d) in p.data.iter_mut().zip(&g.data) {
                    *w -= config.learning_rate * d;
                }
            }
            if !model.params.is_finite() {
                return Err(ScreenerError::NonFiniteLoss {
                    epoch,
                    example: batch[0],
                    loss: f64::NAN,
                    param_norm: model.params.norm(),
                });
            }
        }
        let loss = mean_loss(&model, &examples);
        if !loss.is_finite() {
            return Err(ScreenerError::NonFiniteLoss {
                epoch,
                example: usize::MAX,
                loss,
                param_norm: model.params.norm(),
            });
        }
        loss_curve.push(loss);
    }
    Ok(TrainingOutcome { model, loss_curve })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ModelConfig {
        ModelConfig {
            embed_dim: 8,
            hidden: 6,
            dense_units: 8,
            dropout: 0.2,
        }
    }

    #[test]
    fn empty_dataset_is_rejected() {
        assert!(matches!(
            train(&[], small(), &TrainConfig::default()),
            Err(ScreenerError::EmptyDataset)
        ));
    }

    #[test]
    fn single_example_is_memorized() {
        let data = vec![LabeledSentence::new("The control group received usual care.", PicoLabel::C)];
        let cfg = TrainConfig {
            epochs: 60,
            batch_size: 1,
            ..TrainConfig::default()
        };
        let out = train(&data, small(), &cfg).unwrap();
        let last = *out.loss_curve.last().unwrap();
        assert!(last < 0.01, "final loss {last}");
    }

    #[test]
    fn same_seed_same_curve() {
        let data = vec![
            LabeledSentence::new("Participants were 40 adults with stroke.", PicoLabel::P),
            LabeledSentence::new("Funding was provided by a charity.", PicoLabel::Other),
            LabeledSentence::new("This was a randomized controlled trial.", PicoLabel::S),
        ];
        let cfg = TrainConfig {
            epochs: 3,
            batch_size: 2,
            ..TrainConfig::default()
        };
        let a = train(&data, small(), &cfg).unwrap();
        let b = train(&data, small(), &cfg).unwrap();
        assert_eq!(a.loss_curve, b.loss_curve);
        assert_eq!(a.model, b.model);
        let c = train(&data, small(), &TrainConfig { seed: 8, ..cfg }).unwrap();
        assert_ne!(a.loss_curve, c.loss_curve);
    }

    #[test]
    fn divergence_reports_diagnostics() {
        let data = vec![LabeledSentence::new("a b c", PicoLabel::P)];
        let cfg = TrainConfig {
            learning_rate: f64::MAX,
            clip_norm: f64::MAX,
            epochs: 5,
            batch_size: 1,
            seed: 1,
        };
        match train(&data, small(), &cfg) {
            Err(ScreenerError::NonFiniteLoss { epoch, .. }) => assert!(epoch < 5),
            other => panic!("expected NonFiniteLoss, got {other:?}"),
        }
    }
}
