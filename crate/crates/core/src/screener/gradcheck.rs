use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::network::{SequenceModel, TENSOR_NAMES};
use super::{LabeledSentence, PicoLabel};

#[derive(Debug, Clone, Serialize)]
pub struct TensorCheck {
    pub name: String,
    pub max_relative_error: f64,
    /// Largest analytic gradient magnitude, to tell a vacuous pass from a real one.
    pub max_abs_gradient: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// One entry per parameter tensor, in model order.
    pub per_tensor: Vec<TensorCheck>,
    pub parameters_checked: usize,
    /// Parameters whose step was shrunk because it pushed a ReLU input across zero.
    pub reduced_steps: usize,
    /// Parameters left unchecked because every step tried still crossed a ReLU kink.
    pub skipped_kinks: usize,
}

/// A step straddling a ReLU kink is shrunk tenfold up to this many times.
const MAX_STEP_REDUCTIONS: usize = 3;

fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-12)
}

/// Compares backpropagated gradients of the summed sample loss with central differences for every
/// scalar parameter. Dropout masks are drawn once and held fixed. A step that flips any dense
/// unit's ReLU side is not a valid difference of a smooth function, so it is shrunk first.
pub fn gradient_check(model: &SequenceModel, sample: &[LabeledSentence], epsilon: f64) -> GradCheckReport {
    check(model, sample, epsilon, true)
}

#[cfg(test)]
/// Same as [`gradient_check`] but with the cell-state carry term removed from backpropagation.
pub(crate) fn gradient_check_without_cell_carry(
    model: &SequenceModel,
    sample: &[LabeledSentence],
    epsilon: f64,
) -> GradCheckReport {
    check(model, sample, epsilon, false)
}

fn check(model: &SequenceModel, sample: &[LabeledSentence], epsilon: f64, keep_cell_carry: bool) -> GradCheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(0x6c57);
    let examples: Vec<(Vec<usize>, PicoLabel, Vec<f64>)> = sample
        .iter()
        .map(|ex| (model.vocab.encode(&ex.sentence), ex.label, model.sample_mask(&mut rng)))
        .collect();

    let mut grads = model.params.zeros_like();
    for (tokens, label, mask) in &examples {
        model.accumulate_gradients(tokens, *label, mask, &mut grads, keep_cell_carry);
    }
    let evaluate = |m: &SequenceModel| -> Vec<(f64, Vec<bool>)> {
        examples
            .iter()
            .map(|(tokens, label, mask)| m.loss_and_active_units(tokens, *label, mask))
            .collect()
    };
    let baseline: Vec<Vec<bool>> = evaluate(model).into_iter().map(|(_, active)| active).collect();

    let mut probe = model.clone();
    let mut per_tensor = Vec::with_capacity(TENSOR_NAMES.len());
    let (mut checked, mut reduced_steps, mut skipped_kinks) = (0, 0, 0);
    for (t, name) in TENSOR_NAMES.iter().enumerate() {
        let mut worst = 0.0f64;
        let mut largest = 0.0f64;
        let len = probe.params.tensors()[t].len();
        for i in 0..len {
            let original = probe.params.tensors()[t].data[i];
            let mut step = epsilon;
            let mut numeric = None;
            for attempt in 0..=MAX_STEP_REDUCTIONS {
                probe.params.tensors_mut()[t].data[i] = original + step;
                let plus = evaluate(&probe);
                probe.params.tensors_mut()[t].data[i] = original - step;
                let minus = evaluate(&probe);
                probe.params.tensors_mut()[t].data[i] = original;
                let smooth = plus
                    .iter()
                    .zip(&minus)
                    .zip(&baseline)
                    .all(|((p, m), b)| p.1 == *b && m.1 == *b);
                if smooth {
                    // Per-example differences cancel less than differences of the summed loss.
                    let diff: f64 = plus.iter().zip(&minus).map(|(p, m)| p.0 - m.0).sum();
                    numeric = Some(diff / (2.0 * step));
                    if attempt > 0 {
                        reduced_steps += 1;
                    }
                    break;
                }
                step /= 10.0;
            }
            let Some(numeric) = numeric else {
                skipped_kinks += 1;
                continue;
            };
            let analytic = grads.tensors()[t].data[i];
            worst = worst.max(relative_error(analytic, numeric));
            largest = largest.max(analytic.abs());
            checked += 1;
        }
        per_tensor.push(TensorCheck {
            name: name.to_string(),
            max_relative_error: worst,
            max_abs_gradient: largest,
        });
    }
    GradCheckReport {
        max_relative_error: per_tensor.iter().map(|t| t.max_relative_error).fold(0.0, f64::max),
        per_tensor,
        parameters_checked: checked,
        reduced_steps,
        skipped_kinks,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::screener::network::ModelConfig;
    use crate::screener::vocab::Vocabulary;

    fn sample() -> Vec<LabeledSentence> {
        vec![
            LabeledSentence::new("adults with stroke were enrolled", PicoLabel::P),
            LabeledSentence::new("usual care served as control", PicoLabel::C),
        ]
    }

    fn tiny_model(seed: u64) -> SequenceModel {
        let vocab = Vocabulary::from_sentences(sample().iter().map(|s| s.sentence.as_str()));
        let config = ModelConfig {
            embed_dim: 4,
            hidden: 3,
            dense_units: 6,
            dropout: 0.25,
        };
        SequenceModel::new(vocab, config, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
    }

    #[test]
    fn random_tiny_model_passes() {
        let report = gradient_check(&tiny_model(11), &sample(), 1e-4);
        assert_eq!(report.per_tensor.len(), 17);
        for t in &report.per_tensor {
            assert!(t.max_relative_error < 1e-4, "{t:?}");
            assert!(t.max_abs_gradient > 1e-6, "no gradient reaches {t:?}");
        }
        assert!(report.parameters_checked > 300);
    }

    #[test]
    fn zero_weight_model_agrees() {
        let mut model = tiny_model(1);
        for t in model.params.tensors_mut() {
            t.fill(0.0);
        }
        let constant = vec![LabeledSentence::new("stroke stroke stroke", PicoLabel::O)];
        let report = gradient_check(&model, &constant, 1e-4);
        assert!(report.max_relative_error < 1e-6, "{report:?}");
    }

    #[test]
    fn steps_across_a_relu_kink_are_shrunk() {
        let mut model = tiny_model(11);
        model.config.dropout = 0.0;
        let cols = model.params.dense1_w.cols;
        model.params.dense1_w.data[..cols].fill(0.0);
        model.params.dense1_b.data[0] = 5e-5;
        let report = gradient_check(&model, &sample(), 1e-4);
        assert!(report.reduced_steps >= 1, "{report:?}");
        assert_eq!(report.skipped_kinks, 0);
        let bias = report.per_tensor.iter().find(|t| t.name == "dense1.b").unwrap();
        assert!(bias.max_relative_error < 1e-6, "{bias:?}");
    }

    #[test]
    fn dropping_the_cell_carry_is_caught() {
        let model = tiny_model(11);
        let good = gradient_check(&model, &sample(), 1e-4);
        let bad = gradient_check_without_cell_carry(&model, &sample(), 1e-4);
        assert!(good.max_relative_error < 1e-4);
        assert!(bad.max_relative_error > 1e-2, "{bad:?}");
    }
}
