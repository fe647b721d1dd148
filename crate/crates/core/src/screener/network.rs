use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tensor::{sigmoid, softmax, Tensor};
use super::vocab::Vocabulary;
use super::{PicoLabel, ScreenerError};

/// Shape and regularization settings of a [`SequenceModel`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub embed_dim: usize,
    pub hidden: usize,
    pub dense_units: usize,
    pub dropout: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            embed_dim: 64,
            hidden: 32,
            dense_units: 32,
            dropout: 0.3,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ScreenerError> {
        if self.embed_dim == 0 || self.hidden == 0 || self.dense_units == 0 {
            return Err(ScreenerError::InvalidConfig("dimensions must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(ScreenerError::InvalidConfig(format!(
                "dropout must be in [0, 1), got {}",
                self.dropout
            )));
        }
        Ok(())
    }
}

/// One LSTM direction. Gate rows are stacked `[input, forget, candidate, output]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub w: Tensor,
    pub u: Tensor,
    pub b: Tensor,
}

impl LstmParams {
    fn init<R: Rng>(input: usize, hidden: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (hidden as f64).sqrt();
        let mut b = Tensor::zeros(4 * hidden, 1);
        b.data[hidden..2 * hidden].iter_mut().for_each(|v| *v = 1.0);
        Self {
            w: Tensor::uniform(4 * hidden, input, bound, rng),
            u: Tensor::uniform(4 * hidden, hidden, bound, rng),
            b,
        }
    }

    fn zeros_like(&self) -> Self {
        Self {
            w: Tensor::zeros(self.w.rows, self.w.cols),
            u: Tensor::zeros(self.u.rows, self.u.cols),
            b: Tensor::zeros(self.b.rows, 1),
        }
    }

    fn hidden(&self) -> usize {
        self.u.cols
    }
}

/// All trainable tensors. Gradients use the same layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub embedding: Tensor,
    /// Layer-1 forward, layer-1 backward, layer-2 forward, layer-2 backward.
    pub lstm: [LstmParams; 4],
    pub dense1_w: Tensor,
    pub dense1_b: Tensor,
    pub dense2_w: Tensor,
    pub dense2_b: Tensor,
}

pub const TENSOR_NAMES: [&str; 17] = [
    "embedding",
    "l1f.w", "l1f.u", "l1f.b",
    "l1b.w", "l1b.u", "l1b.b",
    "l2f.w", "l2f.u", "l2f.b",
    "l2b.w", "l2b.u", "l2b.b",
    "dense1.w", "dense1.b", "dense2.w", "dense2.b",
];

impl Params {
    pub fn init<R: Rng>(vocab_size: usize, config: &ModelConfig, rng: &mut R) -> Self {
        let (d, h, m) = (config.embed_dim, config.hidden, config.dense_units);
        let embedding = Tensor::uniform(vocab_size, d, 0.5, rng);
        let lstm = [
            LstmParams::init(d, h, rng),
            LstmParams::init(d, h, rng),
            LstmParams::init(2 * h, h, rng),
            LstmParams::init(2 * h, h, rng),
        ];
        let b1 = 1.0 / ((2 * h) as f64).sqrt();
        let b2 = 1.0 / (m as f64).sqrt();
        Self {
            embedding,
            lstm,
            dense1_w: Tensor::uniform(m, 2 * h, b1, rng),
            dense1_b: Tensor::zeros(m, 1),
            dense2_w: Tensor::uniform(PicoLabel::COUNT, m, b2, rng),
            dense2_b: Tensor::zeros(PicoLabel::COUNT, 1),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            embedding: Tensor::zeros(self.embedding.rows, self.embedding.cols),
            lstm: [
                self.lstm[0].zeros_like(),
                self.lstm[1].zeros_like(),
                self.lstm[2].zeros_like(),
                self.lstm[3].zeros_like(),
            ],
            dense1_w: Tensor::zeros(self.dense1_w.rows, self.dense1_w.cols),
            dense1_b: Tensor::zeros(self.dense1_b.rows, 1),
            dense2_w: Tensor::zeros(self.dense2_w.rows, self.dense2_w.cols),
            dense2_b: Tensor::zeros(self.dense2_b.rows, 1),
        }
    }

    /// Tensors in [`TENSOR_NAMES`] order.
    pub fn tensors(&self) -> Vec<&Tensor> {
        let mut out = vec![&self.embedding];
        for l in &self.lstm {
            out.extend([&l.w, &l.u, &l.b]);
        }
        out.extend([&self.dense1_w, &self.dense1_b, &self.dense2_w, &self.dense2_b]);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = vec![&mut self.embedding];
        for l in &mut self.lstm {
            out.extend([&mut l.w, &mut l.u, &mut l.b]);
        }
        out.extend([
            &mut self.dense1_w,
            &mut self.dense1_b,
            &mut self.dense2_w,
            &mut self.dense2_b,
        ]);
        out
    }

    /// Inverse of [`Params::tensors`]. Returns `None` unless exactly 17 tensors are given.
    pub fn from_tensors(tensors: Vec<Tensor>) -> Option<Self> {
        let [embedding, a, b, c, d, e, f, g, h, i, j, k, l, w1, b1, w2, b2]: [Tensor; 17] =
            tensors.try_into().ok()?;
        let lstm = |w, u, b| LstmParams { w, u, b };
        Some(Self {
            embedding,
            lstm: [lstm(a, b, c), lstm(d, e, f), lstm(g, h, i), lstm(j, k, l)],
            dense1_w: w1,
            dense1_b: b1,
            dense2_w: w2,
            dense2_b: b2,
        })
    }

    pub fn norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|t| t.data.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.data.iter().all(|v| v.is_finite()))
    }
}

fn cross_entropy(p: f64) -> f64 {
    if p.is_nan() {
        f64::NAN
    } else {
        -p.max(f64::MIN_POSITIVE).ln()
    }
}

/// Per-step state kept for backpropagation.
#[derive(Debug, Clone)]
struct StepCache {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    i: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
    o: Vec<f64>,
    tanh_c: Vec<f64>,
}

/// Runs one direction over `inputs` in the given order. Returns outputs in the same order.
fn lstm_forward(p: &LstmParams, inputs: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<StepCache>) {
    let h = p.hidden();
    let mut h_prev = vec![0.0; h];
    let mut c_prev = vec![0.0; h];
    let mut outputs = Vec::with_capacity(inputs.len());
    let mut caches = Vec::with_capacity(inputs.len());
    for x in inputs {
        let mut z = p.b.data.clone();
        p.w.matvec_acc(x, &mut z);
        p.u.matvec_acc(&h_prev, &mut z);
        let i: Vec<f64> = z[..h].iter().map(|&v| sigmoid(v)).collect();
        let f: Vec<f64> = z[h..2 * h].iter().map(|&v| sigmoid(v)).collect();
        let g: Vec<f64> = z[2 * h..3 * h].iter().map(|&v| v.tanh()).collect();
        let o: Vec<f64> = z[3 * h..].iter().map(|&v| sigmoid(v)).collect();
        let c: Vec<f64> = (0..h).map(|k| f[k] * c_prev[k] + i[k] * g[k]).collect();
        let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
        let out: Vec<f64> = (0..h).map(|k| o[k] * tanh_c[k]).collect();
        caches.push(StepCache {
            x: x.clone(),
            h_prev: std::mem::replace(&mut h_prev, out.clone()),
            c_prev: std::mem::replace(&mut c_prev, c),
            i,
            f,
            g,
            o,
            tanh_c,
        });
        outputs.push(out);
    }
    (outputs, caches)
}

/// Backpropagation through time for one direction. `d_out[t]` is the loss gradient with respect to
/// output `t` (processing order). Accumulates parameter gradients and returns input gradients.
fn lstm_backward(
    p: &LstmParams,
    grads: &mut LstmParams,
    caches: &[StepCache],
    d_out: &[Vec<f64>],
    keep_cell_carry: bool,
) -> Vec<Vec<f64>> {
    let h = p.hidden();
    let mut dh_next = vec![0.0; h];
    let mut dc_next = vec![0.0; h];
    let mut dx = vec![Vec::new(); caches.len()];
    let mut dz = vec![0.0; 4 * h];
    for t in (0..caches.len()).rev() {
        let s = &caches[t];
        for k in 0..h {
            let dh = d_out[t][k] + dh_next[k];
            let d_o = dh * s.tanh_c[k];
            let dc = dc_next[k] + dh * s.o[k] * (1.0 - s.tanh_c[k] * s.tanh_c[k]);
            let di = dc * s.g[k];
            let dg = dc * s.i[k];
            let df = dc * s.c_prev[k];
            dc_next[k] = if keep_cell_carry { dc * s.f[k] } else { 0.0 };
            dz[k] = di * s.i[k] * (1.0 - s.i[k]);
            dz[h + k] = df * s.f[k] * (1.0 - s.f[k]);
            dz[2 * h + k] = dg * (1.0 - s.g[k] * s.g[k]);
            dz[3 * h + k] = d_o * s.o[k] * (1.0 - s.o[k]);
        }
        grads.w.outer_acc(&dz, &s.x);
        grads.u.outer_acc(&dz, &s.h_prev);
        grads.b.add_assign(&dz);
        let mut dxt = vec![0.0; s.x.len()];
        p.w.matvec_t_acc(&dz, &mut dxt);
        dx[t] = dxt;
        dh_next.iter_mut().for_each(|v| *v = 0.0);
        p.u.matvec_t_acc(&dz, &mut dh_next);
    }
    dx
}

struct BiCache {
    fwd: Vec<StepCache>,
    bwd: Vec<StepCache>,
}

/// Runs both directions and concatenates `[forward; backward]` per position.
fn bi_forward(fwd: &LstmParams, bwd: &LstmParams, inputs: &[Vec<f64>]) -> (Vec<Vec<f64>>, BiCache) {
    let (out_f, cache_f) = lstm_forward(fwd, inputs);
    let reversed: Vec<Vec<f64>> = inputs.iter().rev().cloned().collect();
    let (mut out_b, cache_b) = lstm_forward(bwd, &reversed);
    out_b.reverse();
    let outputs = out_f
        .into_iter()
        .zip(out_b)
        .map(|(mut a, b)| {
            a.extend(b);
            a
        })
        .collect();
    (
        outputs,
        BiCache {
            fwd: cache_f,
            bwd: cache_b,
        },
    )
}

fn bi_backward(
    params: (&LstmParams, &LstmParams),
    grads: (&mut LstmParams, &mut LstmParams),
    cache: &BiCache,
    d_out: &[Vec<f64>],
    keep_cell_carry: bool,
) -> Vec<Vec<f64>> {
    let h = params.0.hidden();
    let d_f: Vec<Vec<f64>> = d_out.iter().map(|d| d[..h].to_vec()).collect();
    let d_b: Vec<Vec<f64>> = d_out.iter().rev().map(|d| d[h..].to_vec()).collect();
    let dx_f = lstm_backward(params.0, grads.0, &cache.fwd, &d_f, keep_cell_carry);
    let mut dx_b = lstm_backward(params.1, grads.1, &cache.bwd, &d_b, keep_cell_carry);
    dx_b.reverse();
    dx_f
        .into_iter()
        .zip(dx_b)
        .map(|(a, b)| a.iter().zip(&b).map(|(x, y)| x + y).collect())
        .collect()
}

/// Intermediate activations of one sentence, exposed for inspection.
#[derive(Debug, Clone)]
pub struct SentenceEncoding {
    pub layer1: Vec<Vec<f64>>,
    pub layer2: Vec<Vec<f64>>,
    pub pooled: Vec<f64>,
    pub probabilities: Vec<f64>,
}

struct ForwardCache {
    tokens: Vec<usize>,
    layer1: BiCache,
    layer2: BiCache,
    steps: usize,
    pooled: Vec<f64>,
    pre_relu: Vec<f64>,
    dropped: Vec<f64>,
    mask: Vec<f64>,
    probs: Vec<f64>,
}

/// Two stacked Bi-LSTM layers, mean pooling, dense(ReLU), dropout, dense, softmax.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceModel {
    pub config: ModelConfig,
    pub vocab: Vocabulary,
    pub params: Params,
}

impl SequenceModel {
    pub fn new<R: Rng>(vocab: Vocabulary, config: ModelConfig, rng: &mut R) -> Result<Self, ScreenerError> {
        config.validate()?;
        let params = Params::init(vocab.len(), &config, rng);
        Ok(Self { config, vocab, params })
    }

    /// Checks tensor shapes against the config and vocabulary, and that every value is finite.
    pub fn validate(&self) -> Result<(), ScreenerError> {
        self.config.validate()?;
        let (v, d, h, m) = (
            self.vocab.len(),
            self.config.embed_dim,
            self.config.hidden,
            self.config.dense_units,
        );
        let mut expected = vec![(v, d)];
        for input in [d, d, 2 * h, 2 * h] {
            expected.extend([(4 * h, input), (4 * h, h), (4 * h, 1)]);
        }
        expected.extend([(m, 2 * h), (m, 1), (PicoLabel::COUNT, m), (PicoLabel::COUNT, 1)]);
        for ((t, (rows, cols)), name) in self.params.tensors().iter().zip(expected).zip(TENSOR_NAMES) {
            if t.rows != rows || t.cols != cols || t.data.len() != rows * cols {
                return Err(ScreenerError::InvalidModel(format!(
                    "{name}: expected {rows}x{cols}, found {}x{}",
                    t.rows, t.cols
                )));
            }
        }
        if !self.params.is_finite() {
            return Err(ScreenerError::InvalidModel("non-finite parameter".into()));
        }
        Ok(())
    }

    fn embed(&self, tokens: &[usize]) -> Vec<Vec<f64>> {
        tokens.iter().map(|&t| self.params.embedding.row(t).to_vec()).collect()
    }

    /// Inference pass (dropout is identity).
    pub fn encode(&self, tokens: &[usize]) -> SentenceEncoding {
        let ones = vec![1.0; self.config.dense_units];
        let (cache, layer1, layer2) = self.forward_cached(tokens, &ones);
        SentenceEncoding {
            layer1,
            layer2,
            pooled: cache.pooled,
            probabilities: cache.probs,
        }
    }

    pub fn predict(&self, tokens: &[usize]) -> Vec<f64> {
        self.encode(tokens).probabilities
    }

    pub fn predict_sentence(&self, sentence: &str) -> Vec<f64> {
        self.predict(&self.vocab.encode(sentence))
    }

    fn forward_cached(&self, tokens: &[usize], mask: &[f64]) -> (ForwardCache, Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let p = &self.params;
        let tokens: Vec<usize> = if tokens.is_empty() { vec![0] } else { tokens.to_vec() };
        let x = self.embed(&tokens);
        let (out1, c1) = bi_forward(&p.lstm[0], &p.lstm[1], &x);
        let (out2, c2) = bi_forward(&p.lstm[2], &p.lstm[3], &out1);
        let steps = out2.len();
        let width = 2 * self.config.hidden;
        let mut pooled = vec![0.0; width];
        for row in &out2 {
            for (acc, v) in pooled.iter_mut().zip(row) {
                *acc += v;
            }
        }
        pooled.iter_mut().for_each(|v| *v /= steps as f64);
        let mut pre_relu = p.dense1_b.data.clone();
        p.dense1_w.matvec_acc(&pooled, &mut pre_relu);
        let dropped: Vec<f64> = pre_relu
            .iter()
            .zip(mask)
            .map(|(&z, &m)| z.max(0.0) * m)
            .collect();
        let mut logits = p.dense2_b.data.clone();
        p.dense2_w.matvec_acc(&dropped, &mut logits);
        let probs = softmax(&logits);
        (
            ForwardCache {
                tokens,
                layer1: c1,
                layer2: c2,
                steps,
                pooled,
                pre_relu,
                dropped,
                mask: mask.to_vec(),
                probs,
            },
            out1,
            out2,
        )
    }

    /// Inverted-dropout mask: each unit kept with probability `1 - p` and scaled by `1 / (1 - p)`.
    pub(crate) fn sample_mask<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let p = self.config.dropout;
        let scale = 1.0 / (1.0 - p);
        (0..self.config.dense_units)
            .map(|_| if p > 0.0 && rng.gen::<f64>() < p { 0.0 } else { scale })
            .collect()
    }

    /// Cross-entropy loss of one example under a fixed dropout mask.
    pub(crate) fn loss_with_mask(&self, tokens: &[usize], label: PicoLabel, mask: &[f64]) -> f64 {
        let (cache, _, _) = self.forward_cached(tokens, mask);
        cross_entropy(cache.probs[label.index()])
    }

    /// Like [`Self::loss_with_mask`], plus which dense units sit on the active side of the ReLU.
    pub(crate) fn loss_and_active_units(&self, tokens: &[usize], label: PicoLabel, mask: &[f64]) -> (f64, Vec<bool>) {
        let (cache, _, _) = self.forward_cached(tokens, mask);
        let active = cache.pre_relu.iter().map(|&z| z > 0.0).collect();
        (cross_entropy(cache.probs[label.index()]), active)
    }

    /// Forward plus backward for one example; accumulates into `grads` and returns the loss.
    pub(crate) fn accumulate_gradients(
        &self,
        tokens: &[usize],
        label: PicoLabel,
        mask: &[f64],
        grads: &mut Params,
        keep_cell_carry: bool,
    ) -> f64 {
        let p = &self.params;
        let (cache, _, _) = self.forward_cached(tokens, mask);
        let target = label.index();
        let loss = cross_entropy(cache.probs[target]);

        let mut d_logits = cache.probs.clone();
        d_logits[target] -= 1.0;
        grads.dense2_w.outer_acc(&d_logits, &cache.dropped);
        grads.dense2_b.add_assign(&d_logits);
        let mut d_dropped = vec![0.0; cache.dropped.len()];
        p.dense2_w.matvec_t_acc(&d_logits, &mut d_dropped);
        let d_pre: Vec<f64> = d_dropped
            .iter()
            .zip(&cache.mask)
            .zip(&cache.pre_relu)
            .map(|((&d, &m), &z)| if z > 0.0 { d * m } else { 0.0 })
            .collect();
        grads.dense1_w.outer_acc(&d_pre, &cache.pooled);
        grads.dense1_b.add_assign(&d_pre);
        let mut d_pooled = vec![0.0; cache.pooled.len()];
        p.dense1_w.matvec_t_acc(&d_pre, &mut d_pooled);

        let scale = 1.0 / cache.steps as f64;
        let d_out2: Vec<Vec<f64>> = (0..cache.steps)
            .map(|_| d_pooled.iter().map(|v| v * scale).collect())
            .collect();
        let [g0, g1, g2, g3] = &mut grads.lstm;
        let d_out1 = bi_backward(
            (&p.lstm[2], &p.lstm[3]),
            (g2, g3),
            &cache.layer2,
            &d_out2,
            keep_cell_carry,
        );
        let d_x = bi_backward(
            (&p.lstm[0], &p.lstm[1]),
            (g0, g1),
            &cache.layer1,
            &d_out1,
            keep_cell_carry,
        );
        for (&tok, dx) in cache.tokens.iter().zip(&d_x) {
            for (g, v) in grads.embedding.row_mut(tok).iter_mut().zip(dx) {
                *g += v;
            }
        }
        loss
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny(dim: usize, hidden: usize) -> SequenceModel {
        let vocab = Vocabulary::from_sentences(["a b c d e f g h"].iter().copied());
        let config = ModelConfig {
            embed_dim: dim,
            hidden,
            dense_units: 5,
            dropout: 0.3,
        };
        SequenceModel::new(vocab, config, &mut ChaCha8Rng::seed_from_u64(3)).unwrap()
    }

    #[test]
    fn recurrent_output_width_is_twice_hidden() {
        let model = tiny(16, 8);
        let tokens: Vec<usize> = (0..32).map(|i| i % model.vocab.len()).collect();
        let enc = model.encode(&tokens);
        assert_eq!(enc.layer1.len(), 32);
        assert!(enc.layer1.iter().all(|r| r.len() == 16));
        assert!(enc.layer2.iter().all(|r| r.len() == 16));
        assert_eq!(enc.pooled.len(), 16);
        assert_eq!(enc.probabilities.len(), 6);
    }

    #[test]
    fn fresh_model_validates_and_forget_bias_is_one() {
        let model = tiny(4, 3);
        model.validate().unwrap();
        let b = &model.params.lstm[0].b.data;
        assert_eq!(&b[3..6], &[1.0, 1.0, 1.0]);
        assert_eq!(&b[0..3], &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn shape_corruption_is_detected() {
        let mut model = tiny(4, 3);
        model.params.dense1_w = Tensor::zeros(5, 7);
        assert!(matches!(model.validate(), Err(ScreenerError::InvalidModel(_))));
    }

    #[test]
    fn forward_direction_is_causal() {
        // Forward-direction state at step 0 must not depend on later tokens.
        let model = tiny(4, 3);
        let a = model.encode(&[1, 2, 3]);
        let b = model.encode(&[1, 5, 6]);
        assert_eq!(&a.layer1[0][..3], &b.layer1[0][..3]);
        assert_ne!(&a.layer1[0][3..], &b.layer1[0][3..]);
    }
}
