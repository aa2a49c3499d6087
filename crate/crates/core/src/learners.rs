//! Importance-weighted softmax regression, optionally with one tanh hidden layer.
//!
//! Training minimizes `sum_i w_i * CE(f(x_i), y_i)` by mini-batch SGD. Per-example
//! gradients are multiplied by their weight and accumulated with
//! [`ExactSum`], so the update does not depend on example order.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Pool, WeightedExample};
use crate::error::{Error, Result};
use crate::exact::ExactSum;
use crate::model::{EmbeddingExtractor, ProbabilisticClassifier};
use crate::rng::RngStream;

/// Learning rates searched when grid tuning is enabled.
pub const LEARNING_RATE_GRID: [f64; 5] = [0.001, 0.002, 0.005, 0.01, 0.1];

/// Trains a model on a weighted selection of pool examples.
pub trait WeightedTrainer {
    type Model: ProbabilisticClassifier + EmbeddingExtractor;

    fn train(
        &self,
        pool: &Pool,
        examples: &[WeightedExample],
        rng: &mut RngStream,
    ) -> Result<Self::Model>;
}

/// How per-example gradients in a batch are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Reduction {
    /// `(1/|B|) * sum_B w * grad`
    #[default]
    Mean,
    /// `sum_B w * grad`; with full batches, weight `m` equals `m` copies exactly.
    Sum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainerConfig {
    /// 0 gives plain softmax regression.
    pub hidden_dim: usize,
    pub learning_rate: f64,
    /// `None` trains full-batch.
    pub sgd_batch_size: Option<usize>,
    pub max_epochs: usize,
    /// Stop once the relative change of the epoch objective falls below this.
    pub tolerance: f64,
    pub reduction: Reduction,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            hidden_dim: 0,
            learning_rate: 0.1,
            sgd_batch_size: Some(100),
            max_epochs: 200,
            tolerance: 1e-5,
            reduction: Reduction::Mean,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning_rate must be positive"));
        }
        if self.sgd_batch_size == Some(0) {
            return Err(Error::invalid("sgd_batch_size must be positive"));
        }
        if self.max_epochs == 0 {
            return Err(Error::invalid("max_epochs must be positive"));
        }
        Ok(())
    }
}

/// Softmax network with flat parameter storage.
///
/// Layout without a hidden layer: `W[c][d]`, `b[c]`. With hidden width `h`:
/// `W1[h][d]`, `b1[h]`, `W2[c][h]`, `b2[c]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftmaxNet {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub num_classes: usize,
    pub params: Vec<f64>,
}

struct Forward {
    hidden: Vec<f64>,
    probs: Vec<f64>,
}

impl SoftmaxNet {
    pub fn num_params(input_dim: usize, hidden_dim: usize, num_classes: usize) -> usize {
        if hidden_dim == 0 {
            num_classes * (input_dim + 1)
        } else {
            hidden_dim * (input_dim + 1) + num_classes * (hidden_dim + 1)
        }
    }

    /// Xavier-uniform weights, zero biases.
    pub fn init(input_dim: usize, hidden_dim: usize, num_classes: usize, rng: &mut RngStream) -> Self {
        let mut params = vec![0.0; Self::num_params(input_dim, hidden_dim, num_classes)];
        let mut fill = |params: &mut [f64], offset: usize, fan_out: usize, fan_in: usize| {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for p in &mut params[offset..offset + fan_out * fan_in] {
                *p = rng.gen_range(-limit..limit);
            }
        };
        if hidden_dim == 0 {
            fill(&mut params, 0, num_classes, input_dim);
        } else {
            fill(&mut params, 0, hidden_dim, input_dim);
            let off = hidden_dim * (input_dim + 1);
            fill(&mut params, off, num_classes, hidden_dim);
        }
        Self {
            input_dim,
            hidden_dim,
            num_classes,
            params,
        }
    }

    fn affine(w: &[f64], b: &[f64], x: &[f64], out: &mut Vec<f64>) {
        let d = x.len();
        out.clear();
        out.extend(b.iter().enumerate().map(|(i, &bi)| {
            let row = &w[i * d..(i + 1) * d];
            bi + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
        }));
    }

    fn logits(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (d, h, c) = (self.input_dim, self.hidden_dim, self.num_classes);
        let mut hidden = Vec::new();
        let mut logits = Vec::new();
        if h == 0 {
            Self::affine(&self.params[..c * d], &self.params[c * d..c * (d + 1)], x, &mut logits);
        } else {
            Self::affine(&self.params[..h * d], &self.params[h * d..h * (d + 1)], x, &mut hidden);
            hidden.iter_mut().for_each(|v| *v = v.tanh());
            let off = h * (d + 1);
            Self::affine(&self.params[off..off + c * h], &self.params[off + c * h..], &hidden, &mut logits);
        }
        (hidden, logits)
    }

    fn forward(&self, x: &[f64]) -> Forward {
        let (hidden, logits) = self.logits(x);
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut probs: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
        let s: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= s);
        Forward { hidden, probs }
    }

    /// Cross-entropy in nats via log-sum-exp.
    pub fn cross_entropy(&self, x: &[f64], y: usize) -> f64 {
        let (_, logits) = self.logits(x);
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
        lse - logits[y]
    }

    /// Unweighted cross-entropy gradient of one example, written into `grad`.
    pub fn example_gradient(&self, x: &[f64], y: usize, grad: &mut [f64]) {
        let (d, h, c) = (self.input_dim, self.hidden_dim, self.num_classes);
        let f = self.forward(x);
        let mut dz = f.probs;
        dz[y] -= 1.0;
        if h == 0 {
            for k in 0..c {
                for j in 0..d {
                    grad[k * d + j] = dz[k] * x[j];
                }
                grad[c * d + k] = dz[k];
            }
        } else {
            let off = h * (d + 1);
            let w2 = &self.params[off..off + c * h];
            for k in 0..c {
                for j in 0..h {
                    grad[off + k * h + j] = dz[k] * f.hidden[j];
                }
                grad[off + c * h + k] = dz[k];
            }
            for j in 0..h {
                let da: f64 = (0..c).map(|k| w2[k * h + j] * dz[k]).sum();
                let dpre = da * (1.0 - f.hidden[j] * f.hidden[j]);
                for i in 0..d {
                    grad[j * d + i] = dpre * x[i];
                }
                grad[h * d + j] = dpre;
            }
        }
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_vec(self)?)?;
        Ok(())
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_slice(&std::fs::read(path)?)?)
    }

    pub fn accuracy(&self, pool: &Pool) -> f64 {
        if pool.is_empty() {
            return 0.0;
        }
        let correct = pool
            .examples()
            .iter()
            .filter(|e| self.predict(&e.features) == e.label)
            .count();
        correct as f64 / pool.len() as f64
    }
}

impl ProbabilisticClassifier for SoftmaxNet {
    fn num_classes(&self) -> usize {
        self.num_classes
    }

    fn predict_proba(&self, features: &[f64]) -> Vec<f64> {
        self.forward(features).probs
    }
}

impl EmbeddingExtractor for SoftmaxNet {
    fn embed(&self, features: &[f64]) -> Vec<f64> {
        if self.hidden_dim == 0 {
            features.to_vec()
        } else {
            self.forward(features).hidden
        }
    }
}

/// Weighted objective and gradient over a set of examples, both exactly summed.
struct Objective<'a> {
    pool: &'a Pool,
    examples: &'a [WeightedExample],
}

impl Objective<'_> {
    fn value(&self, model: &SoftmaxNet, reduction: Reduction) -> f64 {
        let mut acc = ExactSum::new();
        for e in self.examples {
            let ex = self.pool.get(e.example_index);
            acc.add_product(e.weight, model.cross_entropy(&ex.features, ex.label));
        }
        match reduction {
            Reduction::Sum => acc.value(),
            Reduction::Mean => acc.value() / self.examples.len() as f64,
        }
    }

    fn gradient(
        &self,
        model: &SoftmaxNet,
        batch: &[usize],
        reduction: Reduction,
        acc: &mut [ExactSum],
        scratch: &mut [f64],
        out: &mut [f64],
    ) {
        acc.iter_mut().for_each(ExactSum::clear);
        for &b in batch {
            let e = &self.examples[b];
            if e.weight == 0.0 {
                continue;
            }
            let ex = self.pool.get(e.example_index);
            model.example_gradient(&ex.features, ex.label, scratch);
            for (a, &g) in acc.iter_mut().zip(scratch.iter()) {
                a.add_product(e.weight, g);
            }
        }
        let scale = match reduction {
            Reduction::Sum => 1.0,
            Reduction::Mean => 1.0 / batch.len() as f64,
        };
        for (o, a) in out.iter_mut().zip(acc.iter()) {
            *o = a.value() * scale;
        }
    }
}

/// Full-batch gradient of the weighted objective under `reduction`.
pub fn full_batch_gradient(
    model: &SoftmaxNet,
    pool: &Pool,
    examples: &[WeightedExample],
    reduction: Reduction,
) -> Vec<f64> {
    let n = model.params.len();
    let obj = Objective { pool, examples };
    let batch: Vec<usize> = (0..examples.len()).collect();
    let mut acc = vec![ExactSum::new(); n];
    let mut scratch = vec![0.0; n];
    let mut out = vec![0.0; n];
    obj.gradient(model, &batch, reduction, &mut acc, &mut scratch, &mut out);
    out
}

/// Trains from a fresh initialization drawn from `rng`.
pub fn train_weighted(
    examples: &[WeightedExample],
    pool: &Pool,
    config: &TrainerConfig,
    rng: &mut RngStream,
) -> Result<SoftmaxNet> {
    config.validate()?;
    if examples.is_empty() {
        return Err(Error::invalid("cannot train on an empty selection"));
    }
    if let Some(e) = examples.iter().find(|e| !(e.weight >= 0.0 && e.weight.is_finite())) {
        return Err(Error::invalid(format!("invalid weight {} on example {}", e.weight, e.example_index)));
    }
    let model = SoftmaxNet::init(pool.dim(), config.hidden_dim, pool.num_classes(), rng);
    continue_training(model, examples, pool, config, rng)
}

/// Runs SGD epochs starting from `model`.
pub fn continue_training(
    mut model: SoftmaxNet,
    examples: &[WeightedExample],
    pool: &Pool,
    config: &TrainerConfig,
    rng: &mut RngStream,
) -> Result<SoftmaxNet> {
    let n = examples.len();
    let np = model.params.len();
    let obj = Objective { pool, examples };
    let batch_size = config.sgd_batch_size.unwrap_or(n).min(n);
    let mut order: Vec<usize> = (0..n).collect();
    let mut acc = vec![ExactSum::new(); np];
    let mut scratch = vec![0.0; np];
    let mut grad = vec![0.0; np];
    let mut prev = obj.value(&model, config.reduction);
    if !prev.is_finite() {
        return Err(Error::Divergence("non-finite initial loss".into()));
    }
    for epoch in 0..config.max_epochs {
        if batch_size < n {
            order.shuffle(rng);
        }
        for batch in order.chunks(batch_size) {
            obj.gradient(&model, batch, config.reduction, &mut acc, &mut scratch, &mut grad);
            for (p, g) in model.params.iter_mut().zip(&grad) {
                *p -= config.learning_rate * g;
            }
        }
        let cur = obj.value(&model, config.reduction);
        if !cur.is_finite() || model.params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Divergence(format!("non-finite loss at epoch {epoch}")));
        }
        let rel = (prev - cur).abs() / prev.abs().max(f64::MIN_POSITIVE);
        prev = cur;
        if rel < config.tolerance {
            break;
        }
    }
    Ok(model)
}

/// Trains with each grid learning rate and keeps the one with the best pool accuracy
/// (ties to the smaller rate). Every candidate starts from the same stream state.
pub fn select_learning_rate(
    examples: &[WeightedExample],
    pool: &Pool,
    config: &TrainerConfig,
    rng: &RngStream,
) -> Result<f64> {
    let mut best = (f64::NEG_INFINITY, LEARNING_RATE_GRID[0]);
    for &lr in &LEARNING_RATE_GRID {
        let cfg = TrainerConfig {
            learning_rate: lr,
            ..config.clone()
        };
        let mut r = rng.clone();
        let acc = match train_weighted(examples, pool, &cfg, &mut r) {
            Ok(m) => m.accuracy(pool),
            Err(Error::Divergence(_)) => continue,
            Err(e) => return Err(e),
        };
        if acc > best.0 {
            best = (acc, lr);
        }
    }
    Ok(best.1)
}

/// Compares the analytic gradient of `weight * CE` against central differences
/// with step `1e-5`; returns the largest relative error over all parameters.
///
/// Relative error is `|a - n| / max(|a|, |n|, 1e-6)`, so coordinates whose
/// true gradient is essentially zero are judged on absolute error.
pub fn gradient_check(model: &SoftmaxNet, features: &[f64], label: usize, weight: f64) -> f64 {
    const STEP: f64 = 1e-5;
    let mut analytic = vec![0.0; model.params.len()];
    model.example_gradient(features, label, &mut analytic);
    analytic.iter_mut().for_each(|g| *g *= weight);
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    for k in 0..model.params.len() {
        let orig = probe.params[k];
        probe.params[k] = orig + STEP;
        let up = weight * probe.cross_entropy(features, label);
        probe.params[k] = orig - STEP;
        let down = weight * probe.cross_entropy(features, label);
        probe.params[k] = orig;
        let numeric = (up - down) / (2.0 * STEP);
        let a = analytic[k];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max(rel);
    }
    worst
}

/// [`WeightedTrainer`] backed by [`train_weighted`].
#[derive(Debug, Clone, Default)]
pub struct SoftmaxTrainer {
    pub config: TrainerConfig,
}

impl SoftmaxTrainer {
    pub fn new(config: TrainerConfig) -> Self {
        Self { config }
    }
}

impl WeightedTrainer for SoftmaxTrainer {
    type Model = SoftmaxNet;

    fn train(&self, pool: &Pool, examples: &[WeightedExample], rng: &mut RngStream) -> Result<SoftmaxNet> {
        train_weighted(examples, pool, &self.config, rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::LabeledExample;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn normal(rng: &mut RngStream) -> f64 {
        rng.sample(StandardNormal)
    }

    fn blobs(n: usize, spread: f64, seed: u64) -> Pool {
        let mut rng = RngStream::new(seed);
        let centers = [[-3.0, 0.0], [3.0, 0.0], [0.0, 4.0]];
        let ex = (0..n)
            .map(|i| {
                let y = i % 3;
                let f = vec![
                    centers[y][0] + spread * normal(&mut rng),
                    centers[y][1] + spread * normal(&mut rng),
                ];
                LabeledExample::new(f, y)
            })
            .collect();
        Pool::new(ex, 3).unwrap()
    }

    fn unit_all(pool: &Pool) -> Vec<WeightedExample> {
        (0..pool.len()).map(|i| WeightedExample::unit(i, 1.0, 0)).collect()
    }

    #[test]
    fn probabilities_stay_valid_at_extreme_logits() {
        let mut rng = RngStream::new(1);
        let mut m = SoftmaxNet::init(2, 0, 3, &mut rng);
        m.params.iter_mut().for_each(|p| *p *= 1e4);
        for x in [[1e3, -1e3], [-1e3, 1e3], [0.0, 0.0]] {
            let p = m.predict_proba(&x);
            assert!(p.iter().all(|v| v.is_finite() && *v >= 0.0));
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            for y in 0..3 {
                assert!(m.cross_entropy(&x, y).is_finite());
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = RngStream::new(5);
        for hidden in [0, 4] {
            let m = SoftmaxNet::init(3, hidden, 4, &mut rng);
            let x: Vec<f64> = (0..3).map(|_| normal(&mut rng)).collect();
            assert!(gradient_check(&m, &x, 2, 1.7) < 1e-5);
        }
    }

    #[test]
    fn zero_weight_contributes_nothing() {
        let pool = blobs(6, 1.0, 2);
        let m = SoftmaxNet::init(2, 0, 3, &mut RngStream::new(0));
        let ex = vec![WeightedExample { weight: 0.0, ..WeightedExample::unit(0, 1.0, 0) }];
        let g = full_batch_gradient(&m, &pool, &ex, Reduction::Sum);
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn separable_blobs_are_fit_exactly() {
        let pool = blobs(300, 0.5, 3);
        let m = train_weighted(&unit_all(&pool), &pool, &TrainerConfig::default(), &mut RngStream::new(9)).unwrap();
        assert_eq!(m.accuracy(&pool), 1.0);
    }

    #[test]
    fn training_is_deterministic() {
        let pool = blobs(150, 1.5, 4);
        let cfg = TrainerConfig { hidden_dim: 3, ..TrainerConfig::default() };
        let a = train_weighted(&unit_all(&pool), &pool, &cfg, &mut RngStream::new(11)).unwrap();
        let b = train_weighted(&unit_all(&pool), &pool, &cfg, &mut RngStream::new(11)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn doubled_weights_with_halved_rate_give_identical_trajectory() {
        let pool = blobs(90, 2.0, 6);
        let cfg = TrainerConfig { sgd_batch_size: None, max_epochs: 50, learning_rate: 0.2, ..Default::default() };
        let ones = unit_all(&pool);
        let twos: Vec<_> = ones.iter().map(|e| WeightedExample { weight: 2.0, ..*e }).collect();
        let a = train_weighted(&ones, &pool, &cfg, &mut RngStream::new(1)).unwrap();
        let half = TrainerConfig { learning_rate: 0.1, ..cfg };
        let b = train_weighted(&twos, &pool, &half, &mut RngStream::new(1)).unwrap();
        assert_eq!(a.params, b.params);
    }

    #[test]
    fn converged_model_is_stationary() {
        let pool = blobs(120, 3.0, 8);
        let cfg = TrainerConfig {
            sgd_batch_size: None,
            max_epochs: 20_000,
            tolerance: 0.0,
            learning_rate: 0.5,
            ..Default::default()
        };
        let ex = unit_all(&pool);
        let m = train_weighted(&ex, &pool, &cfg, &mut RngStream::new(2)).unwrap();
        let g = full_batch_gradient(&m, &pool, &ex, Reduction::Mean);
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(norm < 1e-4, "gradient norm {norm}");
    }

    #[test]
    fn checkpoint_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let m = SoftmaxNet::init(3, 2, 2, &mut RngStream::new(3));
        let p = dir.path().join("m.json");
        m.save_json(&p).unwrap();
        assert_eq!(SoftmaxNet::load_json(&p).unwrap(), m);
    }

    #[test]
    fn rejects_empty_and_bad_weights() {
        let pool = blobs(3, 1.0, 1);
        let cfg = TrainerConfig::default();
        assert!(train_weighted(&[], &pool, &cfg, &mut RngStream::new(0)).is_err());
        let bad = [WeightedExample { weight: f64::NAN, ..WeightedExample::unit(0, 1.0, 0) }];
        assert!(train_weighted(&bad, &pool, &cfg, &mut RngStream::new(0)).is_err());
    }

    #[test]
    fn embedding_is_hidden_layer_or_raw_features() {
        let m0 = SoftmaxNet::init(3, 0, 2, &mut RngStream::new(0));
        assert_eq!(m0.embed(&[1.0, 2.0, 3.0]), vec![1.0, 2.0, 3.0]);
        let m1 = SoftmaxNet::init(3, 5, 2, &mut RngStream::new(0));
        assert_eq!(m1.embed(&[1.0, 2.0, 3.0]).len(), 5);
    }
}
