//! Model and loss abstractions shared by every selector.

use crate::data::{Pool, WeightedExample};
use crate::error::{Error, Result};

/// Anything exposing per-class probabilities `P(y|x)`.
pub trait ProbabilisticClassifier {
    fn num_classes(&self) -> usize;

    /// Probability vector of length `num_classes()`.
    fn predict_proba(&self, features: &[f64]) -> Vec<f64>;

    fn predict(&self, features: &[f64]) -> usize {
        argmax(&self.predict_proba(features))
    }
}

/// Penultimate-layer representation used by diversity baselines.
pub trait EmbeddingExtractor {
    fn embed(&self, features: &[f64]) -> Vec<f64>;
}

/// A loss with range `[0, 1]`.
pub trait LossFunction {
    fn loss(&self, prediction: &[f64], label: usize) -> Result<f64>;
}

/// Index of the largest entry, ties to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn check_probability_vector(p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::invalid("empty probability vector"));
    }
    let mut sum = 0.0;
    for &v in p {
        if !(0.0..=1.0 + 1e-12).contains(&v) {
            return Err(Error::invalid(format!("probability {v} outside [0, 1]")));
        }
        sum += v;
    }
    if (sum - 1.0).abs() > 1e-6 {
        return Err(Error::invalid(format!("probabilities sum to {sum}, not 1")));
    }
    Ok(())
}

/// 0-1 loss of the argmax prediction.
pub fn zero_one_loss(prediction: &[f64], label: usize) -> Result<f64> {
    check_probability_vector(prediction)?;
    if label >= prediction.len() {
        return Err(Error::invalid(format!(
            "label {label} outside prediction of length {}",
            prediction.len()
        )));
    }
    Ok(if argmax(prediction) == label { 0.0 } else { 1.0 })
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroOneLoss;

impl LossFunction for ZeroOneLoss {
    fn loss(&self, prediction: &[f64], label: usize) -> Result<f64> {
        zero_one_loss(prediction, label)
    }
}

/// Cross-entropy divided by `max_nats` and clipped to `[0, 1]`.
#[derive(Debug, Clone, Copy)]
pub struct ClippedCrossEntropy {
    pub max_nats: f64,
}

impl Default for ClippedCrossEntropy {
    fn default() -> Self {
        Self { max_nats: 10.0 }
    }
}

impl ClippedCrossEntropy {
    pub fn new(max_nats: f64) -> Result<Self> {
        if !(max_nats > 0.0 && max_nats.is_finite()) {
            return Err(Error::invalid("clipping maximum must be positive and finite"));
        }
        Ok(Self { max_nats })
    }

    /// Loss for the probability assigned to the true label.
    pub fn of_probability(&self, p_true: f64) -> f64 {
        if p_true <= 0.0 {
            return 1.0;
        }
        (-p_true.ln() / self.max_nats).clamp(0.0, 1.0)
    }
}

impl LossFunction for ClippedCrossEntropy {
    fn loss(&self, prediction: &[f64], label: usize) -> Result<f64> {
        check_probability_vector(prediction)?;
        let p = *prediction
            .get(label)
            .ok_or_else(|| Error::invalid(format!("label {label} outside prediction")))?;
        Ok(self.of_probability(p))
    }
}

/// `(1/T) * sum_i w_i * loss(f(x_i), y_i)` over the selected examples, where
/// `T` is the original pool size.
pub fn weighted_empirical_loss<M, L>(
    model: &M,
    subset: &[WeightedExample],
    pool: &Pool,
    loss: &L,
) -> Result<f64>
where
    M: ProbabilisticClassifier + ?Sized,
    L: LossFunction + ?Sized,
{
    if pool.is_empty() {
        return Err(Error::invalid("empty pool"));
    }
    let mut total = 0.0;
    for s in subset {
        if s.example_index >= pool.len() {
            return Err(Error::invalid(format!(
                "subset index {} outside pool of size {}",
                s.example_index,
                pool.len()
            )));
        }
        let ex = pool.get(s.example_index);
        total += s.weight * loss.loss(&model.predict_proba(&ex.features), ex.label)?;
    }
    Ok(total / pool.len() as f64)
}
