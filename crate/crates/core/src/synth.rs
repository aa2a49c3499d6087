//! Reproducible synthetic datasets and finite instances.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{LabeledExample, Pool};
use crate::error::{Error, Result};
use crate::iwesv::HypothesisTable;
use crate::model::ClippedCrossEntropy;
use crate::rng::RngStream;

/// Gaussian class clusters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlobsParams {
    pub n: usize,
    pub dim: usize,
    pub classes: usize,
    /// Per-coordinate standard deviation inside a cluster.
    pub spread: f64,
    /// Class means sit at `separation` times a random unit-variance direction.
    pub separation: f64,
    /// Probability of replacing a label with a uniformly drawn one.
    pub label_noise: f64,
}

impl Default for BlobsParams {
    fn default() -> Self {
        Self { n: 1000, dim: 2, classes: 2, spread: 1.0, separation: 4.0, label_noise: 0.0 }
    }
}

impl BlobsParams {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.dim == 0 || self.classes < 2 {
            return Err(Error::invalid("blobs need n >= 1, dim >= 1 and at least 2 classes"));
        }
        if !(self.spread >= 0.0 && self.spread.is_finite() && self.separation.is_finite()) {
            return Err(Error::invalid("blob spread and separation must be finite, spread >= 0"));
        }
        check_noise(self.label_noise)
    }
}

fn check_noise(noise: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&noise) {
        return Err(Error::invalid(format!("label noise {noise} outside [0, 1]")));
    }
    Ok(())
}

pub fn blobs(params: &BlobsParams, seed: u64) -> Result<Pool> {
    params.validate()?;
    let mut rng = RngStream::new(seed);
    let means: Vec<Vec<f64>> = (0..params.classes)
        .map(|_| {
            (0..params.dim)
                .map(|_| params.separation * rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect();
    let noise = Normal::new(0.0, params.spread).map_err(|e| Error::invalid(e.to_string()))?;
    let examples = (0..params.n)
        .map(|j| {
            let class = j % params.classes;
            let features = means[class].iter().map(|m| m + noise.sample(&mut rng)).collect();
            let label = if rng.gen::<f64>() < params.label_noise {
                rng.gen_range(0..params.classes)
            } else {
                class
            };
            LabeledExample::new(features, label)
        })
        .collect::<Vec<_>>();
    let mut examples = examples;
    examples.shuffle(&mut rng);
    Pool::new(examples, params.classes)
}

/// Two-dimensional XOR: uniform on `[-1, 1]^2`, label is the sign disagreement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct XorParams {
    pub n: usize,
    pub label_noise: f64,
}

impl Default for XorParams {
    fn default() -> Self {
        Self { n: 1000, label_noise: 0.0 }
    }
}

pub fn xor(params: &XorParams, seed: u64) -> Result<Pool> {
    if params.n == 0 {
        return Err(Error::invalid("xor needs n >= 1"));
    }
    check_noise(params.label_noise)?;
    let mut rng = RngStream::new(seed);
    let examples = (0..params.n)
        .map(|_| {
            let a: f64 = rng.gen_range(-1.0..1.0);
            let b: f64 = rng.gen_range(-1.0..1.0);
            let mut label = usize::from((a > 0.0) != (b > 0.0));
            if rng.gen::<f64>() < params.label_noise {
                label = 1 - label;
            }
            LabeledExample::new(vec![a, b], label)
        })
        .collect();
    Pool::new(examples, 2)
}

/// Threshold classifiers `h_i(x) = 1[x >= i / (H - 1)]` on a uniform grid
/// `x_j = (j + 0.5) / m`, with labels from one of them flipped at rate `noise`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdsParams {
    pub grid: usize,
    pub hypotheses: usize,
    pub true_index: usize,
    pub noise: f64,
    /// Size of the dataset sampled from the distribution.
    pub n: usize,
}

impl Default for ThresholdsParams {
    fn default() -> Self {
        Self { grid: 100, hypotheses: 21, true_index: 7, noise: 0.1, n: 1000 }
    }
}

/// A finite distribution over `(x, y)` pairs and the threshold class on it.
///
/// Columns of `table` are the pairs with positive probability; `table`
/// carries their probabilities, 0-1 losses, predictions and the per-label
/// loss tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdsInstance {
    pub params: ThresholdsParams,
    pub points: Vec<f64>,
    /// `(grid index, label)` of every column.
    pub columns: Vec<(usize, usize)>,
    pub table: HypothesisTable,
    pub h_star: usize,
    pub l_star: f64,
}

impl ThresholdsInstance {
    pub fn threshold(&self, h: usize) -> f64 {
        h as f64 / (self.params.hypotheses - 1) as f64
    }

    /// `n` i.i.d. draws from the distribution.
    pub fn sample(&self, n: usize, rng: &mut RngStream) -> Result<Pool> {
        let stream = crate::iwesv::draw_stream(&self.table, n, rng);
        let examples = stream
            .into_iter()
            .map(|c| {
                let (j, y) = self.columns[c];
                LabeledExample::new(vec![self.points[j]], y)
            })
            .collect();
        Pool::new(examples, 2)
    }
}

pub fn thresholds_1d(params: &ThresholdsParams) -> Result<ThresholdsInstance> {
    if params.grid == 0 || params.hypotheses < 2 {
        return Err(Error::invalid("thresholds need a nonempty grid and at least 2 hypotheses"));
    }
    if params.true_index >= params.hypotheses {
        return Err(Error::invalid("true threshold index outside the class"));
    }
    if !(0.0..0.5).contains(&params.noise) {
        return Err(Error::invalid(format!("threshold noise {} outside [0, 0.5)", params.noise)));
    }
    let m = params.grid;
    let points: Vec<f64> = (0..m).map(|j| (j as f64 + 0.5) / m as f64).collect();
    let predict = |h: usize, x: f64| usize::from(x >= h as f64 / (params.hypotheses - 1) as f64);
    let mut columns = Vec::new();
    let mut probs = Vec::new();
    for (j, &x) in points.iter().enumerate() {
        let clean = predict(params.true_index, x);
        for y in 0..2 {
            let p = if y == clean { 1.0 - params.noise } else { params.noise };
            if p > 0.0 {
                columns.push((j, y));
                probs.push(p / m as f64);
            }
        }
    }
    let mut values = Vec::with_capacity(params.hypotheses);
    let mut predictions = Vec::with_capacity(params.hypotheses);
    for h in 0..params.hypotheses {
        let preds: Vec<usize> = columns.iter().map(|&(j, _)| predict(h, points[j])).collect();
        values.push(
            preds
                .iter()
                .map(|&z| (0..2).map(|y| if y == z { 0.0 } else { 1.0 }).collect())
                .collect::<Vec<Vec<f64>>>(),
        );
        predictions.push(preds);
    }
    let labels = columns.iter().map(|c| c.1).collect();
    let names = (0..params.hypotheses)
        .map(|h| format!("theta={}", h as f64 / (params.hypotheses - 1) as f64))
        .collect();
    let table = HypothesisTable::from_per_label(values, labels)?
        .renamed(names)?
        .with_column_probabilities(normalize(probs))?
        .with_predictions(predictions)?;
    let h_star = table.best_hypothesis();
    let l_star = table.risk(h_star);
    Ok(ThresholdsInstance { params: params.clone(), points, columns, table, h_star, l_star })
}

fn normalize(mut probs: Vec<f64>) -> Vec<f64> {
    let s: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= s);
    probs
}

/// Random instance for the disagreement-coefficient inequality: each
/// hypothesis predicts a softmax of Gaussian logits on each example, scored
/// by clipped cross-entropy against every label. Column probabilities are
/// uniform.
pub fn random_clipped_ce_instance(
    hypotheses: usize,
    examples: usize,
    classes: usize,
    rng: &mut RngStream,
) -> Result<HypothesisTable> {
    if hypotheses == 0 || examples == 0 || classes < 2 {
        return Err(Error::invalid("instance needs a hypothesis, an example and 2 classes"));
    }
    let loss = ClippedCrossEntropy::default();
    let logit = Normal::new(0.0, 1.5).expect("valid normal");
    let values = (0..hypotheses)
        .map(|_| {
            (0..examples)
                .map(|_| {
                    let z: Vec<f64> = (0..classes).map(|_| logit.sample(rng)).collect();
                    let top = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let e: Vec<f64> = z.iter().map(|v| (v - top).exp()).collect();
                    let s: f64 = e.iter().sum();
                    e.iter().map(|v| loss.of_probability(v / s)).collect()
                })
                .collect()
        })
        .collect();
    let labels = (0..examples).map(|_| rng.gen_range(0..classes)).collect();
    HypothesisTable::from_per_label(values, labels)
}

/// What `make_synthetic` generates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SyntheticSpec {
    Blobs(BlobsParams),
    Xor(XorParams),
    #[serde(rename = "thresholds-1d")]
    Thresholds1d(ThresholdsParams),
}

/// Paths written by [`make_synthetic`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SyntheticFiles {
    pub dataset: PathBuf,
    /// Loss matrix CSV (thresholds only).
    pub hypotheses: Option<PathBuf>,
    /// Full instance JSON with the exact distribution (thresholds only).
    pub distribution: Option<PathBuf>,
}

/// Writes `dataset.csv` (and for thresholds `hypotheses.csv` and
/// `distribution.json`) into `dir`.
pub fn make_synthetic(spec: &SyntheticSpec, seed: u64, dir: impl AsRef<Path>) -> Result<SyntheticFiles> {
    let dir = dir.as_ref();
    let pool = match spec {
        SyntheticSpec::Blobs(p) => blobs(p, seed)?,
        SyntheticSpec::Xor(p) => xor(p, seed)?,
        SyntheticSpec::Thresholds1d(p) => {
            let inst = thresholds_1d(p)?;
            if p.n == 0 {
                return Err(Error::invalid("thresholds dataset needs n >= 1"));
            }
            let pool = inst.sample(p.n, &mut RngStream::new(seed))?;
            std::fs::create_dir_all(dir)?;
            let dataset = dir.join("dataset.csv");
            let hypotheses = dir.join("hypotheses.csv");
            let distribution = dir.join("distribution.json");
            pool.to_csv(&dataset)?;
            inst.table.to_csv(&hypotheses)?;
            std::fs::write(&distribution, serde_json::to_string_pretty(&inst)?)?;
            return Ok(SyntheticFiles { dataset, hypotheses: Some(hypotheses), distribution: Some(distribution) });
        }
    };
    std::fs::create_dir_all(dir)?;
    let dataset = dir.join("dataset.csv");
    pool.to_csv(&dataset)?;
    Ok(SyntheticFiles { dataset, hypotheses: None, distribution: None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::{train_weighted, TrainerConfig};
    use crate::WeightedExample;

    #[test]
    fn thresholds_realizable_has_zero_best_risk() {
        let inst = thresholds_1d(&ThresholdsParams { noise: 0.0, ..Default::default() }).unwrap();
        assert_eq!(inst.l_star, 0.0);
        assert_eq!(inst.h_star, 7);
        assert_eq!(inst.table.num_columns(), 100);
    }

    #[test]
    fn thresholds_noisy_best_risk_is_noise() {
        let inst = thresholds_1d(&ThresholdsParams::default()).unwrap();
        assert_eq!(inst.h_star, 7);
        assert!((inst.l_star - 0.1).abs() < 1e-12);
        assert_eq!(inst.table.num_columns(), 200);
        // neighbouring threshold misclassifies the 5 grid points between them
        assert!((inst.table.risk(8) - (0.1 + 0.05 * 0.8)).abs() < 1e-12);
    }

    #[test]
    fn thresholds_validation() {
        assert!(thresholds_1d(&ThresholdsParams { true_index: 21, ..Default::default() }).is_err());
        assert!(thresholds_1d(&ThresholdsParams { noise: 0.5, ..Default::default() }).is_err());
    }

    #[test]
    fn same_seed_same_files() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        for spec in [
            SyntheticSpec::Blobs(BlobsParams::default()),
            SyntheticSpec::Xor(XorParams::default()),
            SyntheticSpec::Thresholds1d(ThresholdsParams::default()),
        ] {
            let fa = make_synthetic(&spec, 9, a.path()).unwrap();
            let fb = make_synthetic(&spec, 9, b.path()).unwrap();
            assert_eq!(std::fs::read(&fa.dataset).unwrap(), std::fs::read(&fb.dataset).unwrap());
            if let (Some(x), Some(y)) = (fa.distribution, fb.distribution) {
                assert_eq!(std::fs::read(x).unwrap(), std::fs::read(y).unwrap());
            }
        }
    }

    #[test]
    fn separated_blobs_are_learnable() {
        let params = BlobsParams { n: 1000, dim: 2, classes: 3, spread: 0.5, separation: 6.0, label_noise: 0.0 };
        let pool = blobs(&params, 3).unwrap();
        let (train, test): (Vec<usize>, Vec<usize>) = (0..pool.len()).partition(|i| i % 5 != 0);
        let examples: Vec<_> = train.iter().map(|&i| WeightedExample::unit(i, 1.0, 0)).collect();
        let model = train_weighted(&examples, &pool, &TrainerConfig::default(), &mut RngStream::new(1)).unwrap();
        let acc = model.accuracy(&pool.subset(&test).unwrap());
        assert!(acc >= 0.99, "{acc}");
    }

    #[test]
    fn clipped_ce_instances_have_finite_slope_asymmetry() {
        let mut rng = RngStream::new(4);
        let t = random_clipped_ce_instance(5, 10, 3, &mut rng).unwrap();
        let k = crate::theory::slope_asymmetry(&t).unwrap();
        assert!(k.value.is_finite() && k.value >= 1.0);
    }
}
