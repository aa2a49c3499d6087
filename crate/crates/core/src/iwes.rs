//! Batch-streaming importance-weighted subset selection.
//!
//! Each round retrains the model(s) from scratch on everything selected so
//! far, then streams the remaining pool in random order. A candidate is kept
//! with probability `p` (from [`crate::scoring`]) and stored with weight
//! `min(1/p, u)`. When a full pass ends before the batch is filled, the
//! remaining candidates are streamed again with probabilities scaled by
//! `1 + j/10`, where `j` is the number of completed passes.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Pool, WeightedExample};
use crate::error::{Error, Result};
use crate::learners::WeightedTrainer;
use crate::model::ProbabilisticClassifier;
use crate::rng::{keys, RngStream};
use crate::scoring;
use crate::trace::{SelectionRecord, SelectionTrace};

/// Which sampling probability drives acceptance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IwesVariant {
    /// Entropy disagreement between two independently initialized models.
    Dis,
    /// Normalized predictive entropy; ignores the label.
    Ent,
    /// `-P(y|x) ln P(y|x)` of the true label.
    Loss,
    /// Binary entropy of the true-label probability, read as a positive-label probability.
    MultilabelEnt,
}

impl IwesVariant {
    pub fn needs_twin(self) -> bool {
        matches!(self, IwesVariant::Dis)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CandidateOrder {
    /// Fresh random order over the remaining pool on every pass.
    #[default]
    Reshuffle,
    /// One random order per round; later passes skip removed entries.
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IwesConfig {
    pub seed_size: usize,
    pub batch_size: usize,
    pub rounds: usize,
    pub weight_cap: f64,
    pub variant: IwesVariant,
    pub max_passes: usize,
    /// Lower bound applied to every base probability before pass rescaling.
    pub probability_floor: f64,
    pub order: CandidateOrder,
}

impl Default for IwesConfig {
    fn default() -> Self {
        Self {
            seed_size: 100,
            batch_size: 100,
            rounds: 5,
            weight_cap: 2.0,
            variant: IwesVariant::Dis,
            max_passes: 100,
            probability_floor: 0.0,
            order: CandidateOrder::Reshuffle,
        }
    }
}

impl IwesConfig {
    pub fn validate(&self, pool_size: usize) -> Result<()> {
        if self.seed_size == 0 {
            return Err(Error::invalid("seed_size must be positive"));
        }
        if self.batch_size == 0 && self.rounds > 0 {
            return Err(Error::invalid("batch_size must be positive"));
        }
        let budget = self.seed_size + self.rounds * self.batch_size;
        if budget > pool_size {
            return Err(Error::invalid(format!(
                "seed_size + rounds * batch_size = {budget} exceeds pool size {pool_size}"
            )));
        }
        if !(self.weight_cap > 1.0) {
            return Err(Error::invalid("weight_cap must exceed 1"));
        }
        if self.max_passes == 0 {
            return Err(Error::invalid("max_passes must be positive"));
        }
        if !(0.0..=1.0).contains(&self.probability_floor) {
            return Err(Error::invalid("probability_floor must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// `min(1, p * (1 + j/10))`.
pub fn stream_pass_rescale(base_p: f64, pass_index: usize) -> f64 {
    (base_p * (1.0 + pass_index as f64 / 10.0)).min(1.0)
}

/// Sampling probability of one labeled example under the configured variant.
pub fn sampling_probability<M: ProbabilisticClassifier + ?Sized>(
    variant: IwesVariant,
    f: &M,
    g: Option<&M>,
    features: &[f64],
    label: usize,
) -> Result<f64> {
    let pf = f.predict_proba(features);
    match variant {
        IwesVariant::Dis => {
            let g = g.ok_or_else(|| Error::Internal("disagreement needs two models".into()))?;
            let pg = g.predict_proba(features);
            scoring::entropy_disagreement(pf[label].clamp(0.0, 1.0), pg[label].clamp(0.0, 1.0))
        }
        IwesVariant::Ent => scoring::normalized_entropy(&pf),
        IwesVariant::Loss => scoring::loss_entropy(pf[label].clamp(0.0, 1.0)),
        IwesVariant::MultilabelEnt => scoring::multilabel_binary_entropy(pf[label].clamp(0.0, 1.0)),
    }
}

/// Draws `k` examples uniformly without replacement and removes them from `pool`.
pub fn draw_seed_set(pool: &mut Pool, k: usize, rng: &mut RngStream) -> Result<Vec<usize>> {
    let mut active = pool.active_indices();
    if active.len() < k {
        return Err(Error::invalid(format!(
            "seed set of {k} requested from {} active examples",
            active.len()
        )));
    }
    let (chosen, _) = active.partial_shuffle(rng, k);
    let chosen = chosen.to_vec();
    for &i in &chosen {
        pool.remove(i)?;
    }
    Ok(chosen)
}

#[derive(Debug, Clone)]
pub struct IwesOutcome<M> {
    pub trace: SelectionTrace,
    pub model: M,
}

impl<M> IwesOutcome<M> {
    pub fn selected(&self) -> Vec<WeightedExample> {
        self.trace.selected()
    }
}

pub fn run_iwes<T: WeightedTrainer>(
    pool: &Pool,
    config: &IwesConfig,
    trainer: &T,
    rng: &RngStream,
) -> Result<IwesOutcome<T::Model>> {
    run_iwes_observed(pool, config, trainer, rng, |_, _| None)
}

/// Like [`run_iwes`], calling `observe(r, model)` with the model trained on
/// everything selected through round `r` (round 0 is the seed set). The
/// returned value is stored as that round's accuracy.
pub fn run_iwes_observed<T, F>(
    pool: &Pool,
    config: &IwesConfig,
    trainer: &T,
    rng: &RngStream,
    mut observe: F,
) -> Result<IwesOutcome<T::Model>>
where
    T: WeightedTrainer,
    F: FnMut(usize, &T::Model) -> Option<f64>,
{
    if pool.num_active() == 0 {
        return Err(Error::invalid("empty pool"));
    }
    config.validate(pool.num_active())?;
    let mut pool = pool.clone();
    let mut seed_rng = rng.derive(keys::SEED_SET);
    let mut train_rng = rng.derive(keys::TRAINER);
    let mut select_rng = rng.derive(keys::SELECTOR);

    let mut trace = SelectionTrace::default();
    let total = pool.num_active() as f64;
    let seed = draw_seed_set(&mut pool, config.seed_size, &mut seed_rng)?;
    let seed_p = config.seed_size as f64 / total;
    trace.records.extend(seed.iter().map(|&i| SelectionRecord {
        round: 0,
        pass: 0,
        pool_index: i,
        p: seed_p,
        weight: 1.0,
    }));
    trace.push_round(0, 0, 0, false);

    for round in 1..=config.rounds {
        let selected = trace.selected();
        let f = trainer.train(&pool, &selected, &mut train_rng.fork())?;
        let g = if config.variant.needs_twin() {
            Some(trainer.train(&pool, &selected, &mut train_rng.fork())?)
        } else {
            None
        };
        let acc = observe(round - 1, &f);
        trace.set_accuracy(round - 1, acc);

        let mut cache: Vec<Option<f64>> = vec![None; pool.len()];
        let mut order = pool.active_indices();
        order.shuffle(&mut select_rng);
        let mut accepted = 0;
        let mut trials = 0;
        let mut pass = 0;
        'passes: loop {
            for &i in &order {
                if !pool.is_active(i) {
                    continue;
                }
                let base = match cache[i] {
                    Some(p) => p,
                    None => {
                        let ex = pool.get(i);
                        let p = sampling_probability(config.variant, &f, g.as_ref(), &ex.features, ex.label)?;
                        cache[i] = Some(p);
                        p
                    }
                };
                let p = stream_pass_rescale(base.max(config.probability_floor), pass);
                if p <= 0.0 {
                    continue;
                }
                trials += 1;
                if select_rng.gen::<f64>() < p {
                    pool.remove(i)?;
                    let w = WeightedExample::importance(i, p, config.weight_cap, round);
                    trace.records.push(SelectionRecord {
                        round,
                        pass,
                        pool_index: i,
                        p,
                        weight: w.weight,
                    });
                    accepted += 1;
                    if accepted == config.batch_size {
                        break 'passes;
                    }
                }
            }
            pass += 1;
            if pass >= config.max_passes || pool.num_active() == 0 {
                trace.push_round(round, pass, trials, false);
                return Err(Error::PoolExhausted {
                    round,
                    passes: pass,
                    selected: accepted,
                    wanted: config.batch_size,
                    partial: Box::new(trace),
                });
            }
            match config.order {
                CandidateOrder::Reshuffle => {
                    order = pool.active_indices();
                    order.shuffle(&mut select_rng);
                }
                CandidateOrder::Fixed => order.retain(|&i| pool.is_active(i)),
            }
        }
        trace.push_round(round, pass, trials, false);
    }

    let model = trainer.train(&pool, &trace.selected(), &mut train_rng.fork())?;
    let acc = observe(config.rounds, &model);
    trace.set_accuracy(config.rounds, acc);
    Ok(IwesOutcome { trace, model })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::LabeledExample;
    use crate::model::EmbeddingExtractor;
    use std::collections::HashSet;

    /// Outputs the same probability vector everywhere.
    #[derive(Debug, Clone, PartialEq)]
    struct Constant(Vec<f64>);

    impl ProbabilisticClassifier for Constant {
        fn num_classes(&self) -> usize {
            self.0.len()
        }
        fn predict_proba(&self, _: &[f64]) -> Vec<f64> {
            self.0.clone()
        }
    }

    impl EmbeddingExtractor for Constant {
        fn embed(&self, f: &[f64]) -> Vec<f64> {
            f.to_vec()
        }
    }

    /// Ignores its data and stream: every call returns the same model.
    struct Fixed(Vec<f64>);

    impl WeightedTrainer for Fixed {
        type Model = Constant;
        fn train(&self, _: &Pool, _: &[WeightedExample], _: &mut RngStream) -> Result<Constant> {
            Ok(Constant(self.0.clone()))
        }
    }

    /// Model whose probabilities depend on the init stream, so twins differ.
    struct Noisy;

    impl WeightedTrainer for Noisy {
        type Model = Constant;
        fn train(&self, _: &Pool, _: &[WeightedExample], rng: &mut RngStream) -> Result<Constant> {
            let a: f64 = rng.gen_range(0.05..0.95);
            Ok(Constant(vec![a, 1.0 - a]))
        }
    }

    fn pool(n: usize, c: usize, label: usize) -> Pool {
        Pool::new((0..n).map(|i| LabeledExample::new(vec![i as f64], label)).collect(), c).unwrap()
    }

    fn cfg(k0: usize, k: usize, r: usize, variant: IwesVariant) -> IwesConfig {
        IwesConfig {
            seed_size: k0,
            batch_size: k,
            rounds: r,
            variant,
            ..Default::default()
        }
    }

    #[test]
    fn rescale_examples() {
        assert_eq!(stream_pass_rescale(0.2, 0), 0.2);
        assert!((stream_pass_rescale(0.2, 5) - 0.3).abs() < 1e-15);
        assert_eq!(stream_pass_rescale(0.9, 3), 1.0);
    }

    #[test]
    fn whole_pool_seed_set() {
        let p = pool(10, 2, 0);
        let out = run_iwes(&p, &cfg(10, 1, 0, IwesVariant::Ent), &Fixed(vec![0.5, 0.5]), &RngStream::new(1)).unwrap();
        let idx: HashSet<_> = out.trace.records.iter().map(|r| r.pool_index).collect();
        assert_eq!(idx.len(), 10);
        assert!(out.trace.records.iter().all(|r| r.weight == 1.0 && r.round == 0));
    }

    #[test]
    fn uniform_model_accepts_first_streamed_candidates() {
        let p = pool(50, 4, 1);
        let out = run_iwes(&p, &cfg(5, 7, 3, IwesVariant::Ent), &Fixed(vec![0.25; 4]), &RngStream::new(2)).unwrap();
        for s in &out.trace.rounds[1..] {
            assert_eq!(s.selected, 7);
            assert_eq!(s.trials, 7);
            assert_eq!(s.passes, 0);
        }
        assert!(out.trace.records.iter().all(|r| r.weight == 1.0));
    }

    fn h2(q: f64) -> f64 {
        -q * q.log2() - (1.0 - q) * (1.0 - q).log2()
    }

    #[test]
    fn half_probability_gives_weight_two_and_two_trials_per_acceptance() {
        // Bisect for q with binary entropy just below 0.5.
        let (mut lo, mut hi) = (1e-6, 0.5);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if h2(mid) <= 0.5 {
                lo = mid
            } else {
                hi = mid
            }
        }
        let q = lo;
        assert!(h2(q) <= 0.5 && 0.5 - h2(q) < 1e-12);
        let model = vec![(1.0 - q) / 2.0, (1.0 - q) / 2.0, q];
        let n_accept = 10_000;
        let p = pool(3 * n_accept, 3, 2);
        let out = run_iwes(
            &p,
            &cfg(1, n_accept, 1, IwesVariant::MultilabelEnt),
            &Fixed(model),
            &RngStream::new(3),
        )
        .unwrap();
        let round = &out.trace.rounds[1];
        assert_eq!(round.passes, 0);
        assert!(out.trace.records[1..].iter().all(|r| r.weight == 2.0));
        let trials = round.trials as f64;
        let n = n_accept as f64;
        // trials = sum of n geometric(1/2) counts: mean 2n, variance 2n
        assert!((trials - 2.0 * n).abs() <= 3.0 * (2.0 * n).sqrt(), "trials {trials}");
    }

    #[test]
    fn identical_twins_never_accept() {
        let p = pool(20, 2, 0);
        let mut c = cfg(2, 3, 1, IwesVariant::Dis);
        c.max_passes = 3;
        match run_iwes(&p, &c, &Fixed(vec![0.3, 0.7]), &RngStream::new(4)) {
            Err(Error::PoolExhausted { round, passes, selected, partial, .. }) => {
                assert_eq!((round, passes, selected), (1, 3, 0));
                assert_eq!(partial.num_selected(), 2);
            }
            other => panic!("expected exhaustion, got {other:?}"),
        }
    }

    #[test]
    fn no_index_selected_twice_and_weights_capped() {
        let p = pool(200, 2, 0);
        let mut c = cfg(10, 20, 5, IwesVariant::Dis);
        c.max_passes = 1000;
        let out = run_iwes(&p, &c, &Noisy, &RngStream::new(5)).unwrap();
        let idx: HashSet<_> = out.trace.records.iter().map(|r| r.pool_index).collect();
        assert_eq!(idx.len(), out.trace.records.len());
        assert_eq!(out.trace.records.len(), 10 + 5 * 20);
        for r in &out.trace.records[10..] {
            assert!(r.weight <= c.weight_cap);
            assert!(r.weight >= 1.0);
            assert_eq!(r.weight, (1.0 / r.p).min(c.weight_cap));
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let p = pool(200, 2, 0);
        let mut c = cfg(10, 20, 3, IwesVariant::Dis);
        c.max_passes = 1000;
        let a = run_iwes(&p, &c, &Noisy, &RngStream::new(6)).unwrap();
        let b = run_iwes(&p, &c, &Noisy, &RngStream::new(6)).unwrap();
        assert_eq!(a.trace, b.trace);
    }

    #[test]
    fn config_validation() {
        let p = pool(10, 2, 0);
        assert!(run_iwes(&p, &cfg(5, 3, 2, IwesVariant::Ent), &Fixed(vec![0.5, 0.5]), &RngStream::new(0)).is_err());
        let mut c = cfg(2, 1, 1, IwesVariant::Ent);
        c.weight_cap = 1.0;
        assert!(c.validate(10).is_err());
    }

    #[test]
    fn observer_sees_every_round() {
        let p = pool(60, 4, 1);
        let mut seen = vec![];
        let out = run_iwes_observed(&p, &cfg(5, 5, 3, IwesVariant::Ent), &Fixed(vec![0.25; 4]), &RngStream::new(7), |r, _| {
            seen.push(r);
            Some(r as f64)
        })
        .unwrap();
        assert_eq!(seen, vec![0, 1, 2, 3]);
        assert_eq!(out.trace.rounds[2].accuracy, Some(2.0));
    }
}
