//! Baseline selectors: random, top-k uncertainty, greedy k-center, and BADGE.
//!
//! Each selector picks `k` distinct active pool indices; the caller removes
//! them from the pool and retrains between rounds.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Pool;
use crate::error::{Error, Result};
use crate::model::{argmax, EmbeddingExtractor, ProbabilisticClassifier};
use crate::rng::RngStream;
use crate::scoring;

fn check_budget(pool: &Pool, k: usize) -> Result<()> {
    if pool.num_active() < k {
        return Err(Error::invalid(format!(
            "cannot select {k} examples from {} remaining",
            pool.num_active()
        )));
    }
    Ok(())
}

/// `k` active indices uniformly without replacement.
pub fn select_random(pool: &Pool, k: usize, rng: &mut RngStream) -> Result<Vec<usize>> {
    check_budget(pool, k)?;
    let mut active = pool.active_indices();
    let (chosen, _) = active.partial_shuffle(rng, k);
    Ok(chosen.to_vec())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UncertaintyScore {
    Margin,
    Entropy,
    LeastConfident,
}

impl UncertaintyScore {
    pub fn score(self, p: &[f64]) -> Result<f64> {
        match self {
            UncertaintyScore::Margin => scoring::margin_score(p),
            UncertaintyScore::Entropy => scoring::entropy_score(p),
            UncertaintyScore::LeastConfident => scoring::least_confident_score(p),
        }
    }
}

/// Indices of the `k` largest scores, ties to the lower index.
pub fn top_k_by_score(scored: &[(usize, f64)], k: usize) -> Vec<usize> {
    let mut v = scored.to_vec();
    v.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    v.into_iter().take(k).map(|(i, _)| i).collect()
}

pub fn select_topk_uncertainty<M>(pool: &Pool, model: &M, k: usize, score: UncertaintyScore) -> Result<Vec<usize>>
where
    M: ProbabilisticClassifier + ?Sized,
{
    check_budget(pool, k)?;
    let scored = pool
        .active_indices()
        .into_iter()
        .map(|i| Ok((i, score.score(&model.predict_proba(&pool.get(i).features))?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(top_k_by_score(&scored, k))
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Farthest-first traversal over `candidates`.
///
/// Distances are measured to the nearest of `centers` plus every point picked
/// so far. With no initial centers, `first` (if given) is taken as the first
/// pick. Ties go to the earlier candidate.
pub fn greedy_k_center(
    points: &[Vec<f64>],
    candidates: &[usize],
    centers: &[usize],
    first: Option<usize>,
    k: usize,
) -> Vec<usize> {
    let mut nearest: Vec<f64> = candidates
        .iter()
        .map(|&c| {
            centers
                .iter()
                .map(|&s| squared_distance(&points[c], &points[s]))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let mut picked_mask = vec![false; candidates.len()];
    let mut picks = Vec::with_capacity(k);
    while picks.len() < k {
        let slot = match (picks.is_empty() && centers.is_empty(), first) {
            (true, Some(f)) => candidates.iter().position(|&c| c == f).unwrap_or(0),
            _ => {
                let mut best: Option<usize> = None;
                for s in 0..candidates.len() {
                    if picked_mask[s] {
                        continue;
                    }
                    if best.is_none_or(|b| nearest[s] > nearest[b]) {
                        best = Some(s);
                    }
                }
                match best {
                    Some(b) => b,
                    None => break,
                }
            }
        };
        picked_mask[slot] = true;
        let c = candidates[slot];
        picks.push(c);
        for (s, &o) in candidates.iter().enumerate() {
            let d = squared_distance(&points[o], &points[c]);
            if d < nearest[s] {
                nearest[s] = d;
            }
        }
    }
    picks
}

/// Largest Euclidean distance from any point to its nearest center.
pub fn covering_radius(points: &[Vec<f64>], centers: &[usize]) -> f64 {
    points
        .iter()
        .map(|p| {
            centers
                .iter()
                .map(|&c| squared_distance(p, &points[c]))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
        .sqrt()
}

/// Greedy k-center over embeddings of the pool; `already_selected` seeds the centers.
pub fn select_coreset_kcenter<E>(
    pool: &Pool,
    extractor: &E,
    k: usize,
    already_selected: &[usize],
    rng: &mut RngStream,
) -> Result<Vec<usize>>
where
    E: EmbeddingExtractor + ?Sized,
{
    check_budget(pool, k)?;
    if k == 0 {
        return Ok(vec![]);
    }
    let embeddings: Vec<Vec<f64>> = pool.examples().iter().map(|e| extractor.embed(&e.features)).collect();
    let candidates = pool.active_indices();
    let first = if already_selected.is_empty() {
        Some(candidates[rng.gen_range(0..candidates.len())])
    } else {
        None
    };
    Ok(greedy_k_center(&embeddings, &candidates, already_selected, first, k))
}

/// `(p - onehot(argmax p)) (x) phi`, flattened class-major.
pub fn badge_gradient_embedding(p: &[f64], phi: &[f64]) -> Vec<f64> {
    let yhat = argmax(p);
    let mut out = Vec::with_capacity(p.len() * phi.len());
    for (c, &pc) in p.iter().enumerate() {
        let r = pc - if c == yhat { 1.0 } else { 0.0 };
        out.extend(phi.iter().map(|v| r * v));
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Seeding {
    /// Positions into the input point list.
    pub picks: Vec<usize>,
    /// True if some draw fell back to uniform because all distances were zero.
    pub fallback: bool,
}

/// k-means++ seeding: first pick uniform, then proportional to squared
/// distance to the nearest pick.
pub fn kmeans_pp_seed(points: &[Vec<f64>], k: usize, rng: &mut RngStream) -> Seeding {
    let n = points.len();
    let k = k.min(n);
    let mut picks = Vec::with_capacity(k);
    let mut picked = vec![false; n];
    let mut nearest = vec![f64::INFINITY; n];
    let mut fallback = false;
    while picks.len() < k {
        let total: f64 = (0..n).filter(|&i| !picked[i]).map(|i| nearest[i]).sum();
        let next = if picks.is_empty() || !(total > 0.0) || !total.is_finite() {
            if !picks.is_empty() {
                fallback = true;
            }
            let free: Vec<usize> = (0..n).filter(|&i| !picked[i]).collect();
            free[rng.gen_range(0..free.len())]
        } else {
            let u = rng.gen::<f64>() * total;
            let mut acc = 0.0;
            let mut choice = None;
            for i in (0..n).filter(|&i| !picked[i]) {
                acc += nearest[i];
                if nearest[i] > 0.0 {
                    choice = Some(i);
                    if u < acc {
                        break;
                    }
                }
            }
            choice.expect("positive total implies a positive-weight point")
        };
        picked[next] = true;
        picks.push(next);
        for i in 0..n {
            let d = squared_distance(&points[i], &points[next]);
            if d < nearest[i] {
                nearest[i] = d;
            }
        }
    }
    Seeding { picks, fallback }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BadgeSelection {
    pub indices: Vec<usize>,
    pub fallback: bool,
}

/// BADGE: k-means++ seeding over gradient embeddings of the remaining pool.
///
/// With `partitions > 1` the remaining pool is split uniformly at random into
/// that many shards, each contributing an equal share of `k`.
pub fn select_badge<M>(pool: &Pool, model: &M, k: usize, partitions: usize, rng: &mut RngStream) -> Result<BadgeSelection>
where
    M: ProbabilisticClassifier + EmbeddingExtractor + ?Sized,
{
    check_budget(pool, k)?;
    if partitions == 0 {
        return Err(Error::invalid("partitions must be positive"));
    }
    let mut active = pool.active_indices();
    if partitions > 1 {
        active.shuffle(rng);
    }
    let mut indices = Vec::with_capacity(k);
    let mut fallback = false;
    for part in 0..partitions {
        let shard: Vec<usize> = active.iter().skip(part).step_by(partitions).copied().collect();
        let quota = k / partitions + usize::from(part < k % partitions);
        if quota > shard.len() {
            return Err(Error::invalid(format!(
                "partition {part} holds {} examples but must supply {quota}",
                shard.len()
            )));
        }
        let grads: Vec<Vec<f64>> = shard
            .iter()
            .map(|&i| {
                let x = &pool.get(i).features;
                badge_gradient_embedding(&model.predict_proba(x), &model.embed(x))
            })
            .collect();
        let s = kmeans_pp_seed(&grads, quota, rng);
        fallback |= s.fallback;
        indices.extend(s.picks.into_iter().map(|j| shard[j]));
    }
    Ok(BadgeSelection { indices, fallback })
}
