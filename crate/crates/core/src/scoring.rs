//! Sampling-probability and uncertainty formulas over model probability vectors.
//!
//! `entropy_disagreement` and `loss_entropy` use the natural logarithm, which
//! keeps both in `[0, 1/e]`. `normalized_entropy` and
//! `multilabel_binary_entropy` are in bits. Every formula uses `0 * log 0 = 0`.

use crate::error::{Error, Result};
use crate::model::check_probability_vector;

/// `p * ln(p)` with the `0 * ln 0 = 0` convention.
#[inline]
fn xlnx(p: f64) -> f64 {
    if p <= 0.0 {
        0.0
    } else {
        p * p.ln()
    }
}

#[inline]
fn xlog2x(p: f64) -> f64 {
    if p <= 0.0 {
        0.0
    } else {
        p * p.log2()
    }
}

fn check_unit(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} = {v} outside [0, 1]")))
    }
}

/// `|pf ln pf - pg ln pg|` for two models' probabilities of the true label.
pub fn entropy_disagreement(pf_y: f64, pg_y: f64) -> Result<f64> {
    check_unit("pf_y", pf_y)?;
    check_unit("pg_y", pg_y)?;
    Ok((xlnx(pf_y) - xlnx(pg_y)).abs())
}

/// Shannon entropy in bits divided by `log2(c)`.
pub fn normalized_entropy(p: &[f64]) -> Result<f64> {
    if p.len() < 2 {
        return Err(Error::invalid("normalized entropy needs at least two classes"));
    }
    check_probability_vector(p)?;
    let h: f64 = -p.iter().map(|&v| xlog2x(v)).sum::<f64>();
    Ok((h / (p.len() as f64).log2()).clamp(0.0, 1.0))
}

/// `-p ln p` of the true-label probability.
pub fn loss_entropy(pf_y: f64) -> Result<f64> {
    check_unit("pf_y", pf_y)?;
    Ok(-xlnx(pf_y))
}

/// Binary entropy in bits of a positive-label probability.
pub fn multilabel_binary_entropy(pf_pos: f64) -> Result<f64> {
    check_unit("pf_pos", pf_pos)?;
    Ok((-xlog2x(pf_pos) - xlog2x(1.0 - pf_pos)).clamp(0.0, 1.0))
}

/// Top-two class indices, ties to the lowest index.
fn top_two(p: &[f64]) -> (usize, usize) {
    let first = crate::model::argmax(p);
    let mut second = usize::MAX;
    for (i, &v) in p.iter().enumerate() {
        if i != first && (second == usize::MAX || v > p[second]) {
            second = i;
        }
    }
    (first, second)
}

/// `1 - (P[y1] - P[y2])` for the two most probable classes.
pub fn margin_score(p: &[f64]) -> Result<f64> {
    if p.len() < 2 {
        return Err(Error::invalid("margin needs at least two classes"));
    }
    check_probability_vector(p)?;
    let (a, b) = top_two(p);
    Ok((1.0 - (p[a] - p[b])).clamp(0.0, 1.0))
}

pub fn least_confident_score(p: &[f64]) -> Result<f64> {
    check_probability_vector(p)?;
    let max = p.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok((1.0 - max).clamp(0.0, 1.0))
}

/// Shannon entropy in nats (unnormalized).
pub fn entropy_score(p: &[f64]) -> Result<f64> {
    check_probability_vector(p)?;
    Ok(-p.iter().map(|&v| xlnx(v)).sum::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const TOL: f64 = 1e-9;

    fn close(a: f64, b: f64) {
        assert!((a - b).abs() < TOL, "{a} vs {b}");
    }

    #[test]
    fn entropy_disagreement_examples() {
        close(entropy_disagreement(0.5, 0.5).unwrap(), 0.0);
        close(entropy_disagreement(1.0, 1.0).unwrap(), 0.0);
        close(entropy_disagreement(0.9, 0.5).unwrap(), 0.251_749_126_187_928_98);
        assert!(entropy_disagreement(1.1, 0.5).is_err());
        assert!(entropy_disagreement(0.5, -0.1).is_err());
    }

    #[test]
    fn normalized_entropy_examples() {
        close(normalized_entropy(&[0.25; 4]).unwrap(), 1.0);
        close(normalized_entropy(&[1.0, 0.0, 0.0, 0.0]).unwrap(), 0.0);
        close(normalized_entropy(&[0.7, 0.1, 0.1, 0.1]).unwrap(), 0.678_389_824_723_519_7);
        assert!(normalized_entropy(&[1.0]).is_err());
    }

    #[test]
    fn loss_entropy_examples() {
        close(loss_entropy(1.0).unwrap(), 0.0);
        close(loss_entropy(0.5).unwrap(), 0.346_573_590_279_972_65);
        close(loss_entropy((-1.0f64).exp()).unwrap(), 0.367_879_441_171_442_32);
        assert!(loss_entropy(2.0).is_err());
    }

    #[test]
    fn multilabel_examples() {
        close(multilabel_binary_entropy(0.5).unwrap(), 1.0);
        close(multilabel_binary_entropy(0.0).unwrap(), 0.0);
        close(multilabel_binary_entropy(0.9).unwrap(), 0.468_995_593_589_281_2);
    }

    #[test]
    fn uncertainty_examples() {
        close(margin_score(&[0.6, 0.3, 0.1]).unwrap(), 0.7);
        close(margin_score(&[0.5, 0.5]).unwrap(), 1.0);
        close(margin_score(&[1.0, 0.0, 0.0]).unwrap(), 0.0);
        assert!(margin_score(&[1.0]).is_err());
        close(least_confident_score(&[0.6, 0.3, 0.1]).unwrap(), 0.4);
        close(least_confident_score(&[1.0, 0.0]).unwrap(), 0.0);
        close(least_confident_score(&[0.25; 4]).unwrap(), 0.75);
        close(entropy_score(&[0.0, 1.0, 0.0]).unwrap(), 0.0);
        close(entropy_score(&[0.2; 5]).unwrap(), 5f64.ln());
        close(entropy_score(&[0.7, 0.3]).unwrap(), 0.610_864_302_054_893_5);
    }

    fn prob_vector() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..1.0, 2..8).prop_map(|v| {
            let s: f64 = v.iter().sum();
            if s == 0.0 {
                let n = v.len();
                vec![1.0 / n as f64; n]
            } else {
                v.iter().map(|x| x / s).collect()
            }
        })
    }

    proptest! {
        #[test]
        fn disagreement_is_symmetric_and_zero_on_diagonal(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            prop_assert_eq!(entropy_disagreement(a, a).unwrap(), 0.0);
            prop_assert_eq!(entropy_disagreement(a, b).unwrap(), entropy_disagreement(b, a).unwrap());
        }

        #[test]
        fn normalized_entropy_is_permutation_invariant(p in prob_vector(), rot in 0usize..8) {
            let mut q = p.clone();
            let n = q.len();
            q.rotate_left(rot % n);
            q.reverse();
            let a = normalized_entropy(&p).unwrap();
            let b = normalized_entropy(&q).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn sampling_probabilities_in_unit_interval(p in prob_vector(), y in 0usize..8) {
            let y = y % p.len();
            let q: Vec<f64> = p.iter().rev().cloned().collect();
            for v in [
                entropy_disagreement(p[y], q[y]).unwrap(),
                normalized_entropy(&p).unwrap(),
                loss_entropy(p[y]).unwrap(),
                multilabel_binary_entropy(p[y]).unwrap(),
                margin_score(&p).unwrap(),
                least_confident_score(&p).unwrap(),
            ] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
    }
}
