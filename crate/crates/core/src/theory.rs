//! Exact finite-instance computation of disagreement quantities and
//! executable checks of the version-space sampler's guarantees.
//!
//! Every expectation is taken against the column distribution of a
//! [`HypothesisTable`], which is the data distribution itself for the
//! synthetic instances used here. Risks, distances, disagreement
//! coefficients and `E[p_t | F_{t-1}]` are therefore computed exactly.
//!
//! The supremum over radii in a disagreement coefficient is reduced to a
//! finite set: the numerator `E[max_{h in B(r)} |...|]` only changes where `r`
//! crosses some `rho(h, h*)`, and between those points the ratio decreases in
//! `r`, so the supremum over `r > 0` is attained at a positive distance.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::iwesv::{draw_stream, run_iwesv_observed, HypothesisTable, SlackVariant};
use crate::rng::RngStream;

/// Mean absolute difference of realized-label losses.
pub fn rho_s(table: &HypothesisTable, h: usize, h_star: usize) -> f64 {
    let (a, b) = (table.row(h), table.row(h_star));
    table
        .column_probabilities()
        .iter()
        .enumerate()
        .map(|(i, p)| p * (a[i] - b[i]).abs())
        .sum()
}

fn max_label_gap(table: &HypothesisTable, h: usize, h_star: usize, i: usize) -> f64 {
    let c = table.per_label().map_or(0, |p| p.num_labels);
    (0..c)
        .map(|y| (table.label_loss(h, i, y).unwrap() - table.label_loss(h_star, i, y).unwrap()).abs())
        .fold(0.0, f64::max)
}

/// Mean over examples of the largest loss difference over all labels.
pub fn rho_al(table: &HypothesisTable, h: usize, h_star: usize) -> Result<f64> {
    if table.per_label().is_none() {
        return Err(Error::invalid("label-free distance needs the per-label loss tensor"));
    }
    Ok(table
        .column_probabilities()
        .iter()
        .enumerate()
        .map(|(i, p)| p * max_label_gap(table, h, h_star, i))
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisagreementMode {
    /// Label-aware: distances and gaps at the realized label.
    S,
    /// Label-free: sup over labels.
    Al,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub value: f64,
    /// Radius attaining the supremum; `None` when degenerate.
    pub radius: Option<f64>,
    /// All hypotheses sit at distance zero from `h*`.
    pub degenerate: bool,
    pub radii: Vec<f64>,
}

fn distances(table: &HypothesisTable, h_star: usize, mode: DisagreementMode) -> Result<Vec<f64>> {
    (0..table.num_hypotheses())
        .map(|h| match mode {
            DisagreementMode::S => Ok(rho_s(table, h, h_star)),
            DisagreementMode::Al => rho_al(table, h, h_star),
        })
        .collect()
}

fn ball_numerator(table: &HypothesisTable, h_star: usize, mode: DisagreementMode, dist: &[f64], r: f64) -> f64 {
    let ball: Vec<usize> = (0..dist.len()).filter(|&h| dist[h] <= r).collect();
    let base = table.row(h_star);
    table
        .column_probabilities()
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let gap = ball
                .iter()
                .map(|&h| match mode {
                    DisagreementMode::S => (table.loss(h, i) - base[i]).abs(),
                    DisagreementMode::Al => max_label_gap(table, h, h_star, i),
                })
                .fold(0.0, f64::max);
            p * gap
        })
        .sum()
}

/// `sup_r E[max_{h in B(h*, r)} gap] / r` over the positive distances plus `extra_radii`.
pub fn disagreement_coefficient_with(
    table: &HypothesisTable,
    h_star: usize,
    mode: DisagreementMode,
    extra_radii: &[f64],
) -> Result<Coefficient> {
    let dist = distances(table, h_star, mode)?;
    let mut radii: Vec<f64> = dist.iter().copied().filter(|&r| r > 0.0).collect();
    if radii.is_empty() {
        return Ok(Coefficient { value: 0.0, radius: None, degenerate: true, radii });
    }
    radii.extend(extra_radii.iter().copied().filter(|&r| r > 0.0 && r.is_finite()));
    radii.sort_by(f64::total_cmp);
    radii.dedup();
    let mut best = (f64::NEG_INFINITY, radii[0]);
    for &r in &radii {
        let v = ball_numerator(table, h_star, mode, &dist, r) / r;
        if v > best.0 {
            best = (v, r);
        }
    }
    Ok(Coefficient { value: best.0, radius: Some(best.1), degenerate: false, radii })
}

pub fn disagreement_coefficient(table: &HypothesisTable, h_star: usize, mode: DisagreementMode) -> Result<Coefficient> {
    disagreement_coefficient_with(table, h_star, mode, &[])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeAsymmetry {
    /// `f64::INFINITY` when some realized pair differs at one label but not another.
    #[serde(with = "finite_or_null")]
    pub value: f64,
    pub degenerate: bool,
}

/// `sup max_y |l(z,y) - l(z',y)| / min_y |l(z,y) - l(z',y)|` over pairs of
/// predictions made by two hypotheses on the same example.
pub fn slope_asymmetry(table: &HypothesisTable) -> Result<SlopeAsymmetry> {
    let pl = table
        .per_label()
        .ok_or_else(|| Error::invalid("slope asymmetry needs the per-label loss tensor"))?;
    let c = pl.num_labels;
    let mut sup: f64 = 0.0;
    let mut any = false;
    for a in 0..table.num_hypotheses() {
        for b in a + 1..table.num_hypotheses() {
            for i in 0..table.num_columns() {
                let mut hi: f64 = 0.0;
                let mut lo = f64::INFINITY;
                for y in 0..c {
                    let d = (table.label_loss(a, i, y).unwrap() - table.label_loss(b, i, y).unwrap()).abs();
                    hi = hi.max(d);
                    lo = lo.min(d);
                }
                if hi == 0.0 {
                    continue;
                }
                any = true;
                sup = sup.max(if lo == 0.0 { f64::INFINITY } else { hi / lo });
            }
        }
    }
    Ok(SlopeAsymmetry { value: if any { sup } else { 0.0 }, degenerate: !any })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisagreementReport {
    pub h_star: usize,
    pub theta_s: Coefficient,
    pub theta_al: Coefficient,
    pub k_ell: SlopeAsymmetry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientReport {
    pub report: DisagreementReport,
    /// `None` when the check was skipped (infinite or undefined slope asymmetry).
    pub holds: Option<bool>,
    pub note: String,
}

/// Checks `theta_S <= theta_AL * K_ell + 1e-9`.
///
/// The label-free coefficient is also evaluated at the label-aware radii
/// scaled by `K_ell`, the radii at which the two balls nest.
pub fn check_coefficient_inequality(table: &HypothesisTable, h_star: usize) -> Result<CoefficientReport> {
    let theta_s = disagreement_coefficient(table, h_star, DisagreementMode::S)?;
    let k_ell = slope_asymmetry(table)?;
    let scaled: Vec<f64> = if k_ell.value.is_finite() {
        theta_s.radii.iter().map(|r| r * k_ell.value).collect()
    } else {
        vec![]
    };
    let theta_al = disagreement_coefficient_with(table, h_star, DisagreementMode::Al, &scaled)?;
    let report = DisagreementReport { h_star, theta_s, theta_al, k_ell };
    let (holds, note) = if report.theta_s.degenerate {
        (Some(true), "theta_S = 0: holds trivially".to_string())
    } else if k_ell.degenerate {
        (None, "no pair of differing predictions".to_string())
    } else if !k_ell.value.is_finite() {
        (None, "K_ell is infinite: a realized prediction pair has equal loss at some label".to_string())
    } else {
        let ok = report.theta_s.value <= report.theta_al.value * k_ell.value + 1e-9;
        (Some(ok), format!("{} <= {} * {}", report.theta_s.value, report.theta_al.value, k_ell.value))
    };
    Ok(CoefficientReport { report, holds, note })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnbiasednessReport {
    pub true_mean: f64,
    pub mc_mean: f64,
    pub std_error: f64,
    /// `(mc_mean - true_mean) / std_error`; zero when the estimator is deterministic.
    pub z_score: f64,
    pub passes: bool,
    pub draws: usize,
    /// Closed-form expectation of the estimator with weights capped at `cap`.
    pub capped_expectation: Option<f64>,
    pub capped_bias: Option<f64>,
}

/// Monte Carlo check that `(1/T) sum_i (Q_i / p_i) l_i` with `Q_i ~ Bernoulli(p_i)`
/// has mean `(1/T) sum_i l_i`, passing when within three standard errors.
pub fn check_unbiasedness(
    losses: &[f64],
    probabilities: &[f64],
    num_draws: usize,
    cap: Option<f64>,
    rng: &mut RngStream,
) -> Result<UnbiasednessReport> {
    if losses.is_empty() || losses.len() != probabilities.len() {
        return Err(Error::invalid("need one probability per loss"));
    }
    if let Some(p) = probabilities.iter().find(|p| !(**p > 0.0 && **p <= 1.0)) {
        return Err(Error::invalid(format!("sampling probability {p} outside (0, 1]")));
    }
    if num_draws < 2 {
        return Err(Error::invalid("need at least two draws"));
    }
    let t = losses.len() as f64;
    let true_mean = losses.iter().sum::<f64>() / t;
    // Welford running moments
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for n in 1..=num_draws {
        let mut est = 0.0;
        for (l, p) in losses.iter().zip(probabilities) {
            if rng.gen::<f64>() < *p {
                est += l / p;
            }
        }
        est /= t;
        let d = est - mean;
        mean += d / n as f64;
        m2 += d * (est - mean);
    }
    let var = m2 / (num_draws - 1) as f64;
    let std_error = (var / num_draws as f64).sqrt();
    let gap = mean - true_mean;
    let (z_score, passes) = if std_error > 0.0 {
        (gap / std_error, gap.abs() <= 3.0 * std_error)
    } else {
        (0.0, gap.abs() <= 1e-12)
    };
    let capped_expectation = cap.map(|u| {
        losses
            .iter()
            .zip(probabilities)
            .map(|(l, p)| p * (1.0 / p).min(u) * l)
            .sum::<f64>()
            / t
    });
    Ok(UnbiasednessReport {
        true_mean,
        mc_mean: mean,
        std_error,
        z_score,
        passes,
        draws: num_draws,
        capped_expectation,
        capped_bias: capped_expectation.map(|e| e - true_mean),
    })
}

/// Settings for repeated version-space runs on one finite instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialConfig {
    pub horizon: usize,
    pub delta: f64,
    pub slack: SlackVariant,
    pub trials: usize,
    pub seed: u64,
}

/// One run, annotated with the exact quantities the checks need.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub trial: usize,
    /// First step whose version space no longer contains `h*`.
    pub eliminated_at: Option<usize>,
    pub final_hypothesis: usize,
    pub excess_risk: f64,
    pub final_slack: Option<f64>,
    pub selections: usize,
    pub sum_p: f64,
    /// `E[p_t | F_{t-1}]` for `t = 1..=T`.
    #[serde(skip)]
    pub expected_p: Vec<f64>,
    /// Slack applied at step `t` (`None` at `t = 1`).
    #[serde(skip)]
    pub slacks: Vec<Option<f64>>,
}

impl TrialOutcome {
    pub fn clean(&self) -> bool {
        self.eliminated_at.is_none()
    }
}

pub fn run_trials(table: &HypothesisTable, h_star: usize, cfg: &TrialConfig) -> Result<Vec<TrialOutcome>> {
    let root = RngStream::new(cfg.seed);
    let l_star = table.risk(h_star);
    let probs = table.column_probabilities();
    (0..cfg.trials)
        .map(|trial| {
            let trial_rng = root.derive(trial as u64);
            let stream = draw_stream(table, cfg.horizon, &mut trial_rng.derive(crate::rng::keys::STREAM));
            let mut coin = trial_rng.derive(crate::rng::keys::SELECTOR);
            let mut eliminated_at = None;
            let mut expected_p = Vec::with_capacity(cfg.horizon);
            let mut slacks = Vec::with_capacity(cfg.horizon);
            let run = run_iwesv_observed(table, &stream, cfg.delta, cfg.slack, &mut coin, |t, vs, s| {
                if eliminated_at.is_none() && !vs.is_active(h_star) {
                    eliminated_at = Some(t);
                }
                let active = vs.active_indices();
                let e: f64 = probs
                    .iter()
                    .enumerate()
                    .map(|(i, p)| {
                        let (lo, hi) = active.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &h| {
                            let l = table.loss(h, i);
                            (lo.min(l), hi.max(l))
                        });
                        p * (hi - lo)
                    })
                    .sum();
                expected_p.push(e);
                slacks.push(s);
            })?;
            Ok(TrialOutcome {
                trial,
                eliminated_at,
                final_hypothesis: run.final_hypothesis,
                excess_risk: table.risk(run.final_hypothesis) - l_star,
                final_slack: run.final_slack(),
                selections: run.num_selected(),
                sum_p: run.sum_p,
                expected_p,
                slacks,
            })
        })
        .collect()
}

fn binomial_margin(delta: f64, n: usize) -> f64 {
    delta + 3.0 * (delta * (1.0 - delta) / n as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetentionReport {
    pub trials: usize,
    pub eliminations: usize,
    pub elimination_rate: f64,
    /// `delta + 3 sqrt(delta (1 - delta) / n)`
    pub rate_threshold: f64,
    pub clean_trials: usize,
    /// Clean trials with `L(h_T) - L(h*) > 2 Delta_{T-1}`.
    pub bound_violations: usize,
    /// Clean trials where `2 Delta_{T-1} >= 1`, making the bound trivially true.
    pub vacuous_trials: usize,
    pub passes: bool,
}

pub fn check_retention(outcomes: &[TrialOutcome], delta: f64) -> RetentionReport {
    let n = outcomes.len();
    let eliminations = outcomes.iter().filter(|o| !o.clean()).count();
    let clean: Vec<&TrialOutcome> = outcomes.iter().filter(|o| o.clean()).collect();
    let bound = |o: &TrialOutcome| 2.0 * o.final_slack.unwrap_or(f64::INFINITY);
    let bound_violations = clean.iter().filter(|o| o.excess_risk > bound(o) + 1e-12).count();
    let vacuous_trials = clean.iter().filter(|o| bound(o) >= 1.0).count();
    let elimination_rate = if n == 0 { 0.0 } else { eliminations as f64 / n as f64 };
    let rate_threshold = binomial_margin(delta, n.max(1));
    RetentionReport {
        trials: n,
        eliminations,
        elimination_rate,
        rate_threshold,
        clean_trials: clean.len(),
        bound_violations,
        vacuous_trials,
        passes: elimination_rate <= rate_threshold && bound_violations == 0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingRateReport {
    pub theta_s: f64,
    pub l_star: f64,
    /// Mean over trials of `sum_t E[p_t | F_{t-1}]`.
    pub mean_expected_samples: f64,
    /// Mean over trials of `sum_t 4 theta_S (L(h*) + Delta_{t-1})`, `t >= 2`.
    pub mean_bound: f64,
    pub mean_selections: f64,
    /// Steps (in clean trials) where `E[p_t | F_{t-1}] > 4 theta_S (L(h*) + Delta_{t-1})`.
    pub step_violations: usize,
    pub checked_steps: usize,
    pub passes: bool,
}

/// Per-step check of `E[p_t | F_{t-1}] <= 4 theta_S (L(h*) + Delta_{t-1})` in clean trials.
pub fn check_sampling_rate(outcomes: &[TrialOutcome], theta_s: f64, l_star: f64) -> SamplingRateReport {
    let mut step_violations = 0;
    let mut checked_steps = 0;
    let mut total_e = 0.0;
    let mut total_bound = 0.0;
    for o in outcomes {
        total_e += o.expected_p.iter().sum::<f64>();
        for (e, s) in o.expected_p.iter().zip(&o.slacks) {
            let Some(d) = s else { continue };
            let b = 4.0 * theta_s * (l_star + d);
            total_bound += b;
            if o.clean() {
                checked_steps += 1;
                if *e > b + 1e-12 {
                    step_violations += 1;
                }
            }
        }
    }
    let n = outcomes.len().max(1) as f64;
    SamplingRateReport {
        theta_s,
        l_star,
        mean_expected_samples: total_e / n,
        mean_bound: total_bound / n,
        mean_selections: outcomes.iter().map(|o| o.selections as f64).sum::<f64>() / n,
        step_violations,
        checked_steps,
        passes: step_violations == 0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub horizon: usize,
    pub trials: usize,
    pub mean_selections: f64,
    pub selection_rate: f64,
    pub mean_expected_samples: f64,
}

/// Mean selections / T across horizons, for sublinearity checks.
pub fn selection_rate_sweep(
    table: &HypothesisTable,
    h_star: usize,
    horizons: &[(usize, usize)],
    delta: f64,
    seed: u64,
) -> Result<Vec<RatePoint>> {
    horizons
        .iter()
        .map(|&(horizon, trials)| {
            let cfg = TrialConfig { horizon, delta, slack: SlackVariant::Standard, trials, seed };
            let out = run_trials(table, h_star, &cfg)?;
            let n = out.len().max(1) as f64;
            let mean_selections = out.iter().map(|o| o.selections as f64).sum::<f64>() / n;
            Ok(RatePoint {
                horizon,
                trials,
                mean_selections,
                selection_rate: mean_selections / horizon as f64,
                mean_expected_samples: out.iter().map(|o| o.expected_p.iter().sum::<f64>()).sum::<f64>() / n,
            })
        })
        .collect()
}

/// Where a theory run gets its finite instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InstanceSource {
    #[serde(rename = "thresholds-1d")]
    Thresholds1d(crate::synth::ThresholdsParams),
    /// Loss-matrix CSV; columns are equally likely.
    Table { path: std::path::PathBuf },
    /// `distribution.json` as written by the thresholds generator.
    Distribution { path: std::path::PathBuf },
}

impl InstanceSource {
    pub fn load(&self) -> Result<HypothesisTable> {
        match self {
            InstanceSource::Thresholds1d(p) => Ok(crate::synth::thresholds_1d(p)?.table),
            InstanceSource::Table { path } => HypothesisTable::from_csv(path),
            InstanceSource::Distribution { path } => {
                let inst: crate::synth::ThresholdsInstance = serde_json::from_str(&std::fs::read_to_string(path)?)?;
                Ok(inst.table)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TheoryConfig {
    pub instance: InstanceSource,
    /// Defaults to the risk minimizer.
    pub h_star: Option<usize>,
    pub horizon: usize,
    pub delta: f64,
    pub slack: SlackVariant,
    pub trials: usize,
    pub seed: u64,
    /// `(horizon, trials)` pairs for the selection-rate sweep.
    pub sweep: Vec<(usize, usize)>,
}

impl Default for TheoryConfig {
    fn default() -> Self {
        Self {
            instance: InstanceSource::Thresholds1d(Default::default()),
            h_star: None,
            horizon: 500,
            delta: 0.1,
            slack: SlackVariant::Standard,
            trials: 200,
            seed: 0,
            sweep: vec![],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryReport {
    pub h_star: usize,
    pub l_star: f64,
    pub theta_s: Coefficient,
    /// Present when the instance has a per-label loss tensor.
    pub coefficient_inequality: Option<CoefficientReport>,
    pub retention: RetentionReport,
    pub sampling_rate: SamplingRateReport,
    pub trials: Vec<TrialOutcome>,
    pub sweep: Vec<RatePoint>,
}

impl TheoryReport {
    pub fn passes(&self) -> bool {
        self.retention.passes && self.sampling_rate.passes && self.coefficient_inequality.as_ref().is_none_or(|t| t.holds != Some(false))
    }
}

pub fn run_theory(cfg: &TheoryConfig) -> Result<TheoryReport> {
    if cfg.trials == 0 || cfg.horizon == 0 {
        return Err(Error::invalid("trials and horizon must be positive"));
    }
    let table = cfg.instance.load()?;
    let h_star = cfg.h_star.unwrap_or_else(|| table.best_hypothesis());
    if h_star >= table.num_hypotheses() {
        return Err(Error::invalid(format!("h_star {h_star} outside the class")));
    }
    let theta_s = disagreement_coefficient(&table, h_star, DisagreementMode::S)?;
    let coefficient_inequality = table.per_label().is_some().then(|| check_coefficient_inequality(&table, h_star)).transpose()?;
    let trial_cfg = TrialConfig { horizon: cfg.horizon, delta: cfg.delta, slack: cfg.slack, trials: cfg.trials, seed: cfg.seed };
    let trials = run_trials(&table, h_star, &trial_cfg)?;
    let l_star = table.risk(h_star);
    let retention = check_retention(&trials, cfg.delta);
    let sampling_rate = check_sampling_rate(&trials, theta_s.value, l_star);
    let sweep = selection_rate_sweep(&table, h_star, &cfg.sweep, cfg.delta, cfg.seed)?;
    Ok(TheoryReport { h_star, l_star, theta_s, coefficient_inequality, retention, sampling_rate, trials, sweep })
}

mod finite_or_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_some(v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(rows: &[&[f64]]) -> HypothesisTable {
        HypothesisTable::new(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    #[test]
    fn rho_s_examples() {
        let t = table(&[&[0.5, 0.1], &[0.2, 0.3], &[1.0, 1.0], &[0.0, 0.0]]);
        assert_eq!(rho_s(&t, 0, 0), 0.0);
        assert!((rho_s(&t, 0, 1) - 0.25).abs() < 1e-15);
        assert_eq!(rho_s(&t, 2, 3), 1.0);
    }

    fn per_label(values: Vec<Vec<Vec<f64>>>, labels: Vec<usize>) -> HypothesisTable {
        HypothesisTable::from_per_label(values, labels).unwrap()
    }

    #[test]
    fn rho_al_examples() {
        let t = per_label(vec![vec![vec![0.1, 0.7]], vec![vec![0.0, 0.0]]], vec![0]);
        assert_eq!(rho_al(&t, 0, 0).unwrap(), 0.0);
        assert!((rho_al(&t, 0, 1).unwrap() - 0.7).abs() < 1e-15);
        assert!(rho_al(&t, 0, 1).unwrap() >= rho_s(&t, 0, 1));
        assert!(rho_al(&table(&[&[0.0]]), 0, 0).is_err());
    }

    #[test]
    fn coefficient_examples() {
        let single = table(&[&[0.2, 0.4]]);
        let c = disagreement_coefficient(&single, 0, DisagreementMode::S).unwrap();
        assert!(c.degenerate && c.value == 0.0);
        let pair = table(&[&[0.0, 0.0], &[1.0, 0.0]]);
        let c = disagreement_coefficient(&pair, 0, DisagreementMode::S).unwrap();
        assert_eq!(c.radius, Some(0.5));
        assert!((c.value - 1.0).abs() < 1e-15);
    }

    #[test]
    fn coefficient_at_least_one_when_nontrivial() {
        let t = table(&[&[0.0, 0.2, 0.3], &[0.4, 0.2, 0.0], &[0.9, 0.9, 0.1]]);
        for h in 0..3 {
            assert!(disagreement_coefficient(&t, h, DisagreementMode::S).unwrap().value >= 1.0 - 1e-12);
        }
    }

    #[test]
    fn slope_asymmetry_examples() {
        let same = per_label(vec![vec![vec![0.3, 0.6]], vec![vec![0.3, 0.6]]], vec![0]);
        assert!(slope_asymmetry(&same).unwrap().degenerate);
        let two = per_label(vec![vec![vec![0.4, 0.2]], vec![vec![0.0, 0.0]]], vec![0]);
        assert!((slope_asymmetry(&two).unwrap().value - 2.0).abs() < 1e-15);
        // 0-1 loss, 3 classes: predictions 0 and 1 differ on labels 0 and 1 but not on 2
        let zo = |pred: usize| (0..3).map(|y| if y == pred { 0.0 } else { 1.0 }).collect::<Vec<_>>();
        let t = per_label(vec![vec![zo(0)], vec![zo(1)]], vec![0]);
        let k = slope_asymmetry(&t).unwrap();
        assert!(k.value.is_infinite());
        let rep = check_coefficient_inequality(&t, 0).unwrap();
        assert_eq!(rep.holds, None);
    }

    #[test]
    fn coefficient_inequality_symmetric_losses_reduce_to_theta_comparison() {
        // Binary 0-1 loss: every differing pair differs on both labels, so K = 1.
        let zo = |pred: usize| (0..2).map(|y| if y == pred { 0.0 } else { 1.0 }).collect::<Vec<_>>();
        let t = per_label(
            vec![vec![zo(0), zo(1), zo(0)], vec![zo(1), zo(1), zo(0)], vec![zo(1), zo(0), zo(1)]],
            vec![0, 1, 0],
        );
        let rep = check_coefficient_inequality(&t, 0).unwrap();
        assert_eq!(rep.report.k_ell.value, 1.0);
        assert!(rep.report.theta_s.value <= rep.report.theta_al.value + 1e-12);
        assert_eq!(rep.holds, Some(true));
    }

    #[test]
    fn unbiasedness_examples() {
        let mut rng = RngStream::new(1);
        let exact = check_unbiasedness(&[1.0, 1.0, 0.0, 0.0], &[1.0; 4], 10, None, &mut rng).unwrap();
        assert_eq!(exact.mc_mean, 0.5);
        assert!(exact.passes);
        let half = check_unbiasedness(&[1.0, 1.0, 0.0, 0.0], &[0.5; 4], 100_000, Some(1.0), &mut rng).unwrap();
        assert!(half.passes, "{half:?}");
        assert_eq!(half.capped_expectation, Some(0.25));
        assert_eq!(half.capped_bias, Some(-0.25));
        assert!(check_unbiasedness(&[1.0], &[0.0], 10, None, &mut rng).is_err());
    }

    #[test]
    fn singleton_class_never_samples_and_bound_holds() {
        let t = table(&[&[0.0, 1.0, 0.5]]);
        let cfg = TrialConfig { horizon: 50, delta: 0.1, slack: SlackVariant::Standard, trials: 3, seed: 1 };
        let out = run_trials(&t, 0, &cfg).unwrap();
        assert!(out.iter().all(|o| o.sum_p == 0.0 && o.expected_p.iter().all(|&e| e == 0.0)));
        assert!(check_sampling_rate(&out, 0.0, t.risk(0)).passes);
        assert!(check_retention(&out, 0.1).passes);
    }

    #[test]
    fn small_horizon_bound_is_vacuous() {
        let t = table(&[&[0.0, 0.0], &[1.0, 0.0]]);
        let cfg = TrialConfig { horizon: 10, delta: 0.1, slack: SlackVariant::Standard, trials: 4, seed: 2 };
        let out = run_trials(&t, 0, &cfg).unwrap();
        let r = check_retention(&out, 0.1);
        assert_eq!(r.vacuous_trials, 4);
        assert!(r.passes);
    }

    #[test]
    fn theory_run_on_realizable_thresholds() {
        let cfg = TheoryConfig {
            instance: InstanceSource::Thresholds1d(crate::synth::ThresholdsParams { noise: 0.0, grid: 40, ..Default::default() }),
            horizon: 200,
            trials: 5,
            sweep: vec![(50, 2), (500, 2)],
            ..Default::default()
        };
        let r = run_theory(&cfg).unwrap();
        assert_eq!(r.l_star, 0.0);
        assert!(r.passes());
        assert_eq!(r.sweep.len(), 2);
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"retention\""));
    }

    #[test]
    fn binomial_threshold_at_200_trials() {
        assert!((binomial_margin(0.1, 200) - 0.163_639_610_306_789_3).abs() < 1e-12);
    }
}
