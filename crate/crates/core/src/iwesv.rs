//! Version-space importance-weighted sampling over a finite hypothesis class.
//!
//! Every hypothesis' loss on every example is precomputed in a
//! [`HypothesisTable`], which turns version-space maintenance into exact
//! per-step scans over the surviving rows.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Losses of a finite hypothesis class on a finite set of labeled examples.
///
/// Columns carry a probability distribution (uniform unless set), which plays
/// the role of the data distribution in every expectation computed from the
/// table. Optionally, a per-label loss tensor records `loss(h(x_i), y)` for
/// every label `y`, which label-free quantities need.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisTable {
    names: Vec<String>,
    /// `losses[h][i]`
    losses: Vec<Vec<f64>>,
    column_probs: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    predictions: Option<Vec<Vec<usize>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    per_label: Option<PerLabelLosses>,
}

/// `values[h][i][y]` flattened, plus the realized label of each column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerLabelLosses {
    pub num_labels: usize,
    pub labels: Vec<usize>,
    pub values: Vec<f64>,
}

impl HypothesisTable {
    pub fn new(losses: Vec<Vec<f64>>) -> Result<Self> {
        let names = (0..losses.len()).map(|h| format!("h{h}")).collect();
        Self::with_names(names, losses)
    }

    pub fn with_names(names: Vec<String>, losses: Vec<Vec<f64>>) -> Result<Self> {
        if losses.is_empty() {
            return Err(Error::invalid("hypothesis table needs at least one row"));
        }
        if names.len() != losses.len() {
            return Err(Error::invalid("one name per hypothesis required"));
        }
        let t = losses[0].len();
        if t == 0 {
            return Err(Error::invalid("hypothesis table needs at least one column"));
        }
        for (h, row) in losses.iter().enumerate() {
            if row.len() != t {
                return Err(Error::invalid(format!("row {h} has {} columns, expected {t}", row.len())));
            }
            if let Some(v) = row.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::invalid(format!("row {h} has loss {v} outside [0, 1]")));
            }
        }
        Ok(Self {
            names,
            losses,
            column_probs: vec![1.0 / t as f64; t],
            predictions: None,
            per_label: None,
        })
    }

    /// Builds the table from `values[h][i][y]` and each column's realized label.
    pub fn from_per_label(values: Vec<Vec<Vec<f64>>>, labels: Vec<usize>) -> Result<Self> {
        let num_labels = values
            .first()
            .and_then(|r| r.first())
            .map(Vec::len)
            .ok_or_else(|| Error::invalid("empty per-label tensor"))?;
        let mut flat = Vec::new();
        let mut realized = Vec::with_capacity(values.len());
        for (h, row) in values.iter().enumerate() {
            if row.len() != labels.len() {
                return Err(Error::invalid(format!("tensor row {h} does not match the label count")));
            }
            let mut r = Vec::with_capacity(row.len());
            for (i, col) in row.iter().enumerate() {
                if col.len() != num_labels {
                    return Err(Error::invalid("ragged per-label tensor"));
                }
                let y = labels[i];
                if y >= num_labels {
                    return Err(Error::invalid(format!("label {y} outside [0, {num_labels})")));
                }
                flat.extend_from_slice(col);
                r.push(col[y]);
            }
            realized.push(r);
        }
        let mut table = Self::new(realized)?;
        if let Some(v) = flat.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::invalid(format!("per-label loss {v} outside [0, 1]")));
        }
        table.per_label = Some(PerLabelLosses { num_labels, labels, values: flat });
        Ok(table)
    }

    pub fn with_column_probabilities(mut self, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != self.num_columns() {
            return Err(Error::invalid("one probability per column required"));
        }
        if probs.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::invalid("column probabilities must be nonnegative"));
        }
        let s: f64 = probs.iter().sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("column probabilities sum to {s}")));
        }
        self.column_probs = probs;
        Ok(self)
    }

    pub fn renamed(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.num_hypotheses() {
            return Err(Error::invalid("one name per hypothesis required"));
        }
        self.names = names;
        Ok(self)
    }

    pub fn with_predictions(mut self, predictions: Vec<Vec<usize>>) -> Result<Self> {
        if predictions.len() != self.num_hypotheses()
            || predictions.iter().any(|r| r.len() != self.num_columns())
        {
            return Err(Error::invalid("prediction matrix shape does not match the loss matrix"));
        }
        self.predictions = Some(predictions);
        Ok(self)
    }

    pub fn num_hypotheses(&self) -> usize {
        self.losses.len()
    }

    pub fn num_columns(&self) -> usize {
        self.losses[0].len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn loss(&self, h: usize, i: usize) -> f64 {
        self.losses[h][i]
    }

    pub fn row(&self, h: usize) -> &[f64] {
        &self.losses[h]
    }

    pub fn column_probabilities(&self) -> &[f64] {
        &self.column_probs
    }

    pub fn predictions(&self) -> Option<&[Vec<usize>]> {
        self.predictions.as_deref()
    }

    pub fn per_label(&self) -> Option<&PerLabelLosses> {
        self.per_label.as_ref()
    }

    /// `loss(h(x_i), y)` for an arbitrary label `y`.
    pub fn label_loss(&self, h: usize, i: usize, y: usize) -> Option<f64> {
        let pl = self.per_label.as_ref()?;
        let t = self.num_columns();
        Some(pl.values[(h * t + i) * pl.num_labels + y])
    }

    /// Expected loss under the column distribution.
    pub fn risk(&self, h: usize) -> f64 {
        self.losses[h].iter().zip(&self.column_probs).map(|(l, p)| l * p).sum()
    }

    /// Risk minimizer, ties to the lowest index.
    pub fn best_hypothesis(&self) -> usize {
        let mut best = 0;
        let mut best_risk = self.risk(0);
        for h in 1..self.num_hypotheses() {
            let r = self.risk(h);
            if r < best_risk {
                best = h;
                best_risk = r;
            }
        }
        best
    }

    /// Reads `name,l0,l1,...` rows after a header line.
    pub fn from_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let display = path.display().to_string();
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(path)
            .map_err(|e| Error::Parse { path: display.clone(), line: 0, message: e.to_string() })?;
        let mut names = Vec::new();
        let mut losses = Vec::new();
        for record in reader.records() {
            let record =
                record.map_err(|e| Error::Parse { path: display.clone(), line: 0, message: e.to_string() })?;
            let line = record.position().map_or(0, |p| p.line());
            names.push(record[0].trim().to_string());
            let row = record
                .iter()
                .skip(1)
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Parse { path: display.clone(), line, message: e.to_string() })?;
            losses.push(row);
        }
        Self::with_names(names, losses)
    }

    pub fn to_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = String::from("hypothesis");
        for i in 0..self.num_columns() {
            out.push_str(&format!(",x{i}"));
        }
        out.push('\n');
        for (name, row) in self.names.iter().zip(&self.losses) {
            out.push_str(name);
            for v in row {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

/// Surviving hypotheses and their cumulative importance-weighted losses.
#[derive(Debug, Clone, PartialEq)]
pub struct VersionSpace {
    active: Vec<bool>,
    /// Number of stream steps folded into `cumulative`.
    steps: usize,
    /// `sum_s (Q_s / p_s) * loss(h(x_s), y_s)`
    cumulative: Vec<f64>,
}

impl VersionSpace {
    pub fn full(num_hypotheses: usize) -> Self {
        Self {
            active: vec![true; num_hypotheses],
            steps: 0,
            cumulative: vec![0.0; num_hypotheses],
        }
    }

    pub fn is_active(&self, h: usize) -> bool {
        self.active[h]
    }

    pub fn active_indices(&self) -> Vec<usize> {
        (0..self.active.len()).filter(|&h| self.active[h]).collect()
    }

    pub fn num_active(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn cumulative_losses(&self) -> &[f64] {
        &self.cumulative
    }

    /// `L_n(h) = cumulative(h) / n` after `n` steps; zero before any step.
    pub fn iw_loss(&self, h: usize) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.cumulative[h] / self.steps as f64
        }
    }

    /// Folds one stream step in. Only an accepted draw (`accepted_p = Some(p)`) contributes.
    pub fn observe(&mut self, table: &HypothesisTable, column: usize, accepted_p: Option<f64>) {
        if let Some(p) = accepted_p {
            for (h, c) in self.cumulative.iter_mut().enumerate() {
                *c += table.loss(h, column) / p;
            }
        }
        self.steps += 1;
    }
}

/// Keeps the active hypotheses whose importance-weighted loss is within `slack`
/// of the best active one. Does nothing before the first observed step.
pub fn update_version_space(vspace: &VersionSpace, slack: f64) -> VersionSpace {
    let mut next = vspace.clone();
    if vspace.steps == 0 {
        return next;
    }
    let best = vspace
        .active_indices()
        .into_iter()
        .map(|h| vspace.iw_loss(h))
        .fold(f64::INFINITY, f64::min);
    for h in 0..next.active.len() {
        if next.active[h] && vspace.iw_loss(h) > best + slack {
            next.active[h] = false;
        }
    }
    next
}

/// Largest loss gap between two surviving hypotheses on one example.
pub fn sampling_probability_vspace(table: &HypothesisTable, vspace: &VersionSpace, column: usize) -> Result<f64> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for h in 0..table.num_hypotheses() {
        if vspace.is_active(h) {
            let l = table.loss(h, column);
            lo = lo.min(l);
            hi = hi.max(l);
        }
    }
    if lo > hi {
        return Err(Error::Internal("empty version space".into()));
    }
    Ok(hi - lo)
}

/// `Delta_{t-1} = sqrt(8 ln(2T(T+1)|H|^2/delta) / (t-1))`, the slack applied at step `t`.
pub fn slack_standard(t: usize, horizon: usize, num_hypotheses: usize, delta: f64) -> Result<f64> {
    if t < 2 {
        return Err(Error::invalid("standard slack is defined from t = 2"));
    }
    check_confidence(delta)?;
    let (tt, h) = (horizon as f64, num_hypotheses as f64);
    Ok((8.0 * (2.0 * tt * (tt + 1.0) * h * h / delta).ln() / (t - 1) as f64).sqrt())
}

/// `(2/t)(sqrt(sum_p) + 6 sqrt(ln((3+t)t^2/delta))) * sqrt(ln(8 T^2 |H|^2 ln T / delta))`.
pub fn slack_enhanced(t: usize, horizon: usize, num_hypotheses: usize, delta: f64, sum_p: f64) -> Result<f64> {
    if horizon < 3 {
        return Err(Error::invalid("enhanced slack needs a horizon of at least 3"));
    }
    if t < 1 {
        return Err(Error::invalid("enhanced slack is defined from t = 1"));
    }
    if !(sum_p >= 0.0) {
        return Err(Error::invalid("sum of sampling probabilities must be nonnegative"));
    }
    check_confidence(delta)?;
    let (t, tt, h) = (t as f64, horizon as f64, num_hypotheses as f64);
    let inner = sum_p.sqrt() + 6.0 * ((3.0 + t) * t * t / delta).ln().sqrt();
    let outer = (8.0 * tt * tt * h * h * tt.ln() / delta).ln().sqrt();
    Ok(2.0 / t * inner * outer)
}

fn check_confidence(delta: f64) -> Result<()> {
    if delta > 0.0 && delta <= 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("confidence delta = {delta} outside (0, 1]")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SlackVariant {
    #[default]
    Standard,
    Enhanced,
}

/// Slack schedule for a run of known horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlackSchedule {
    pub variant: SlackVariant,
    pub delta: f64,
    pub horizon: usize,
    pub num_hypotheses: usize,
}

impl SlackSchedule {
    /// Slack used when updating the version space at step `t >= 2`;
    /// `sum_p` is the sum of the sampling probabilities of steps `1..t`.
    pub fn at(&self, t: usize, sum_p: f64) -> Result<f64> {
        match self.variant {
            SlackVariant::Standard => slack_standard(t, self.horizon, self.num_hypotheses, self.delta),
            SlackVariant::Enhanced => {
                slack_enhanced(t - 1, self.horizon, self.num_hypotheses, self.delta, sum_p)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IwesvStep {
    pub t: usize,
    pub column: usize,
    pub p: f64,
    pub selected: bool,
    /// `None` at `t = 1`, where the version space is the whole class.
    pub slack: Option<f64>,
    pub active: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IwesvRun {
    /// Importance-weighted ERM over the full class after the last step.
    pub final_hypothesis: usize,
    /// `(column, weight = 1/p)` of every accepted step.
    pub selected: Vec<(usize, f64)>,
    pub steps: Vec<IwesvStep>,
    pub sum_p: f64,
    pub final_active: Vec<usize>,
}

impl IwesvRun {
    pub fn num_selected(&self) -> usize {
        self.selected.len()
    }

    /// Slack of the last step, `Delta_{T-1}`.
    pub fn final_slack(&self) -> Option<f64> {
        self.steps.last().and_then(|s| s.slack)
    }
}

pub fn run_iwesv(
    table: &HypothesisTable,
    stream: &[usize],
    delta: f64,
    slack: SlackVariant,
    rng: &mut RngStream,
) -> Result<IwesvRun> {
    run_iwesv_observed(table, stream, delta, slack, rng, |_, _, _| {})
}

/// Runs the sampler over `stream` (column indices). `observe(t, H_t, slack)` is
/// called after the version-space update of step `t` and before `x_t` is scored.
pub fn run_iwesv_observed<F>(
    table: &HypothesisTable,
    stream: &[usize],
    delta: f64,
    slack: SlackVariant,
    rng: &mut RngStream,
    mut observe: F,
) -> Result<IwesvRun>
where
    F: FnMut(usize, &VersionSpace, Option<f64>),
{
    check_confidence(delta)?;
    if let Some(&bad) = stream.iter().find(|&&i| i >= table.num_columns()) {
        return Err(Error::invalid(format!("stream index {bad} outside the table")));
    }
    let schedule = SlackSchedule {
        variant: slack,
        delta,
        horizon: stream.len(),
        num_hypotheses: table.num_hypotheses(),
    };
    if slack == SlackVariant::Enhanced && stream.len() < 3 {
        return Err(Error::invalid("enhanced slack needs a stream of at least 3 steps"));
    }
    let mut vs = VersionSpace::full(table.num_hypotheses());
    let mut steps = Vec::with_capacity(stream.len());
    let mut selected = Vec::new();
    let mut sum_p = 0.0;
    for (k, &column) in stream.iter().enumerate() {
        let t = k + 1;
        let s = if t >= 2 {
            let d = schedule.at(t, sum_p)?;
            vs = update_version_space(&vs, d);
            Some(d)
        } else {
            None
        };
        observe(t, &vs, s);
        let p = sampling_probability_vspace(table, &vs, column)?;
        sum_p += p;
        let accepted = p > 0.0 && rng.gen::<f64>() < p;
        vs.observe(table, column, accepted.then_some(p));
        if accepted {
            selected.push((column, 1.0 / p));
        }
        steps.push(IwesvStep {
            t,
            column,
            p,
            selected: accepted,
            slack: s,
            active: vs.num_active(),
        });
    }
    let cum = vs.cumulative_losses();
    let mut final_hypothesis = 0;
    for h in 1..cum.len() {
        if cum[h] < cum[final_hypothesis] {
            final_hypothesis = h;
        }
    }
    Ok(IwesvRun {
        final_hypothesis,
        selected,
        steps,
        sum_p,
        final_active: vs.active_indices(),
    })
}

/// Stream of `len` columns drawn i.i.d. from the table's column distribution.
pub fn draw_stream(table: &HypothesisTable, len: usize, rng: &mut RngStream) -> Vec<usize> {
    let probs = table.column_probabilities();
    let mut cdf = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for p in probs {
        acc += p;
        cdf.push(acc);
    }
    (0..len)
        .map(|_| {
            let u: f64 = rng.gen::<f64>() * acc;
            cdf.partition_point(|&c| c <= u).min(probs.len() - 1)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slack_standard_examples() {
        let a = slack_standard(100, 100, 10, 0.05).unwrap();
        assert!((a - 1.189_663_914_612_790_4).abs() < 1e-12);
        let b = slack_standard(2, 2, 1, 1.0).unwrap();
        assert!((b - 4.458_615_614_549_431).abs() < 1e-12);
        for t in 2..200 {
            assert!(slack_standard(t + 1, 300, 5, 0.1).unwrap() < slack_standard(t, 300, 5, 0.1).unwrap());
        }
        assert!(slack_standard(1, 10, 2, 0.1).is_err());
    }

    /// Independently written evaluation of the enhanced slack.
    fn enhanced_oracle(t: f64, tt: f64, h: f64, d: f64, s: f64) -> f64 {
        let a = (s).powf(0.5);
        let b = 6.0 * (((3.0 + t) * t.powi(2) / d).ln()).powf(0.5);
        let c = ((8.0 * tt.powi(2) * h.powi(2) * tt.ln() / d).ln()).powf(0.5);
        (a + b) * c * 2.0 / t
    }

    #[test]
    fn slack_enhanced_examples() {
        let v = slack_enhanced(10, 100, 10, 0.05, 5.0).unwrap();
        // 40-digit reference: 19.30932391062511737...
        assert!((v - 19.309_323_910_625_117).abs() / v < 1e-12);
        assert!((v - enhanced_oracle(10.0, 100.0, 10.0, 0.05, 5.0)).abs() / v < 1e-12);
        let zero = slack_enhanced(7, 50, 4, 0.1, 0.0).unwrap();
        let expect = 12.0 / 7.0
            * ((3.0 + 7.0) * 49.0 / 0.1f64).ln().sqrt()
            * (8.0 * 2500.0 * 16.0 * 50f64.ln() / 0.1).ln().sqrt();
        assert!((zero - expect).abs() < 1e-12);
        // only the sqrt(sum_p) term moves when sum_p goes 4 -> 16
        let outer = (8.0 * 2500.0 * 16.0 * 50f64.ln() / 0.1).ln().sqrt();
        let d = slack_enhanced(7, 50, 4, 0.1, 16.0).unwrap() - slack_enhanced(7, 50, 4, 0.1, 4.0).unwrap();
        assert!((d - 2.0 / 7.0 * (4.0 - 2.0) * outer).abs() < 1e-12);
        assert!(slack_enhanced(1, 2, 4, 0.1, 0.0).is_err());
    }

    fn table(rows: &[&[f64]]) -> HypothesisTable {
        HypothesisTable::new(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    #[test]
    fn vspace_probability_examples() {
        let t = table(&[&[0.2], &[0.5], &[0.9]]);
        let vs = VersionSpace::full(3);
        assert!((sampling_probability_vspace(&t, &vs, 0).unwrap() - 0.7).abs() < 1e-15);
        let mut single = VersionSpace::full(3);
        single.active = vec![false, true, false];
        assert_eq!(sampling_probability_vspace(&t, &single, 0).unwrap(), 0.0);
        let same = table(&[&[1.0], &[1.0]]);
        assert_eq!(sampling_probability_vspace(&same, &VersionSpace::full(2), 0).unwrap(), 0.0);
        let mut empty = VersionSpace::full(3);
        empty.active = vec![false; 3];
        assert!(matches!(sampling_probability_vspace(&t, &empty, 0), Err(Error::Internal(_))));
    }

    fn vs_with_losses(losses: &[f64]) -> VersionSpace {
        VersionSpace {
            active: vec![true; losses.len()],
            steps: 1,
            cumulative: losses.to_vec(),
        }
    }

    #[test]
    fn update_examples() {
        let vs = vs_with_losses(&[0.10, 0.15, 0.40]);
        assert_eq!(update_version_space(&vs, f64::INFINITY).active, vec![true; 3]);
        assert_eq!(update_version_space(&vs, 0.0).active, vec![true, false, false]);
        assert_eq!(update_version_space(&vs, 0.1).active, vec![true, true, false]);
        // nested: an inactive hypothesis never comes back
        let mut v2 = update_version_space(&vs, 0.0);
        v2.cumulative = vec![0.9, 0.0, 0.0];
        let v3 = update_version_space(&v2, 0.0);
        assert_eq!(v3.active, vec![true, false, false]);
    }

    #[test]
    fn singleton_class_never_samples() {
        let t = table(&[&[0.3, 0.7, 1.0]]);
        let run = run_iwesv(&t, &[0, 1, 2, 1, 0], 0.1, SlackVariant::Standard, &mut RngStream::new(1)).unwrap();
        assert!(run.steps.iter().all(|s| s.p == 0.0 && !s.selected));
        assert_eq!(run.final_hypothesis, 0);
        assert_eq!(run.num_selected(), 0);
    }

    #[test]
    fn separated_pair_eliminates_bad_hypothesis() {
        // h0 perfect, h1 always wrong: p = 1 until h1 leaves the version space.
        let t = table(&[&[0.0, 0.0, 0.0], &[1.0, 1.0, 1.0]]);
        let stream: Vec<usize> = (0..3000).map(|i| i % 3).collect();
        let mut rng = RngStream::new(2);
        let run = run_iwesv(&t, &stream, 0.1, SlackVariant::Standard, &mut rng).unwrap();
        assert_eq!(run.steps[0].p, 1.0);
        assert!(run.steps[0].selected);
        // every step up to elimination has p = 1 and is accepted, so IW losses are exactly
        // 0 and 1; h1 leaves at the first t with slack(t) < 1.
        let first_t = (2..).find(|&t| slack_standard(t, 3000, 2, 0.1).unwrap() < 1.0).unwrap();
        let elim = run.steps.iter().find(|s| s.active == 1).unwrap().t;
        // `active` is recorded after the step's update, which happens at the start of step t
        assert_eq!(elim, first_t);
        assert!(run.steps[first_t - 1..].iter().all(|s| s.p == 0.0));
        assert_eq!(run.num_selected(), first_t - 1);
        assert_eq!(run.final_hypothesis, 0);
        let total: f64 = run.steps.iter().map(|s| s.p).sum();
        assert_eq!(total, run.sum_p);
    }

    #[test]
    fn zero_probability_step_still_counts() {
        let t = table(&[&[0.5, 0.5], &[0.5, 0.5]]);
        let run = run_iwesv(&t, &[0, 1, 0], 0.5, SlackVariant::Standard, &mut RngStream::new(0)).unwrap();
        assert!(run.steps.iter().all(|s| s.p == 0.0 && !s.selected));
        assert_eq!(run.steps[2].slack, Some(slack_standard(3, 3, 2, 0.5).unwrap()));
    }

    #[test]
    fn enhanced_variant_runs_and_stays_nested() {
        let t = table(&[&[0.0, 0.2, 0.1], &[1.0, 0.9, 0.8], &[0.1, 0.3, 0.0]]);
        let stream: Vec<usize> = (0..500).map(|i| (i * 7) % 3).collect();
        let mut prev = 3;
        run_iwesv_observed(&t, &stream, 0.1, SlackVariant::Enhanced, &mut RngStream::new(3), |_, vs, _| {
            assert!(vs.num_active() <= prev);
            prev = vs.num_active();
        })
        .unwrap();
        assert!(run_iwesv(&t, &[0, 1], 0.1, SlackVariant::Enhanced, &mut RngStream::new(0)).is_err());
    }

    #[test]
    fn table_validation_and_csv() {
        assert!(HypothesisTable::new(vec![]).is_err());
        assert!(HypothesisTable::new(vec![vec![0.2, 1.5]]).is_err());
        let t = table(&[&[0.0, 0.25], &[1.0, 0.5]]);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("h.csv");
        t.to_csv(&p).unwrap();
        assert_eq!(HypothesisTable::from_csv(&p).unwrap(), t);
        assert_eq!(t.best_hypothesis(), 0);
        assert!((t.risk(1) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn stream_follows_column_distribution() {
        let t = table(&[&[0.0, 0.0, 0.0]]).with_column_probabilities(vec![0.0, 0.25, 0.75]).unwrap();
        let s = draw_stream(&t, 40_000, &mut RngStream::new(9));
        assert!(!s.contains(&0));
        let frac = s.iter().filter(|&&c| c == 2).count() as f64 / s.len() as f64;
        let sd = (0.75f64 * 0.25 / 40_000.0).sqrt();
        assert!((frac - 0.75).abs() < 3.0 * sd);
    }
}
