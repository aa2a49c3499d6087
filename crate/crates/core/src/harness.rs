//! Seeded multi-trial experiments with learning-curve and trace export.
//!
//! Every trial derives its streams from `(seed, trial)`, and every selector in
//! a trial receives the same seed set and the same first model, so compared
//! selectors differ only in how they spend the per-round budget.
//!
//! Output layout under the output directory:
//!
//! ```text
//! config.json              resolved configuration
//! report.json              per-selector curves, drops and aggregates
//! timing.json              wall-clock seconds (not reproducible)
//! <selector>/curve.csv     trial,round,selected,accuracy
//! <selector>/summary.csv   round,selected,trial_<i>...,mean,stderr
//! <selector>/trace_trial<i>.jsonl
//! <selector>/model_trial<i>.json   (with save_models)
//! ```

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{select_badge, select_coreset_kcenter, select_random, select_topk_uncertainty, UncertaintyScore};
use crate::data::{Pool, WeightedExample};
use crate::error::{Error, Result};
use crate::iwes::{draw_seed_set, run_iwes_observed, CandidateOrder, IwesConfig, IwesVariant};
use crate::iwesv::{run_iwesv, HypothesisTable, SlackVariant};
use crate::learners::{SoftmaxNet, SoftmaxTrainer, TrainerConfig, WeightedTrainer};
use crate::rng::{keys, RngStream};
use crate::synth::SyntheticSpec;
use crate::trace::{SelectionRecord, SelectionTrace};

pub use crate::synth::make_synthetic;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    /// CSV with columns `f0..f{d-1},label`.
    pub path: Option<PathBuf>,
    /// Generated in memory from the experiment seed instead of read from disk.
    pub synthetic: Option<SyntheticSpec>,
    /// Declared class count; inferred from the labels when absent.
    pub num_classes: Option<usize>,
    /// Explicit test set. Without it, `test_fraction` of the dataset is held out.
    pub test_path: Option<PathBuf>,
    pub test_fraction: f64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self { path: None, synthetic: None, num_classes: None, test_path: None, test_fraction: 0.2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IwesParams {
    pub weight_cap: f64,
    pub max_passes: usize,
    pub probability_floor: f64,
    pub order: CandidateOrder,
}

impl Default for IwesParams {
    fn default() -> Self {
        let d = IwesConfig::default();
        Self { weight_cap: d.weight_cap, max_passes: d.max_passes, probability_floor: 0.0, order: d.order }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IwesvParams {
    /// Loss table whose columns are the training pool's examples in order.
    pub table: PathBuf,
    pub delta: f64,
    pub slack: SlackVariant,
    /// Stream length; defaults to the training pool size.
    pub horizon: Option<usize>,
}

impl Default for IwesvParams {
    fn default() -> Self {
        Self { table: PathBuf::new(), delta: 0.1, slack: SlackVariant::Standard, horizon: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BadgeParams {
    pub partitions: usize,
}

impl Default for BadgeParams {
    fn default() -> Self {
        Self { partitions: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum SelectorSpec {
    IwesDis(IwesParams),
    IwesEnt(IwesParams),
    IwesLoss(IwesParams),
    IwesMultilabelEnt(IwesParams),
    Iwesv(IwesvParams),
    Random,
    Margin,
    Entropy,
    LeastConfident,
    Coreset,
    Badge(BadgeParams),
}

impl SelectorSpec {
    pub fn name(&self) -> &'static str {
        match self {
            SelectorSpec::IwesDis(_) => "iwes-dis",
            SelectorSpec::IwesEnt(_) => "iwes-ent",
            SelectorSpec::IwesLoss(_) => "iwes-loss",
            SelectorSpec::IwesMultilabelEnt(_) => "iwes-multilabel-ent",
            SelectorSpec::Iwesv(_) => "iwesv",
            SelectorSpec::Random => "random",
            SelectorSpec::Margin => "margin",
            SelectorSpec::Entropy => "entropy",
            SelectorSpec::LeastConfident => "least-confident",
            SelectorSpec::Coreset => "coreset",
            SelectorSpec::Badge(_) => "badge",
        }
    }

    fn iwes(&self) -> Option<(IwesVariant, &IwesParams)> {
        match self {
            SelectorSpec::IwesDis(p) => Some((IwesVariant::Dis, p)),
            SelectorSpec::IwesEnt(p) => Some((IwesVariant::Ent, p)),
            SelectorSpec::IwesLoss(p) => Some((IwesVariant::Loss, p)),
            SelectorSpec::IwesMultilabelEnt(p) => Some((IwesVariant::MultilabelEnt, p)),
            _ => None,
        }
    }
}

/// Seed-set size and per-round budget shared by every selector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Budget {
    pub seed_size: usize,
    pub batch_size: usize,
    pub rounds: usize,
}

impl Default for Budget {
    fn default() -> Self {
        Self { seed_size: 100, batch_size: 100, rounds: 5 }
    }
}

impl Budget {
    pub fn at(&self, round: usize) -> usize {
        self.seed_size + round * self.batch_size
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    pub selectors: Vec<SelectorSpec>,
    pub budget: Budget,
    pub trainer: TrainerConfig,
    pub trials: usize,
    pub seed: u64,
    /// Parallel trials; defaults to the number of CPUs.
    pub workers: Option<usize>,
    pub save_models: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetConfig::default(),
            selectors: vec![SelectorSpec::Random],
            budget: Budget::default(),
            trainer: TrainerConfig::default(),
            trials: 5,
            seed: 0,
            workers: None,
            save_models: false,
        }
    }
}

impl ExperimentConfig {
    /// Reads a JSON config; relative paths are resolved against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let mut cfg: Self = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: e.line() as u64,
            message: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() && !p.as_os_str().is_empty() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = cfg.dataset.path.as_mut() {
            resolve(p);
        }
        if let Some(p) = cfg.dataset.test_path.as_mut() {
            resolve(p);
        }
        for s in &mut cfg.selectors {
            if let SelectorSpec::Iwesv(p) = s {
                resolve(&mut p.table);
            }
        }
        Ok(cfg)
    }

    /// Checks everything that can be checked without data.
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::invalid("trials must be at least 1"));
        }
        if self.selectors.is_empty() {
            return Err(Error::invalid("no selectors configured"));
        }
        let mut names: Vec<&str> = self.selectors.iter().map(SelectorSpec::name).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("each selector may appear once"));
        }
        if self.workers == Some(0) {
            return Err(Error::invalid("workers must be positive"));
        }
        if self.budget.seed_size == 0 || (self.budget.rounds > 0 && self.budget.batch_size == 0) {
            return Err(Error::invalid("seed_size and batch_size must be positive"));
        }
        self.trainer.validate()?;
        let d = &self.dataset;
        if d.path.is_some() == d.synthetic.is_some() {
            return Err(Error::invalid("dataset needs exactly one of `path` and `synthetic`"));
        }
        if d.test_path.is_none() && !(d.test_fraction > 0.0 && d.test_fraction < 1.0) {
            return Err(Error::invalid("test_fraction must lie in (0, 1)"));
        }
        for s in &self.selectors {
            if let Some((variant, p)) = s.iwes() {
                self.iwes_config(variant, p).validate(usize::MAX)?;
            }
            match s {
                SelectorSpec::Iwesv(p) => {
                    if !(p.delta > 0.0 && p.delta < 1.0) {
                        return Err(Error::invalid("iwesv delta must lie in (0, 1)"));
                    }
                    if p.table.as_os_str().is_empty() {
                        return Err(Error::invalid("iwesv needs a `table` path"));
                    }
                }
                SelectorSpec::Badge(p) if p.partitions == 0 => {
                    return Err(Error::invalid("badge partitions must be positive"));
                }
                _ => {}
            }
        }
        Ok(())
    }

    fn iwes_config(&self, variant: IwesVariant, p: &IwesParams) -> IwesConfig {
        IwesConfig {
            seed_size: self.budget.seed_size,
            batch_size: self.budget.batch_size,
            rounds: self.budget.rounds,
            weight_cap: p.weight_cap,
            variant,
            max_passes: p.max_passes,
            probability_floor: p.probability_floor,
            order: p.order,
        }
    }
}

/// Train/test pools of an experiment.
#[derive(Debug, Clone)]
pub struct Split {
    pub train: Pool,
    pub test: Pool,
}

pub fn load_split(cfg: &ExperimentConfig) -> Result<Split> {
    let d = &cfg.dataset;
    let full = match (&d.path, &d.synthetic) {
        (Some(p), None) => Pool::from_csv(p, d.num_classes)?,
        (None, Some(spec)) => synthetic_pool(spec, cfg.seed)?,
        _ => return Err(Error::invalid("dataset needs exactly one of `path` and `synthetic`")),
    };
    if let Some(tp) = &d.test_path {
        let test = Pool::from_csv(tp, Some(full.num_classes()))?;
        if test.dim() != full.dim() {
            return Err(Error::invalid("test set dimension differs from the training set"));
        }
        return Ok(Split { train: full, test });
    }
    let mut idx: Vec<usize> = (0..full.len()).collect();
    idx.shuffle(&mut RngStream::new(cfg.seed).derive(keys::SPLIT));
    let n_test = ((full.len() as f64) * d.test_fraction).round() as usize;
    if n_test == 0 || n_test == full.len() {
        return Err(Error::invalid("test split leaves an empty train or test set"));
    }
    let (test, train) = idx.split_at(n_test);
    let (mut test, mut train) = (test.to_vec(), train.to_vec());
    test.sort_unstable();
    train.sort_unstable();
    Ok(Split { train: full.subset(&train)?, test: full.subset(&test)? })
}

fn synthetic_pool(spec: &SyntheticSpec, seed: u64) -> Result<Pool> {
    match spec {
        SyntheticSpec::Blobs(p) => crate::synth::blobs(p, seed),
        SyntheticSpec::Xor(p) => crate::synth::xor(p, seed),
        SyntheticSpec::Thresholds1d(p) => crate::synth::thresholds_1d(p)?.sample(p.n, &mut RngStream::new(seed)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub round: usize,
    pub selected: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialCurve {
    pub trial: usize,
    pub points: Vec<CurvePoint>,
    /// Why the trial was excluded from aggregation.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dropped: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub round: usize,
    pub selected: usize,
    pub values: Vec<f64>,
    pub mean: f64,
    pub stderr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectorReport {
    pub name: String,
    pub curves: Vec<TrialCurve>,
    pub surviving_trials: Vec<usize>,
    pub summary: Vec<SummaryRow>,
    pub aggregated: bool,
}

impl SelectorReport {
    pub fn final_row(&self) -> Option<&SummaryRow> {
        self.summary.last()
    }

    pub fn first_row(&self) -> Option<&SummaryRow> {
        self.summary.first()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub seed: u64,
    pub trials: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub selectors: Vec<SelectorReport>,
}

impl ExperimentReport {
    pub fn selector(&self, name: &str) -> Option<&SelectorReport> {
        self.selectors.iter().find(|s| s.name == name)
    }
}

struct TrialRun {
    points: Vec<CurvePoint>,
    trace: SelectionTrace,
    model: Option<SoftmaxNet>,
}

enum TrialResult {
    Done(TrialRun),
    Failed { reason: String, trace: Option<SelectionTrace> },
}

struct Context<'a> {
    cfg: &'a ExperimentConfig,
    split: &'a Split,
    trainer: SoftmaxTrainer,
    tables: Vec<Option<HypothesisTable>>,
}

/// Runs every selector for every trial, writes all outputs under `out`, and
/// returns the report. Fails with an aggregate failure (after writing) when
/// some selector keeps fewer than `min(3, trials)` trials.
pub fn run_experiment(cfg: &ExperimentConfig, out: impl AsRef<Path>) -> Result<ExperimentReport> {
    cfg.validate()?;
    let split = load_split(cfg)?;
    let t = split.train.len();
    if cfg.budget.at(cfg.budget.rounds) > t {
        return Err(Error::invalid(format!(
            "seed_size + rounds * batch_size = {} exceeds the training pool of {t}",
            cfg.budget.at(cfg.budget.rounds)
        )));
    }
    let tables = cfg
        .selectors
        .iter()
        .map(|s| match s {
            SelectorSpec::Iwesv(p) => {
                let table = HypothesisTable::from_csv(&p.table)?;
                if table.num_columns() != t {
                    return Err(Error::invalid(format!(
                        "iwesv table has {} columns but the training pool has {t} examples",
                        table.num_columns()
                    )));
                }
                Ok(Some(table))
            }
            _ => Ok(None),
        })
        .collect::<Result<Vec<_>>>()?;
    let ctx = Context { cfg, split: &split, trainer: SoftmaxTrainer::new(cfg.trainer.clone()), tables };

    let out = out.as_ref();
    std::fs::create_dir_all(out)?;
    write_atomic(&out.join("config.json"), serde_json::to_string_pretty(cfg)?.as_bytes())?;
    for s in &cfg.selectors {
        std::fs::create_dir_all(out.join(s.name()))?;
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::Internal(e.to_string()))?;
    let results: Vec<Vec<(TrialResult, f64)>> = pool.install(|| {
        (0..cfg.trials)
            .into_par_iter()
            .map(|trial| run_trial(&ctx, trial, out))
            .collect::<Result<Vec<_>>>()
    })?;

    let mut selectors = Vec::new();
    let mut failures = Vec::new();
    let mut timing = Vec::new();
    for (si, spec) in cfg.selectors.iter().enumerate() {
        let mut curves = Vec::new();
        for (trial, per) in results.iter().enumerate() {
            let (res, secs) = &per[si];
            timing.push(serde_json::json!({"selector": spec.name(), "trial": trial, "seconds": secs}));
            curves.push(match res {
                TrialResult::Done(run) => TrialCurve {
                    trial,
                    points: run.points.clone(),
                    dropped: divergence_reason(&run.points, split.test.len()),
                },
                TrialResult::Failed { reason, .. } => TrialCurve { trial, points: vec![], dropped: Some(reason.clone()) },
            });
        }
        let report = aggregate(spec.name(), curves, cfg.trials);
        if !report.aggregated {
            failures.push(format!(
                "{}: {} of {} trials survived",
                spec.name(),
                report.surviving_trials.len(),
                cfg.trials
            ));
        }
        let dir = out.join(spec.name());
        write_atomic(&dir.join("curve.csv"), curve_csv(&report.curves).as_bytes())?;
        write_atomic(&dir.join("summary.csv"), summary_csv(&report).as_bytes())?;
        selectors.push(report);
    }
    let report = ExperimentReport {
        seed: cfg.seed,
        trials: cfg.trials,
        train_size: split.train.len(),
        test_size: split.test.len(),
        selectors,
    };
    write_atomic(&out.join("report.json"), serde_json::to_string_pretty(&report)?.as_bytes())?;
    write_atomic(&out.join("timing.json"), serde_json::to_string_pretty(&timing)?.as_bytes())?;
    if !failures.is_empty() {
        return Err(Error::AggregateFailure(failures.join("; ")));
    }
    Ok(report)
}

fn run_trial(ctx: &Context, trial: usize, out: &Path) -> Result<Vec<(TrialResult, f64)>> {
    let rng = RngStream::new(ctx.cfg.seed).derive(trial as u64);
    ctx.cfg
        .selectors
        .iter()
        .enumerate()
        .map(|(si, spec)| {
            let start = Instant::now();
            let res = match run_selector(ctx, si, spec, &rng) {
                Ok(run) => TrialResult::Done(run),
                Err(Error::Divergence(m)) => TrialResult::Failed { reason: format!("divergent training: {m}"), trace: None },
                Err(e @ Error::PoolExhausted { .. }) => {
                    let reason = e.to_string();
                    let Error::PoolExhausted { partial, .. } = e else { unreachable!() };
                    TrialResult::Failed { reason, trace: Some(*partial) }
                }
                Err(e) => return Err(e),
            };
            let dir = out.join(spec.name());
            let trace = match &res {
                TrialResult::Done(r) => Some(&r.trace),
                TrialResult::Failed { trace, .. } => trace.as_ref(),
            };
            if let Some(trace) = trace {
                let mut buf = Vec::new();
                trace.write_jsonl(&mut buf)?;
                write_atomic(&dir.join(format!("trace_trial{trial}.jsonl")), &buf)?;
            }
            if let (true, TrialResult::Done(TrialRun { model: Some(m), .. })) = (ctx.cfg.save_models, &res) {
                m.save_json(dir.join(format!("model_trial{trial}.json")))?;
            }
            Ok((res, start.elapsed().as_secs_f64()))
        })
        .collect()
}

fn run_selector(ctx: &Context, si: usize, spec: &SelectorSpec, rng: &RngStream) -> Result<TrialRun> {
    let test = &ctx.split.test;
    if let Some((variant, p)) = spec.iwes() {
        let icfg = ctx.cfg.iwes_config(variant, p);
        let outcome = run_iwes_observed(&ctx.split.train, &icfg, &ctx.trainer, rng, |_, m| Some(m.accuracy(test)))?;
        let points = outcome
            .trace
            .rounds
            .iter()
            .map(|r| CurvePoint { round: r.round, selected: r.cumulative, accuracy: r.accuracy.unwrap_or(f64::NAN) })
            .collect();
        return Ok(TrialRun { points, trace: outcome.trace, model: Some(outcome.model) });
    }
    if let SelectorSpec::Iwesv(p) = spec {
        let table = ctx.tables[si].as_ref().expect("table loaded for iwesv");
        return run_iwesv_selector(ctx, table, p, rng);
    }
    run_baseline(ctx, spec, rng)
}

fn run_baseline(ctx: &Context, spec: &SelectorSpec, rng: &RngStream) -> Result<TrialRun> {
    let budget = ctx.cfg.budget;
    let test = &ctx.split.test;
    let mut pool = ctx.split.train.clone();
    let total = pool.len() as f64;
    let mut seed_rng = rng.derive(keys::SEED_SET);
    let mut train_rng = rng.derive(keys::TRAINER);
    let mut select_rng = rng.derive(keys::SELECTOR);
    let mut trace = SelectionTrace::default();
    let seed = draw_seed_set(&mut pool, budget.seed_size, &mut seed_rng)?;
    let seed_p = budget.seed_size as f64 / total;
    trace
        .records
        .extend(seed.iter().map(|&i| SelectionRecord { round: 0, pass: 0, pool_index: i, p: seed_p, weight: 1.0 }));
    trace.push_round(0, 0, 0, false);
    let mut points = Vec::with_capacity(budget.rounds + 1);
    for round in 1..=budget.rounds {
        let model = ctx.trainer.train(&pool, &trace.selected(), &mut train_rng.fork())?;
        let acc = model.accuracy(test);
        trace.set_accuracy(round - 1, Some(acc));
        points.push(CurvePoint { round: round - 1, selected: trace.num_selected(), accuracy: acc });
        let k = budget.batch_size;
        let mut fallback = false;
        let picks = match spec {
            SelectorSpec::Random => select_random(&pool, k, &mut select_rng)?,
            SelectorSpec::Margin => select_topk_uncertainty(&pool, &model, k, UncertaintyScore::Margin)?,
            SelectorSpec::Entropy => select_topk_uncertainty(&pool, &model, k, UncertaintyScore::Entropy)?,
            SelectorSpec::LeastConfident => select_topk_uncertainty(&pool, &model, k, UncertaintyScore::LeastConfident)?,
            SelectorSpec::Coreset => {
                let chosen: Vec<usize> = trace.records.iter().map(|r| r.pool_index).collect();
                select_coreset_kcenter(&pool, &model, k, &chosen, &mut select_rng)?
            }
            SelectorSpec::Badge(b) => {
                let s = select_badge(&pool, &model, k, b.partitions, &mut select_rng)?;
                fallback = s.fallback;
                s.indices
            }
            _ => return Err(Error::Internal(format!("{} is not a baseline", spec.name()))),
        };
        for i in picks {
            pool.remove(i)?;
            trace.records.push(SelectionRecord { round, pass: 0, pool_index: i, p: 1.0, weight: 1.0 });
        }
        trace.push_round(round, 0, 0, fallback);
    }
    let model = ctx.trainer.train(&pool, &trace.selected(), &mut train_rng.fork())?;
    let acc = model.accuracy(test);
    trace.set_accuracy(budget.rounds, Some(acc));
    points.push(CurvePoint { round: budget.rounds, selected: trace.num_selected(), accuracy: acc });
    Ok(TrialRun { points, trace, model: Some(model) })
}

/// Streams i.i.d. draws of training examples through the version-space
/// sampler and trains the learner on the first `budget.at(r)` selections,
/// weighted by `1/p`, for every round the run reaches.
fn run_iwesv_selector(ctx: &Context, table: &HypothesisTable, p: &IwesvParams, rng: &RngStream) -> Result<TrialRun> {
    let budget = ctx.cfg.budget;
    let pool = &ctx.split.train;
    let horizon = p.horizon.unwrap_or(pool.len());
    let mut stream_rng = rng.derive(keys::STREAM);
    let stream: Vec<usize> = (0..horizon)
        .map(|_| rand::Rng::gen_range(&mut stream_rng, 0..pool.len()))
        .collect();
    let run = run_iwesv(table, &stream, p.delta, p.slack, &mut rng.derive(keys::SELECTOR))?;
    if run.num_selected() < budget.seed_size {
        return Err(Error::PoolExhausted {
            round: 0,
            passes: 1,
            selected: run.num_selected(),
            wanted: budget.seed_size,
            partial: Box::default(),
        });
    }
    let round_of = |n: usize| if n < budget.seed_size { 0 } else { 1 + (n - budget.seed_size) / budget.batch_size.max(1) };
    let mut trace = SelectionTrace::default();
    let mut step_of_selection = Vec::new();
    for s in run.steps.iter().filter(|s| s.selected) {
        let n = trace.records.len();
        if n >= budget.at(budget.rounds) {
            break;
        }
        trace.records.push(SelectionRecord { round: round_of(n), pass: 0, pool_index: s.column, p: s.p, weight: 1.0 / s.p });
        step_of_selection.push(s.t);
    }
    let mut train_rng = rng.derive(keys::TRAINER);
    let mut points = Vec::new();
    let mut model = None;
    let mut prev_step = 0;
    for round in 0..=budget.rounds {
        let b = budget.at(round);
        if trace.records.len() < b {
            break;
        }
        let step = step_of_selection[b - 1];
        trace.push_round(round, 0, step - prev_step, false);
        prev_step = step;
        let selected: Vec<WeightedExample> = trace.records[..b].iter().map(SelectionRecord::as_weighted).collect();
        let m = ctx.trainer.train(pool, &selected, &mut train_rng.fork())?;
        let acc = m.accuracy(&ctx.split.test);
        trace.set_accuracy(round, Some(acc));
        points.push(CurvePoint { round, selected: b, accuracy: acc });
        model = Some(m);
    }
    Ok(TrialRun { points, trace, model })
}

/// Drop rule: final accuracy more than three standard errors of the seed-set
/// accuracy below it.
fn divergence_reason(points: &[CurvePoint], n_test: usize) -> Option<String> {
    let (first, last) = (points.first()?, points.last()?);
    if !last.accuracy.is_finite() {
        return Some("non-finite accuracy".into());
    }
    let a = first.accuracy;
    let se = (a * (1.0 - a) / n_test as f64).sqrt();
    (last.accuracy < a - 3.0 * se)
        .then(|| format!("final accuracy {} below seed-set accuracy {a} by more than 3 stderr ({se})", last.accuracy))
}

fn aggregate(name: &str, curves: Vec<TrialCurve>, trials: usize) -> SelectorReport {
    let surviving_trials: Vec<usize> = curves.iter().filter(|c| c.dropped.is_none()).map(|c| c.trial).collect();
    let aggregated = !surviving_trials.is_empty() && surviving_trials.len() >= trials.min(3);
    let mut summary = Vec::new();
    if aggregated {
        let kept: Vec<&TrialCurve> = curves.iter().filter(|c| c.dropped.is_none()).collect();
        let rounds = kept.iter().map(|c| c.points.len()).min().unwrap_or(0);
        for r in 0..rounds {
            let values: Vec<f64> = kept.iter().map(|c| c.points[r].accuracy).collect();
            let (mean, stderr) = mean_stderr(&values);
            summary.push(SummaryRow { round: kept[0].points[r].round, selected: kept[0].points[r].selected, values, mean, stderr });
        }
    }
    SelectorReport { name: name.to_string(), curves, surviving_trials, summary, aggregated }
}

/// Mean and standard error of the mean (sample standard deviation); no
/// standard error for a single value.
pub fn mean_stderr(values: &[f64]) -> (f64, Option<f64>) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, None);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, Some((var / n).sqrt()))
}

fn curve_csv(curves: &[TrialCurve]) -> String {
    let mut s = String::from("trial,round,selected,accuracy\n");
    for c in curves {
        for p in &c.points {
            s.push_str(&format!("{},{},{},{}\n", c.trial, p.round, p.selected, p.accuracy));
        }
    }
    s
}

fn summary_csv(report: &SelectorReport) -> String {
    let mut s = String::from("round,selected");
    for t in &report.surviving_trials {
        s.push_str(&format!(",trial_{t}"));
    }
    s.push_str(",mean,stderr\n");
    for row in &report.summary {
        s.push_str(&format!("{},{}", row.round, row.selected));
        for v in &row.values {
            s.push_str(&format!(",{v}"));
        }
        let se = row.stderr.map(|v| v.to_string()).unwrap_or_default();
        s.push_str(&format!(",{},{se}\n", row.mean));
    }
    s
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}
