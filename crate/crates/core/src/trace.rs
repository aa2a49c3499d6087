//! Per-round selection records and their JSON-lines encoding.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::WeightedExample;
use crate::error::Result;

/// One accepted example.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionRecord {
    pub round: usize,
    pub pass: usize,
    pub pool_index: usize,
    pub p: f64,
    pub weight: f64,
}

impl SelectionRecord {
    pub fn as_weighted(&self) -> WeightedExample {
        WeightedExample {
            example_index: self.pool_index,
            weight: self.weight,
            sampling_probability: self.p,
            round: self.round,
        }
    }
}

/// Per-round summary. Round 0 is the seed set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundSummary {
    pub round: usize,
    pub selected: usize,
    pub cumulative: usize,
    /// Highest pass index reached while filling the batch.
    pub passes: usize,
    /// Bernoulli draws performed this round.
    pub trials: usize,
    /// Accuracy of the model trained on everything selected up to and including this round.
    pub accuracy: Option<f64>,
    /// Set when a selector had to fall back to a degenerate rule (e.g. BADGE with all-zero gradients).
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub fallback: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TraceLine {
    Selection(SelectionRecord),
    Round(RoundSummary),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SelectionTrace {
    pub records: Vec<SelectionRecord>,
    pub rounds: Vec<RoundSummary>,
}

impl SelectionTrace {
    pub fn selected(&self) -> Vec<WeightedExample> {
        self.records.iter().map(SelectionRecord::as_weighted).collect()
    }

    pub fn num_selected(&self) -> usize {
        self.records.len()
    }

    pub(crate) fn push_round(&mut self, round: usize, passes: usize, trials: usize, fallback: bool) {
        let selected = self.records.iter().filter(|r| r.round == round).count();
        self.rounds.push(RoundSummary {
            round,
            selected,
            cumulative: self.records.len(),
            passes,
            trials,
            accuracy: None,
            fallback,
        });
    }

    pub(crate) fn set_accuracy(&mut self, round: usize, accuracy: Option<f64>) {
        if let Some(s) = self.rounds.iter_mut().find(|s| s.round == round) {
            s.accuracy = accuracy;
        }
    }

    /// Selections of each round followed by that round's summary.
    pub fn lines(&self) -> Vec<TraceLine> {
        let mut out = Vec::with_capacity(self.records.len() + self.rounds.len());
        for s in &self.rounds {
            out.extend(
                self.records
                    .iter()
                    .filter(|r| r.round == s.round)
                    .map(|r| TraceLine::Selection(*r)),
            );
            out.push(TraceLine::Round(s.clone()));
        }
        out
    }

    pub fn write_jsonl(&self, mut w: impl Write) -> Result<()> {
        for line in self.lines() {
            serde_json::to_writer(&mut w, &line)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn save_jsonl(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut trace = SelectionTrace::default();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            match serde_json::from_str::<TraceLine>(line)? {
                TraceLine::Selection(r) => trace.records.push(r),
                TraceLine::Round(s) => trace.rounds.push(s),
            }
        }
        Ok(trace)
    }
}
