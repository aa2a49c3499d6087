//! Pools of labeled examples and weighted selections.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub features: Vec<f64>,
    pub label: usize,
}

impl LabeledExample {
    pub fn new(features: Vec<f64>, label: usize) -> Self {
        Self { features, label }
    }
}

/// A labeled pool with a removal mask.
///
/// Indices are stable for the lifetime of the pool: removing an example only
/// flips its mask bit.
#[derive(Debug, Clone)]
pub struct Pool {
    examples: Vec<LabeledExample>,
    num_classes: usize,
    dim: usize,
    removed: Vec<bool>,
    num_removed: usize,
}

impl Pool {
    pub fn new(examples: Vec<LabeledExample>, num_classes: usize) -> Result<Self> {
        if num_classes == 0 {
            return Err(Error::invalid("pool needs at least one class"));
        }
        let dim = examples.first().map_or(0, |e| e.features.len());
        for (i, e) in examples.iter().enumerate() {
            if e.features.len() != dim {
                return Err(Error::invalid(format!(
                    "example {i} has dimension {} but the pool has dimension {dim}",
                    e.features.len()
                )));
            }
            if e.label >= num_classes {
                return Err(Error::invalid(format!(
                    "example {i} has label {} outside [0, {num_classes})",
                    e.label
                )));
            }
        }
        let n = examples.len();
        Ok(Self {
            examples,
            num_classes,
            dim,
            removed: vec![false; n],
            num_removed: 0,
        })
    }

    /// Builds a pool with `c = max(label) + 1`.
    pub fn with_inferred_classes(examples: Vec<LabeledExample>) -> Result<Self> {
        let c = examples.iter().map(|e| e.label + 1).max().unwrap_or(1);
        Self::new(examples, c)
    }

    /// Original pool size T, removed examples included.
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, index: usize) -> &LabeledExample {
        &self.examples[index]
    }

    pub fn examples(&self) -> &[LabeledExample] {
        &self.examples
    }

    pub fn is_active(&self, index: usize) -> bool {
        !self.removed[index]
    }

    pub fn num_active(&self) -> usize {
        self.examples.len() - self.num_removed
    }

    pub fn num_removed(&self) -> usize {
        self.num_removed
    }

    /// Active indices in increasing order.
    pub fn active_indices(&self) -> Vec<usize> {
        (0..self.examples.len()).filter(|&i| !self.removed[i]).collect()
    }

    pub fn remove(&mut self, index: usize) -> Result<()> {
        if index >= self.examples.len() {
            return Err(Error::invalid(format!("pool index {index} out of range")));
        }
        if self.removed[index] {
            return Err(Error::Internal(format!("pool index {index} removed twice")));
        }
        self.removed[index] = true;
        self.num_removed += 1;
        Ok(())
    }

    /// Copy of the pool with every example active again.
    pub fn reset(&self) -> Self {
        Self {
            removed: vec![false; self.examples.len()],
            num_removed: 0,
            ..self.clone()
        }
    }

    /// Pool restricted to `indices`, re-indexed from zero.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let ex = indices.iter().map(|&i| self.examples[i].clone()).collect();
        Self::new(ex, self.num_classes)
    }

    /// Reads a CSV with header `f0,...,f{d-1},label`.
    ///
    /// When `num_classes` is `None` it is inferred as `max(label) + 1`.
    pub fn from_csv(path: impl AsRef<Path>, num_classes: Option<usize>) -> Result<Self> {
        let path = path.as_ref();
        let display = path.display().to_string();
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(path)
            .map_err(|e| csv_error(&display, e))?;
        let headers = reader.headers().map_err(|e| csv_error(&display, e))?.clone();
        let d = check_header(&headers).map_err(|message| Error::Parse {
            path: display.clone(),
            line: 1,
            message,
        })?;
        let mut examples = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| csv_error(&display, e))?;
            let line = record.position().map_or(0, |p| p.line());
            let parse_err = |message: String| Error::Parse {
                path: display.clone(),
                line,
                message,
            };
            let mut features = Vec::with_capacity(d);
            for j in 0..d {
                let v: f64 = record[j]
                    .trim()
                    .parse()
                    .map_err(|_| parse_err(format!("column f{j}: not a number: {:?}", &record[j])))?;
                if !v.is_finite() {
                    return Err(parse_err(format!("column f{j}: non-finite value")));
                }
                features.push(v);
            }
            let label: usize = record[d]
                .trim()
                .parse()
                .map_err(|_| parse_err(format!("label: not a nonnegative integer: {:?}", &record[d])))?;
            if let Some(c) = num_classes {
                if label >= c {
                    return Err(parse_err(format!("label {label} outside [0, {c})")));
                }
            }
            examples.push(LabeledExample::new(features, label));
        }
        if examples.is_empty() {
            return Err(Error::Parse {
                path: display,
                line: 1,
                message: "dataset has no rows".into(),
            });
        }
        match num_classes {
            Some(c) => Self::new(examples, c),
            None => Self::with_inferred_classes(examples),
        }
    }

    pub fn to_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = String::new();
        let header: Vec<String> = (0..self.dim).map(|j| format!("f{j}")).collect();
        out.push_str(&header.join(","));
        if self.dim > 0 {
            out.push(',');
        }
        out.push_str("label\n");
        for e in &self.examples {
            for v in &e.features {
                out.push_str(&format!("{v},"));
            }
            out.push_str(&format!("{}\n", e.label));
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

fn check_header(headers: &csv::StringRecord) -> std::result::Result<usize, String> {
    let n = headers.len();
    if n == 0 || headers[n - 1].trim() != "label" {
        return Err("last column must be `label`".into());
    }
    for j in 0..n - 1 {
        if headers[j].trim() != format!("f{j}") {
            return Err(format!("expected column `f{j}`, found `{}`", &headers[j]));
        }
    }
    Ok(n - 1)
}

fn csv_error(path: &str, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    Error::Parse {
        path: path.to_string(),
        line,
        message: e.to_string(),
    }
}

/// A selected pool example with its importance weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedExample {
    pub example_index: usize,
    pub weight: f64,
    pub sampling_probability: f64,
    pub round: usize,
}

impl WeightedExample {
    /// Importance-weighted selection: `w = min(1/p, cap)`.
    pub fn importance(example_index: usize, p: f64, cap: f64, round: usize) -> Self {
        Self {
            example_index,
            weight: (1.0 / p).min(cap),
            sampling_probability: p,
            round,
        }
    }

    /// Unit-weight entry (seed set and baseline selections).
    pub fn unit(example_index: usize, p: f64, round: usize) -> Self {
        Self {
            example_index,
            weight: 1.0,
            sampling_probability: p,
            round,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Pool {
        Pool::new(
            vec![
                LabeledExample::new(vec![0.0, 1.0], 0),
                LabeledExample::new(vec![1.0, 0.0], 1),
                LabeledExample::new(vec![2.0, 2.0], 2),
            ],
            3,
        )
        .unwrap()
    }

    #[test]
    fn removal_keeps_indices_stable() {
        let mut p = tiny();
        p.remove(1).unwrap();
        assert_eq!(p.active_indices(), vec![0, 2]);
        assert_eq!(p.num_active() + p.num_removed(), p.len());
        assert_eq!(p.get(2).label, 2);
        assert!(p.remove(1).is_err());
    }

    #[test]
    fn rejects_bad_labels_and_dims() {
        assert!(Pool::new(vec![LabeledExample::new(vec![0.0], 3)], 3).is_err());
        assert!(Pool::new(
            vec![
                LabeledExample::new(vec![0.0], 0),
                LabeledExample::new(vec![0.0, 1.0], 0)
            ],
            2
        )
        .is_err());
    }

    #[test]
    fn csv_roundtrip_and_inferred_classes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        tiny().to_csv(&path).unwrap();
        let back = Pool::from_csv(&path, None).unwrap();
        assert_eq!(back.num_classes(), 3);
        assert_eq!(back.examples(), tiny().examples());
    }

    #[test]
    fn csv_errors_carry_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "f0,label\n1.0,0\nabc,1\n").unwrap();
        match Pool::from_csv(&path, None) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
        std::fs::write(&path, "x,label\n1.0,0\n").unwrap();
        assert!(matches!(Pool::from_csv(&path, None), Err(Error::Parse { line: 1, .. })));
        std::fs::write(&path, "f0,label\n1.0,5\n").unwrap();
        assert!(Pool::from_csv(&path, Some(2)).is_err());
    }

    #[test]
    fn weight_is_capped_inverse_probability() {
        let w = WeightedExample::importance(0, 0.25, 2.0, 1);
        assert_eq!(w.weight, 2.0);
        let w = WeightedExample::importance(0, 0.8, 2.0, 1);
        assert_eq!(w.weight, 1.25);
    }
}
