//! Precision, recall and F1 over test cells, and aggregation across seeds.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::data::CellRef;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl EvalReport {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        EvalReport {
            tp,
            fp,
            fn_,
            precision,
            recall,
            f1: f1(precision, recall),
        }
    }

    /// Number of actual errors among the evaluated cells.
    pub fn support(&self) -> usize {
        self.tp + self.fn_
    }
}

pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Scores `flagged` against `errors`, restricted to `test_cells`.
pub fn evaluate(flagged: &HashSet<CellRef>, errors: &HashSet<CellRef>, test_cells: &[CellRef]) -> EvalReport {
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for c in test_cells {
        match (flagged.contains(c), errors.contains(c)) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    EvalReport::from_counts(tp, fp, fn_)
}

/// Median, mean and standard error of one metric over seeds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub runs: usize,
    pub median: f64,
    pub mean: f64,
    pub stderr: f64,
}

impl Aggregate {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Aggregate::default();
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let median = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
        };
        let mean = values.iter().sum::<f64>() / n as f64;
        let stderr = if n > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Aggregate {
            runs: n,
            median,
            mean,
            stderr,
        }
    }
}
