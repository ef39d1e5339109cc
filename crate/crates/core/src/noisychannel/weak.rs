//! Weakly supervised (clean, dirty) pairs from a leave-one-out Naïve Bayes
//! imputer over the dataset itself.
//!
//! Each cell's value is hidden and re-predicted from the other values of
//! its tuple. A confident prediction that disagrees with the observed
//! value becomes a labeled pair `(prediction, observed)`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::transform::LabeledPair;
use crate::data::{CellRef, Dataset};

/// Posterior a repair must strictly exceed to be emitted.
pub const DEFAULT_MIN_POSTERIOR: f64 = 0.90;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeakPair {
    pub cell: CellRef,
    pub pair: LabeledPair,
    pub posterior: f64,
}

/// Value id of one attribute to the (value id, joint count) pairs of another.
type Cooccurring = HashMap<u32, Vec<(u32, u32)>>;

/// Value dictionaries and co-occurrence counts for the whole dataset.
struct Counts {
    /// per attribute: value id of every row
    ids: Vec<Vec<u32>>,
    /// per attribute: values by id
    values: Vec<Vec<String>>,
    /// per attribute: occurrences by id
    freq: Vec<Vec<u32>>,
    /// co[i][j]: value id of A_j -> [(value id of A_i, joint count)]
    co: Vec<Vec<Cooccurring>>,
}

impl Counts {
    fn build(dataset: &Dataset) -> Self {
        let n_attr = dataset.num_attributes();
        let mut ids = Vec::with_capacity(n_attr);
        let mut values = Vec::with_capacity(n_attr);
        let mut freq = Vec::with_capacity(n_attr);
        for a in 0..n_attr {
            let mut dict: HashMap<&str, u32> = HashMap::new();
            let mut vals = Vec::new();
            let mut f = Vec::new();
            let col: Vec<u32> = dataset
                .column(a)
                .map(|v| {
                    let id = *dict.entry(v).or_insert_with(|| {
                        vals.push(v.to_string());
                        f.push(0);
                        (vals.len() - 1) as u32
                    });
                    f[id as usize] += 1;
                    id
                })
                .collect();
            ids.push(col);
            values.push(vals);
            freq.push(f);
        }
        let mut co = Vec::with_capacity(n_attr);
        for i in 0..n_attr {
            let mut per_j = Vec::with_capacity(n_attr);
            for j in 0..n_attr {
                let mut joint: HashMap<(u32, u32), u32> = HashMap::new();
                if i != j {
                    for (&w, &v) in ids[j].iter().zip(&ids[i]) {
                        *joint.entry((w, v)).or_default() += 1;
                    }
                }
                let mut by_w: HashMap<u32, Vec<(u32, u32)>> = HashMap::new();
                let mut joint: Vec<_> = joint.into_iter().collect();
                joint.sort_unstable();
                for ((w, u), c) in joint {
                    by_w.entry(w).or_default().push((u, c));
                }
                per_j.push(by_w);
            }
            co.push(per_j);
        }
        Counts { ids, values, freq, co }
    }
}

/// Leave-one-out posterior over candidate values for one cell, returned as
/// `(best value id, posterior of best)`. `None` when no candidate remains.
fn impute(counts: &Counts, tuple: usize, attr: usize, scratch: &mut Vec<f64>) -> Option<(u32, f64)> {
    let n_attr = counts.ids.len();
    let observed = counts.ids[attr][tuple];
    let freq = &counts.freq[attr];
    let n_rows = counts.ids[attr].len();
    if n_rows < 2 {
        return None;
    }
    scratch.clear();
    scratch.resize(freq.len(), 0.0);
    // log P(u) + sum_j log(1 / (count(u) + |dom_j|)); the joint +1 terms
    // are added below only for co-occurring candidates
    let hidden = |u: usize| freq[u] - u32::from(u as u32 == observed);
    for (u, s) in scratch.iter_mut().enumerate() {
        let c = hidden(u);
        if c == 0 {
            *s = f64::NEG_INFINITY;
            continue;
        }
        let mut acc = (c as f64 / (n_rows - 1) as f64).ln();
        for j in (0..n_attr).filter(|&j| j != attr) {
            acc -= (c as f64 + counts.values[j].len() as f64).ln();
        }
        *s = acc;
    }
    for j in (0..n_attr).filter(|&j| j != attr) {
        let w = counts.ids[j][tuple];
        if let Some(list) = counts.co[attr][j].get(&w) {
            for &(u, c) in list {
                // the hidden cell contributed (observed, w) once
                let c = c - u32::from(u == observed);
                if c > 0 {
                    scratch[u as usize] += (c as f64 + 1.0).ln();
                }
            }
        }
    }
    let (best, &best_score) = scratch
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))?;
    if best_score == f64::NEG_INFINITY {
        return None;
    }
    let z: f64 = scratch.iter().map(|s| (s - best_score).exp()).sum();
    Some((best as u32, 1.0 / z))
}

/// Pairs `(repair, observed)` for every cell whose leave-one-out repair
/// differs from the observed value with posterior above `min_posterior`.
pub fn weak_label_pairs_with(dataset: &Dataset, min_posterior: f64) -> Vec<WeakPair> {
    if dataset.num_attributes() < 2 {
        log::warn!("weak supervision needs at least two attributes");
        return Vec::new();
    }
    let counts = Counts::build(dataset);
    let mut scratch = Vec::new();
    let mut out = Vec::new();
    for tuple in 0..dataset.num_tuples() {
        for attr in 0..dataset.num_attributes() {
            let Some((best, posterior)) = impute(&counts, tuple, attr, &mut scratch) else {
                continue;
            };
            let observed = counts.ids[attr][tuple];
            if best != observed && posterior > min_posterior {
                let clean = counts.values[attr][best as usize].clone();
                let dirty = counts.values[attr][observed as usize].clone();
                if let Some(pair) = LabeledPair::new(clean, dirty) {
                    out.push(WeakPair {
                        cell: CellRef::new(tuple, attr),
                        pair,
                        posterior,
                    });
                }
            }
        }
    }
    out
}

pub fn weak_label_pairs(dataset: &Dataset) -> Vec<WeakPair> {
    weak_label_pairs_with(dataset, DEFAULT_MIN_POSTERIOR)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Schema;

    fn table(rows: &[(&str, &str)]) -> Dataset {
        let schema = Schema::new(["city", "zip"]).unwrap();
        let rows = rows.iter().map(|(a, b)| vec![a.to_string(), b.to_string()]).collect();
        Dataset::new("t", schema, rows).unwrap()
    }

    fn deterministic(corrupt: bool) -> Dataset {
        let mut rows = Vec::new();
        for i in 0..20 {
            if i % 2 == 0 {
                rows.push(("chicago", "60612"));
            } else {
                rows.push(("boston", "02110"));
            }
        }
        if corrupt {
            rows[4] = ("chicago", "6061x2");
        }
        table(&rows)
    }

    /// Direct evaluation of the leave-one-out posterior for one cell, for
    /// cross-checking the sparse implementation.
    fn posterior_by_hand(ds: &Dataset, tuple: usize, attr: usize) -> Vec<(String, f64)> {
        let other = 1 - attr;
        let rows: Vec<&Vec<String>> = ds
            .rows()
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != tuple)
            .map(|(_, r)| r)
            .collect();
        let mut cands: Vec<String> = ds.column(attr).map(str::to_string).collect();
        cands.sort();
        cands.dedup();
        let dom_other = {
            let mut v: Vec<&str> = ds.column(other).collect();
            v.sort();
            v.dedup();
            v.len() as f64
        };
        let w = &ds.row(tuple)[other];
        let mut scores: Vec<(String, f64)> = cands
            .into_iter()
            .map(|u| {
                let c = rows.iter().filter(|r| r[attr] == u).count() as f64;
                let joint = rows.iter().filter(|r| r[attr] == u && &r[other] == w).count() as f64;
                let prior = c / rows.len() as f64;
                let lik = if c == 0.0 { 0.0 } else { (joint + 1.0) / (c + dom_other) };
                (u, prior * lik)
            })
            .collect();
        let z: f64 = scores.iter().map(|s| s.1).sum();
        for s in &mut scores {
            s.1 /= z;
        }
        scores
    }

    #[test]
    fn corrupted_cell_gets_majority_repair() {
        let ds = deterministic(true);
        let pairs = weak_label_pairs(&ds);
        assert_eq!(pairs.len(), 1, "{pairs:?}");
        assert_eq!(pairs[0].cell, CellRef::new(4, 1));
        assert_eq!(pairs[0].pair, LabeledPair::new("60612", "6061x2").unwrap());
        // hand computation: chicago occurs 9 more times with 60612 and never
        // with 02110, so P(60612 | chicago) = (9+1)/(9+2) * 9/19 against
        // 10/19 * (0+1)/(10+2) for 02110
        let by_hand = posterior_by_hand(&ds, 4, 1);
        let expect = by_hand.iter().find(|s| s.0 == "60612").unwrap().1;
        assert!((pairs[0].posterior - expect).abs() < 1e-12);
        let a: f64 = 9.0 / 19.0 * 10.0 / 11.0;
        let b: f64 = 10.0 / 19.0 * 1.0 / 12.0;
        assert!((pairs[0].posterior - a / (a + b)).abs() < 1e-12);
    }

    #[test]
    fn clean_table_yields_nothing() {
        assert!(weak_label_pairs(&deterministic(false)).is_empty());
    }

    #[test]
    fn threshold_is_strict() {
        let ds = deterministic(true);
        let p = weak_label_pairs(&ds)[0].posterior;
        assert!(weak_label_pairs_with(&ds, p).is_empty());
        assert_eq!(weak_label_pairs_with(&ds, p - 1e-12).len(), 1);
    }

    #[test]
    fn single_attribute_yields_nothing() {
        let schema = Schema::new(["a"]).unwrap();
        let ds = Dataset::new("t", schema, vec![vec!["x".into()], vec!["y".into()]]).unwrap();
        assert!(weak_label_pairs(&ds).is_empty());
    }
}
