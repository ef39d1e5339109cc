//! Empirical value frequencies and pairwise conditional co-occurrence.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::data::Dataset;

/// Distinct values of one attribute with their occurrence counts.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ValueDictionary {
    values: Vec<String>,
    counts: Vec<u32>,
    #[serde(skip)]
    ids: HashMap<String, u32>,
}

impl ValueDictionary {
    fn fit<'a>(column: impl Iterator<Item = &'a str>) -> Self {
        let mut dict = ValueDictionary::default();
        for v in column {
            let id = match dict.ids.get(v) {
                Some(&id) => id,
                None => {
                    let id = dict.values.len() as u32;
                    dict.values.push(v.to_string());
                    dict.counts.push(0);
                    dict.ids.insert(v.to_string(), id);
                    id
                }
            };
            dict.counts[id as usize] += 1;
        }
        dict
    }

    fn reindex(&mut self) {
        self.ids = self
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| (v.clone(), i as u32))
            .collect();
    }

    pub fn id(&self, value: &str) -> Option<u32> {
        self.ids.get(value).copied()
    }

    pub fn count(&self, value: &str) -> u32 {
        self.id(value).map_or(0, |id| self.counts[id as usize])
    }

    pub fn values(&self) -> &[String] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Relative frequency of each value within its attribute.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalValueModel {
    rows: usize,
    dictionaries: Vec<ValueDictionary>,
}

impl EmpiricalValueModel {
    pub fn fit(dataset: &Dataset) -> Self {
        let dictionaries = (0..dataset.num_attributes())
            .map(|a| ValueDictionary::fit(dataset.column(a)))
            .collect();
        EmpiricalValueModel {
            rows: dataset.num_tuples(),
            dictionaries,
        }
    }

    /// Rebuilds lookup tables after deserialization.
    pub(crate) fn reindex(&mut self) {
        for d in &mut self.dictionaries {
            d.reindex();
        }
    }

    pub fn dictionary(&self, attr: usize) -> &ValueDictionary {
        &self.dictionaries[attr]
    }

    /// Frequency of `value` in `attr`; 0 for unseen values.
    pub fn frequency(&self, attr: usize, value: &str) -> f64 {
        if self.rows == 0 {
            return 0.0;
        }
        f64::from(self.dictionaries[attr].count(value)) / self.rows as f64
    }

    /// Frequency of `new` once one occurrence of `old` is replaced by it.
    pub fn frequency_replacing(&self, attr: usize, old: &str, new: &str) -> f64 {
        if old == new {
            return self.frequency(attr, new);
        }
        if self.rows == 0 {
            return 0.0;
        }
        f64::from(self.dictionaries[attr].count(new) + 1) / self.rows as f64
    }

    pub fn num_rows(&self) -> usize {
        self.rows
    }
}

fn pack(a: u32, b: u32) -> u64 {
    (u64::from(a) << 32) | u64::from(b)
}

/// Joint counts for every ordered attribute pair. The score for a cell in
/// `A_i` against attribute `A_j` is `P̂(value | t[A_j])`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CooccurrenceModel {
    attrs: usize,
    /// index `j * attrs + i`: packed (id in A_j, id in A_i) -> joint count
    joint: Vec<BTreeMap<u64, u32>>,
}

impl CooccurrenceModel {
    pub fn fit(dataset: &Dataset, values: &EmpiricalValueModel) -> Self {
        let n = dataset.num_attributes();
        let mut joint = vec![BTreeMap::new(); n * n];
        for row in dataset.rows() {
            let ids: Vec<u32> = row
                .iter()
                .enumerate()
                .map(|(a, v)| values.dictionary(a).id(v).expect("fitted on this dataset"))
                .collect();
            for j in 0..n {
                for i in 0..n {
                    if i != j {
                        *joint[j * n + i].entry(pack(ids[j], ids[i])).or_insert(0) += 1;
                    }
                }
            }
        }
        CooccurrenceModel { attrs: n, joint }
    }

    /// `P̂(A_i = value | A_j = given)`; 0 when the pair or the conditioning
    /// value was never seen.
    pub fn conditional(&self, values: &EmpiricalValueModel, i: usize, value: &str, j: usize, given: &str) -> f64 {
        let (Some(vi), Some(vj)) = (values.dictionary(i).id(value), values.dictionary(j).id(given)) else {
            return 0.0;
        };
        let denom = values.dictionary(j).counts[vj as usize];
        if denom == 0 {
            return 0.0;
        }
        let c = self.joint[j * self.attrs + i].get(&pack(vj, vi)).copied().unwrap_or(0);
        f64::from(c) / f64::from(denom)
    }

    /// Scores against every other attribute of the tuple, in attribute
    /// order, skipping the cell's own attribute.
    pub fn scores(&self, values: &EmpiricalValueModel, row: &[String], attr: usize, value: &str) -> Vec<f64> {
        (0..self.attrs)
            .filter(|&j| j != attr)
            .map(|j| self.conditional(values, attr, value, j, &row[j]))
            .collect()
    }

    /// Scores for a tuple whose cell in `attr` held `old` and now holds
    /// `new`, as if the counts were refitted after the change.
    pub fn scores_replacing(
        &self,
        values: &EmpiricalValueModel,
        row: &[String],
        attr: usize,
        old: &str,
        new: &str,
    ) -> Vec<f64> {
        if old == new {
            return self.scores(values, row, attr, new);
        }
        (0..self.attrs)
            .filter(|&j| j != attr)
            .map(|j| {
                let Some(vj) = values.dictionary(j).id(&row[j]) else {
                    return 0.0;
                };
                let denom = values.dictionary(j).counts[vj as usize];
                let joint = values
                    .dictionary(attr)
                    .id(new)
                    .and_then(|vi| self.joint[j * self.attrs + attr].get(&pack(vj, vi)).copied())
                    .unwrap_or(0);
                f64::from(joint + 1) / f64::from(denom)
            })
            .collect()
    }

    /// Observed conditional distribution of `A_i` given `A_j = given`.
    pub fn distribution(&self, values: &EmpiricalValueModel, i: usize, j: usize, given: &str) -> Vec<(String, f64)> {
        let Some(vj) = values.dictionary(j).id(given) else {
            return Vec::new();
        };
        let lo = pack(vj, 0);
        let hi = pack(vj, u32::MAX);
        let denom = f64::from(values.dictionary(j).counts[vj as usize]);
        self.joint[j * self.attrs + i]
            .range(lo..=hi)
            .map(|(k, c)| {
                let vi = (*k & 0xffff_ffff) as usize;
                (values.dictionary(i).values[vi].clone(), f64::from(*c) / denom)
            })
            .collect()
    }
}
