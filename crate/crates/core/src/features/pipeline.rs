//! Fitted representation models and per-cell featurization.
//!
//! Wide vector layout, in order:
//!
//! | slot | width |
//! |------|-------|
//! | least probable raw 3-gram | 1 |
//! | least probable symbolic 3-gram | 1 |
//! | value frequency | 1 |
//! | one-hot column id | N |
//! | co-occurrence with each other attribute | N - 1 |
//! | violations per constraint | \|Σ\| |
//! | distance to nearest other value | 1 |
//!
//! Deep inputs are four embedding vectors: mean character vector, mean
//! in-cell token vector, mean tuple token vector, and the whole-value
//! neighbor vector.

use std::cell::RefCell;
use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::embedding::{cosine, tokenize, Context, EmbeddingConfig, EmbeddingModel, Granularity};
use super::empirical::{CooccurrenceModel, EmpiricalValueModel};
use super::format::{Alphabet, NGramFormatModel};
use crate::constraints::{count_violations, DenialConstraint, ViolationIndex};
use crate::data::{CellRef, Dataset, Schema};
use crate::error::{Error, Result};

/// Representation models that can be switched off one at a time.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureGroup {
    CharEmbedding,
    WordEmbedding,
    #[serde(rename = "format-3gram")]
    Format3Gram,
    #[serde(rename = "symbolic-3gram")]
    SymbolicFormat,
    ValueFrequency,
    ColumnId,
    Cooccurrence,
    TupleEmbedding,
    Constraints,
    Neighborhood,
}

impl FeatureGroup {
    pub const ALL: [FeatureGroup; 10] = [
        FeatureGroup::CharEmbedding,
        FeatureGroup::WordEmbedding,
        FeatureGroup::Format3Gram,
        FeatureGroup::SymbolicFormat,
        FeatureGroup::ValueFrequency,
        FeatureGroup::ColumnId,
        FeatureGroup::Cooccurrence,
        FeatureGroup::TupleEmbedding,
        FeatureGroup::Constraints,
        FeatureGroup::Neighborhood,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FeatureGroup::CharEmbedding => "char-embedding",
            FeatureGroup::WordEmbedding => "word-embedding",
            FeatureGroup::Format3Gram => "format-3gram",
            FeatureGroup::SymbolicFormat => "symbolic-3gram",
            FeatureGroup::ValueFrequency => "value-frequency",
            FeatureGroup::ColumnId => "column-id",
            FeatureGroup::Cooccurrence => "cooccurrence",
            FeatureGroup::TupleEmbedding => "tuple-embedding",
            FeatureGroup::Constraints => "constraints",
            FeatureGroup::Neighborhood => "neighborhood",
        }
    }

    /// Index of the deep input fed by this group, if it is an embedding.
    pub fn deep_slot(self) -> Option<usize> {
        match self {
            FeatureGroup::CharEmbedding => Some(0),
            FeatureGroup::WordEmbedding => Some(1),
            FeatureGroup::TupleEmbedding => Some(2),
            // the neighbor vector travels with the neighborhood distance
            FeatureGroup::Neighborhood => Some(3),
            _ => None,
        }
    }
}

impl fmt::Display for FeatureGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureGroup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FeatureGroup::ALL.into_iter().find(|g| g.name() == s).ok_or_else(|| {
            let names: Vec<_> = FeatureGroup::ALL.iter().map(|g| g.name()).collect();
            Error::Config(format!(
                "unknown feature group `{s}`; expected one of {}",
                names.join(", ")
            ))
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    pub embedding: EmbeddingConfig,
    /// Groups whose features are zeroed.
    pub disabled: BTreeSet<FeatureGroup>,
}

/// How a wide column is transformed before standardization.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scale {
    /// Probabilities: `ln(x + 1e-6)`.
    Log,
    /// Counts: `ln(1 + x)`.
    Log1p,
    Identity,
}

impl Scale {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Scale::Log => (x + 1e-6).ln(),
            Scale::Log1p => x.ln_1p(),
            Scale::Identity => x,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureLayout {
    pub num_attributes: usize,
    pub num_constraints: usize,
    pub embedding_dims: usize,
}

pub const DEEP_INPUTS: usize = 4;

impl FeatureLayout {
    pub fn wide_dim(&self) -> usize {
        3 + self.num_attributes + (self.num_attributes - 1) + self.num_constraints + 1
    }

    pub fn deep_dim(&self) -> usize {
        DEEP_INPUTS * self.embedding_dims
    }

    fn column_id(&self) -> Range<usize> {
        3..3 + self.num_attributes
    }

    fn cooccurrence(&self) -> Range<usize> {
        let s = 3 + self.num_attributes;
        s..s + self.num_attributes - 1
    }

    fn violations(&self) -> Range<usize> {
        let s = 2 + 2 * self.num_attributes;
        s..s + self.num_constraints
    }

    fn neighborhood(&self) -> usize {
        self.wide_dim() - 1
    }

    /// Wide columns owned by a group.
    pub fn wide_range(&self, group: FeatureGroup) -> Range<usize> {
        match group {
            FeatureGroup::Format3Gram => 0..1,
            FeatureGroup::SymbolicFormat => 1..2,
            FeatureGroup::ValueFrequency => 2..3,
            FeatureGroup::ColumnId => self.column_id(),
            FeatureGroup::Cooccurrence => self.cooccurrence(),
            FeatureGroup::Constraints => self.violations(),
            FeatureGroup::Neighborhood => self.neighborhood()..self.neighborhood() + 1,
            _ => 0..0,
        }
    }

    pub fn scales(&self) -> Vec<Scale> {
        let mut s = vec![Scale::Log; 3];
        s.extend(std::iter::repeat_n(Scale::Identity, self.num_attributes));
        s.extend(std::iter::repeat_n(Scale::Log, self.num_attributes - 1));
        s.extend(std::iter::repeat_n(Scale::Log1p, self.num_constraints));
        s.push(Scale::Identity);
        s
    }

    /// Human-readable name of every wide column.
    pub fn wide_names(&self, schema: &Schema, constraints: &[DenialConstraint]) -> Vec<String> {
        let mut names = vec![
            "raw_3gram".to_string(),
            "symbolic_3gram".into(),
            "value_frequency".into(),
        ];
        names.extend(schema.attributes().iter().map(|a| format!("column={a}")));
        names.extend((0..self.num_attributes - 1).map(|j| format!("cooccurrence[{j}]")));
        names.extend(constraints.iter().map(|dc| format!("violations[{}]", dc.id)));
        names.push("neighbor_distance".into());
        names
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector {
    pub wide: Vec<f64>,
    /// `DEEP_INPUTS` embedding vectors, concatenated.
    pub deep: Vec<f32>,
}

/// Every fitted representation model for one dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeaturePipeline {
    schema: Schema,
    constraints: Vec<DenialConstraint>,
    layout: FeatureLayout,
    disabled: BTreeSet<FeatureGroup>,
    raw: Vec<NGramFormatModel>,
    symbolic: Vec<NGramFormatModel>,
    values: EmpiricalValueModel,
    cooccurrence: CooccurrenceModel,
    /// character, cell-token, tuple-bag, dataset-neighbor
    embeddings: Vec<EmbeddingModel>,
}

fn chars_of(value: &str) -> Vec<String> {
    value.chars().map(String::from).collect()
}

fn tuple_tokens<'a>(row: impl IntoIterator<Item = &'a str>) -> Vec<&'a str> {
    let mut seen = HashSet::new();
    row.into_iter().flat_map(tokenize).filter(|t| seen.insert(*t)).collect()
}

impl FeaturePipeline {
    pub fn fit(dataset: &Dataset, constraints: &[DenialConstraint], config: &FeatureConfig) -> Result<Self> {
        if dataset.num_tuples() == 0 {
            return Err(Error::Empty(format!("dataset {} has no tuples", dataset.id())));
        }
        let n = dataset.num_attributes();
        let raw = (0..n)
            .map(|a| NGramFormatModel::fit(Alphabet::Raw, dataset.column(a)))
            .collect();
        let symbolic = (0..n)
            .map(|a| NGramFormatModel::fit(Alphabet::Symbolic, dataset.column(a)))
            .collect();
        let values = EmpiricalValueModel::fit(dataset);
        let cooccurrence = CooccurrenceModel::fit(dataset, &values);

        let ec = &config.embedding;
        let char_corpus: Vec<Vec<String>> = dataset
            .rows()
            .iter()
            .flatten()
            .filter(|v| !v.is_empty())
            .map(|v| chars_of(v))
            .collect();
        let token_corpus: Vec<Vec<String>> = dataset
            .rows()
            .iter()
            .flatten()
            .map(|v| tokenize(v).map(String::from).collect::<Vec<_>>())
            .filter(|t| !t.is_empty())
            .collect();
        let tuple_corpus: Vec<Vec<String>> = dataset
            .rows()
            .iter()
            .map(|r| {
                tuple_tokens(r.iter().map(String::as_str))
                    .into_iter()
                    .map(String::from)
                    .collect()
            })
            .collect();
        let value_corpus: Vec<Vec<String>> = dataset
            .rows()
            .iter()
            .map(|r| r.iter().filter(|v| !v.is_empty()).cloned().collect())
            .collect();
        let embeddings = vec![
            EmbeddingModel::train(Granularity::Character, &char_corpus, Context::Window(ec.window), ec)?,
            EmbeddingModel::train(Granularity::CellToken, &token_corpus, Context::Window(ec.window), ec)?,
            EmbeddingModel::train(Granularity::TupleBag, &tuple_corpus, Context::Bag, ec)?,
            EmbeddingModel::train(Granularity::DatasetNeighbor, &value_corpus, Context::Bag, ec)?,
        ];

        Ok(FeaturePipeline {
            schema: dataset.schema().clone(),
            constraints: constraints.to_vec(),
            layout: FeatureLayout {
                num_attributes: n,
                num_constraints: constraints.len(),
                embedding_dims: ec.dims,
            },
            disabled: config.disabled.clone(),
            raw,
            symbolic,
            values,
            cooccurrence,
            embeddings,
        })
    }

    /// Rebuilds lookup tables after deserialization.
    pub(crate) fn reindex(&mut self) {
        self.values.reindex();
        for e in &mut self.embeddings {
            e.reindex();
        }
    }

    pub fn layout(&self) -> &FeatureLayout {
        &self.layout
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn constraints(&self) -> &[DenialConstraint] {
        &self.constraints
    }

    pub fn disabled(&self) -> &BTreeSet<FeatureGroup> {
        &self.disabled
    }

    /// Copy of this pipeline with a different set of disabled groups.
    pub fn with_disabled(&self, disabled: BTreeSet<FeatureGroup>) -> Self {
        FeaturePipeline {
            disabled,
            ..self.clone()
        }
    }

    pub fn embedding(&self, granularity: Granularity) -> &EmbeddingModel {
        &self.embeddings[granularity as usize]
    }

    pub fn format_model(&self, attr: usize, alphabet: Alphabet) -> &NGramFormatModel {
        match alphabet {
            Alphabet::Raw => &self.raw[attr],
            Alphabet::Symbolic => &self.symbolic[attr],
        }
    }

    pub fn value_model(&self) -> &EmpiricalValueModel {
        &self.values
    }

    pub fn cooccurrence_model(&self) -> &CooccurrenceModel {
        &self.cooccurrence
    }

    /// Hash of everything that fixes the feature layout: attribute names,
    /// constraint texts and embedding width.
    pub fn layout_hash(&self) -> String {
        layout_hash(&self.schema, &self.constraints, self.layout.embedding_dims)
    }

    pub fn featurizer<'a>(&'a self, dataset: &'a Dataset) -> Result<Featurizer<'a>> {
        Featurizer::new(self, dataset)
    }
}

pub fn layout_hash(schema: &Schema, constraints: &[DenialConstraint], dims: usize) -> String {
    let mut h = Sha256::new();
    for a in schema.attributes() {
        h.update(a.as_bytes());
        h.update([0]);
    }
    h.update([1]);
    for dc in constraints {
        h.update(dc.text.as_bytes());
        h.update([0]);
    }
    h.update((dims as u64).to_le_bytes());
    h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// A fitted pipeline bound to the dataset it was fitted on.
pub struct Featurizer<'a> {
    pipeline: &'a FeaturePipeline,
    dataset: &'a Dataset,
    index: ViolationIndex<'a>,
    violations: Vec<Vec<u32>>,
    /// per attribute: distinct values with unit-length neighbor vectors
    neighbors: Vec<Vec<(String, Vec<f32>)>>,
    distance_cache: RefCell<HashMap<CellKey, f64>>,
    vector_cache: RefCell<HashMap<(usize, String), Vec<f32>>>,
    tuple_cache: RefCell<HashMap<usize, Vec<f32>>>,
}

type CellKey = (usize, String);

fn unit(mut v: Vec<f32>) -> Vec<f32> {
    let norm = v.iter().map(|x| f64::from(*x).powi(2)).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x = (f64::from(*x) / norm) as f32);
    }
    v
}

impl<'a> Featurizer<'a> {
    fn new(pipeline: &'a FeaturePipeline, dataset: &'a Dataset) -> Result<Self> {
        let expected = pipeline.layout_hash();
        let found = layout_hash(dataset.schema(), &pipeline.constraints, pipeline.layout.embedding_dims);
        if expected != found {
            return Err(Error::LayoutMismatch { expected, found });
        }
        let index = ViolationIndex::new(dataset, &pipeline.constraints);
        let violations = count_violations(dataset, &pipeline.constraints);
        let model = pipeline.embedding(Granularity::DatasetNeighbor);
        let neighbors = (0..dataset.num_attributes())
            .map(|a| {
                let mut seen = HashSet::new();
                dataset
                    .column(a)
                    .filter(|v| seen.insert(*v))
                    .map(|v| (v.to_string(), unit(model.vector(v))))
                    .collect()
            })
            .collect();
        Ok(Featurizer {
            pipeline,
            dataset,
            index,
            violations,
            neighbors,
            distance_cache: RefCell::new(HashMap::new()),
            vector_cache: RefCell::new(HashMap::new()),
            tuple_cache: RefCell::new(HashMap::new()),
        })
    }

    pub fn dataset(&self) -> &Dataset {
        self.dataset
    }

    pub fn pipeline(&self) -> &FeaturePipeline {
        self.pipeline
    }

    /// Violation counts of the dataset's own tuples.
    pub fn violations(&self, tuple: usize) -> &[u32] {
        &self.violations[tuple]
    }

    /// Smallest cosine distance from `value` to another distinct value of
    /// `attr`. `excluded` is left out of the candidates as well (a value
    /// that no longer occurs once a cell is rewritten).
    pub fn neighborhood_distance(&self, attr: usize, value: &str, excluded: Option<&str>) -> f64 {
        let model = self.pipeline.embedding(Granularity::DatasetNeighbor);
        let v = unit(model.vector(value));
        self.neighbors[attr]
            .iter()
            .filter(|(u, _)| u != value && Some(u.as_str()) != excluded)
            .map(|(_, w)| 1.0 - cosine(&v, w))
            .reduce(f64::min)
            .unwrap_or(0.0)
    }

    fn cached_distance(&self, attr: usize, value: &str) -> f64 {
        let key = (attr, value.to_string());
        if let Some(&d) = self.distance_cache.borrow().get(&key) {
            return d;
        }
        let d = self.neighborhood_distance(attr, value, None);
        self.distance_cache.borrow_mut().insert(key, d);
        d
    }

    fn value_vector(&self, slot: usize, value: &str) -> Vec<f32> {
        let key = (slot, value.to_string());
        if let Some(v) = self.vector_cache.borrow().get(&key) {
            return v.clone();
        }
        let p = self.pipeline;
        let v = match slot {
            0 => {
                let chars = chars_of(value);
                p.embeddings[0].mean_vector(chars.iter().map(String::as_str))
            }
            1 => p.embeddings[1].mean_vector(tokenize(value)),
            _ => p.embeddings[3].vector(value),
        };
        self.vector_cache.borrow_mut().insert(key, v.clone());
        v
    }

    fn tuple_vector(&self, row: &[String], tuple: Option<usize>) -> Vec<f32> {
        if let Some(t) = tuple {
            if let Some(v) = self.tuple_cache.borrow().get(&t) {
                return v.clone();
            }
        }
        let v = self.pipeline.embeddings[2].mean_vector(tuple_tokens(row.iter().map(String::as_str)));
        if let Some(t) = tuple {
            self.tuple_cache.borrow_mut().insert(t, v.clone());
        }
        v
    }

    /// Features of a cell with its observed value.
    pub fn featurize(&self, cell: CellRef) -> FeatureVector {
        self.build(cell, None)
    }

    /// Features of a cell as if its value were `value`, with the rest of
    /// the tuple unchanged and dataset statistics adjusted for the
    /// replacement.
    pub fn featurize_with(&self, cell: CellRef, value: &str) -> FeatureVector {
        if value == self.dataset.value(cell) {
            self.build(cell, None)
        } else {
            self.build(cell, Some(value))
        }
    }

    fn build(&self, cell: CellRef, replacement: Option<&str>) -> FeatureVector {
        let p = self.pipeline;
        let layout = &p.layout;
        let attr = cell.attr;
        let old = self.dataset.value(cell);
        let value = replacement.unwrap_or(old);
        let mut wide = vec![0.0; layout.wide_dim()];

        let row: std::borrow::Cow<'_, [String]> = match replacement {
            None => self.dataset.row(cell.tuple).into(),
            Some(v) => {
                let mut r = self.dataset.row(cell.tuple).to_vec();
                r[attr] = v.to_string();
                r.into()
            }
        };

        wide[0] = p.raw[attr].score_replacing(old, value);
        wide[1] = p.symbolic[attr].score_replacing(old, value);
        wide[2] = p.values.frequency_replacing(attr, old, value);
        wide[layout.column_id().start + attr] = 1.0;
        let cooc = p.cooccurrence.scores_replacing(&p.values, &row, attr, old, value);
        wide[layout.cooccurrence()].copy_from_slice(&cooc);
        let counts = match replacement {
            None => std::borrow::Cow::Borrowed(self.violations[cell.tuple].as_slice()),
            Some(_) => std::borrow::Cow::Owned(self.index.counts_for(cell.tuple, &row)),
        };
        for (w, c) in wide[layout.violations()].iter_mut().zip(counts.iter()) {
            *w = f64::from(*c);
        }
        wide[layout.neighborhood()] = match replacement {
            None => self.cached_distance(attr, value),
            Some(_) => {
                let gone = (p.values.dictionary(attr).count(old) == 1).then_some(old);
                self.neighborhood_distance(attr, value, gone)
            }
        };

        let d = layout.embedding_dims;
        let mut deep = vec![0f32; layout.deep_dim()];
        deep[0..d].copy_from_slice(&self.value_vector(0, value));
        deep[d..2 * d].copy_from_slice(&self.value_vector(1, value));
        let tuple_key = replacement.is_none().then_some(cell.tuple);
        deep[2 * d..3 * d].copy_from_slice(&self.tuple_vector(&row, tuple_key));
        deep[3 * d..4 * d].copy_from_slice(&self.value_vector(3, value));

        for &g in &p.disabled {
            wide[layout.wide_range(g)].iter_mut().for_each(|x| *x = 0.0);
            if let Some(slot) = g.deep_slot() {
                deep[slot * d..(slot + 1) * d].iter_mut().for_each(|x| *x = 0.0);
            }
        }
        FeatureVector { wide, deep }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::parse_constraints;

    fn small_embedding() -> EmbeddingConfig {
        EmbeddingConfig {
            dims: 8,
            epochs: 2,
            buckets: 64,
            ..EmbeddingConfig::default()
        }
    }

    fn config() -> FeatureConfig {
        FeatureConfig {
            embedding: small_embedding(),
            ..FeatureConfig::default()
        }
    }

    fn five_attr() -> Dataset {
        let schema = Schema::new(["a", "b", "c", "d", "e"]).unwrap();
        let rows = (0..20)
            .map(|i| (0..5).map(|j| format!("v{}-{}", j, i % (j + 2))).collect())
            .collect();
        Dataset::new("five", schema, rows).unwrap()
    }

    #[test]
    fn wide_dimension_follows_layout() {
        let ds = five_attr();
        let dcs = parse_constraints(
            "t1&t2: t1.a=t2.a & t1.b!=t2.b\nt1&t2: t1.c=t2.c & t1.d!=t2.d\nt1: t1.e='x'\n",
            ds.schema(),
        )
        .unwrap();
        let p = FeaturePipeline::fit(&ds, &dcs, &config()).unwrap();
        assert_eq!(p.layout().wide_dim(), 16);
        assert_eq!(p.layout().scales().len(), 16);
        let f = p.featurizer(&ds).unwrap().featurize(CellRef::new(3, 2));
        assert_eq!(f.wide.len(), 16);
        assert_eq!(f.deep.len(), 4 * 8);
        assert!(f.wide.iter().all(|x| x.is_finite()));
        assert_eq!(f.wide[3 + 2], 1.0);
        assert_eq!(f.wide[3..8].iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn no_constraints_means_empty_violation_block() {
        let ds = five_attr();
        let p = FeaturePipeline::fit(&ds, &[], &config()).unwrap();
        assert_eq!(p.layout().wide_dim(), 13);
        assert!(p.layout().wide_range(FeatureGroup::Constraints).is_empty());
    }

    #[test]
    fn identical_cells_identical_features() {
        let schema = Schema::new(["city", "zip"]).unwrap();
        let rows = vec![vec!["chicago".to_string(), "60612".to_string()]; 6];
        let ds = Dataset::new("t", schema, rows).unwrap();
        let p = FeaturePipeline::fit(&ds, &[], &config()).unwrap();
        let fz = p.featurizer(&ds).unwrap();
        assert_eq!(fz.featurize(CellRef::new(0, 1)), fz.featurize(CellRef::new(4, 1)));
        // a second featurizer reproduces the first bit for bit
        let again = p.featurizer(&ds).unwrap();
        assert_eq!(fz.featurize(CellRef::new(2, 0)), again.featurize(CellRef::new(2, 0)));
    }

    #[test]
    fn single_distinct_value_has_zero_distance() {
        let schema = Schema::new(["city", "zip"]).unwrap();
        let rows = (0..6)
            .map(|i| vec!["chicago".to_string(), format!("6061{i}")])
            .collect();
        let ds = Dataset::new("t", schema, rows).unwrap();
        let p = FeaturePipeline::fit(&ds, &[], &config()).unwrap();
        let fz = p.featurizer(&ds).unwrap();
        let f = fz.featurize(CellRef::new(0, 0));
        assert_eq!(f.wide[p.layout().wide_dim() - 1], 0.0);
        assert!(fz.featurize(CellRef::new(0, 1)).wide[p.layout().wide_dim() - 1] > 0.0);
    }

    #[test]
    fn replacement_matches_a_dataset_with_that_value() {
        let schema = Schema::new(["city", "zip"]).unwrap();
        let mut rows: Vec<Vec<String>> = (0..10)
            .map(|i| {
                if i % 2 == 0 {
                    vec!["chicago".into(), "60612".into()]
                } else {
                    vec!["boston".into(), "02110".into()]
                }
            })
            .collect();
        let ds = Dataset::new("t", schema.clone(), rows.clone()).unwrap();
        let dcs = parse_constraints("t1&t2: t1.city=t2.city & t1.zip!=t2.zip", &schema).unwrap();
        let p = FeaturePipeline::fit(&ds, &dcs, &config()).unwrap();
        let fz = p.featurizer(&ds).unwrap();
        let f = fz.featurize_with(CellRef::new(2, 1), "6061x2");

        rows[2][1] = "6061x2".into();
        let dirty = Dataset::new("t", schema, rows).unwrap();
        let refit = FeaturePipeline::fit(&dirty, &dcs, &config()).unwrap();
        let g = refit.featurizer(&dirty).unwrap().featurize(CellRef::new(2, 1));
        // statistical and constraint features agree with a refit; the
        // embeddings are not refitted so the neighbor distance may differ
        let n = p.layout().wide_dim() - 1;
        assert_eq!(f.wide[..n], g.wide[..n]);
        assert_eq!(f.wide[p.layout().wide_range(FeatureGroup::Constraints)], [8.0]);
    }

    #[test]
    fn disabled_groups_are_zeroed() {
        let ds = five_attr();
        let mut cfg = config();
        cfg.disabled.insert(FeatureGroup::CharEmbedding);
        cfg.disabled.insert(FeatureGroup::ColumnId);
        let p = FeaturePipeline::fit(&ds, &[], &cfg).unwrap();
        let f = p.featurizer(&ds).unwrap().featurize(CellRef::new(1, 1));
        assert!(f.deep[..8].iter().all(|&x| x == 0.0));
        assert!(f.deep[8..16].iter().any(|&x| x != 0.0));
        assert!(f.wide[3..8].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn layout_mismatch_is_rejected() {
        let ds = five_attr();
        let p = FeaturePipeline::fit(&ds, &[], &config()).unwrap();
        let other = Dataset::new(
            "o",
            Schema::new(["x", "y"]).unwrap(),
            vec![vec!["1".into(), "2".into()]],
        )
        .unwrap();
        assert!(matches!(p.featurizer(&other), Err(Error::LayoutMismatch { .. })));
    }

    #[test]
    fn group_names_round_trip() {
        for g in FeatureGroup::ALL {
            assert_eq!(g.name().parse::<FeatureGroup>().unwrap(), g);
            assert_eq!(serde_json::to_string(&g).unwrap(), format!("\"{}\"", g.name()));
        }
        assert!("bogus".parse::<FeatureGroup>().is_err());
    }
}
