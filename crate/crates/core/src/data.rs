//! Relational data: schema, rows of string cells, labeled cells and splits.
//!
//! Every cell value is a string. Tuple identity is the row ordinal, and no
//! operation in this crate reorders rows.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    attributes: Vec<String>,
}

impl Schema {
    pub fn new<S: Into<String>>(attributes: impl IntoIterator<Item = S>) -> Result<Self> {
        let attributes: Vec<String> = attributes.into_iter().map(Into::into).collect();
        if attributes.is_empty() {
            return Err(Error::Schema("schema needs at least one attribute".into()));
        }
        let mut seen = HashSet::new();
        for name in &attributes {
            if name.is_empty() {
                return Err(Error::Schema("attribute names must be non-empty".into()));
            }
            if !seen.insert(name.as_str()) {
                return Err(Error::Schema(format!("duplicate attribute `{name}`")));
            }
        }
        Ok(Schema { attributes })
    }

    pub fn len(&self) -> usize {
        self.attributes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attributes.is_empty()
    }

    pub fn attributes(&self) -> &[String] {
        &self.attributes
    }

    pub fn name(&self, index: usize) -> &str {
        &self.attributes[index]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.attributes.iter().position(|a| a == name)
    }
}

/// Address of a single cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellRef {
    pub tuple: usize,
    pub attr: usize,
}

impl CellRef {
    pub fn new(tuple: usize, attr: usize) -> Self {
        CellRef { tuple, attr }
    }
}

impl fmt::Display for CellRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.tuple, self.attr)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dataset {
    id: String,
    schema: Schema,
    rows: Vec<Vec<String>>,
}

impl Dataset {
    pub fn new(id: impl Into<String>, schema: Schema, rows: Vec<Vec<String>>) -> Result<Self> {
        let n = schema.len();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::RaggedRow {
                    row: i,
                    expected: n,
                    found: row.len(),
                });
            }
        }
        Ok(Dataset {
            id: id.into(),
            schema,
            rows,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn num_tuples(&self) -> usize {
        self.rows.len()
    }

    pub fn num_attributes(&self) -> usize {
        self.schema.len()
    }

    pub fn num_cells(&self) -> usize {
        self.rows.len() * self.schema.len()
    }

    pub fn rows(&self) -> &[Vec<String>] {
        &self.rows
    }

    pub fn row(&self, tuple: usize) -> &[String] {
        &self.rows[tuple]
    }

    pub fn value(&self, cell: CellRef) -> &str {
        &self.rows[cell.tuple][cell.attr]
    }

    pub fn contains(&self, cell: CellRef) -> bool {
        cell.tuple < self.rows.len() && cell.attr < self.schema.len()
    }

    pub fn cells(&self) -> impl Iterator<Item = CellRef> + '_ {
        let n = self.schema.len();
        (0..self.rows.len()).flat_map(move |t| (0..n).map(move |a| CellRef::new(t, a)))
    }

    /// Values of one attribute in row order.
    pub fn column(&self, attr: usize) -> impl Iterator<Item = &str> + '_ {
        self.rows.iter().map(move |r| r[attr].as_str())
    }

    /// A copy of this dataset with the given cells overwritten.
    pub fn with_values(&self, id: impl Into<String>, updates: &BTreeMap<CellRef, String>) -> Self {
        let mut rows = self.rows.clone();
        for (cell, v) in updates {
            rows[cell.tuple][cell.attr] = v.clone();
        }
        Dataset {
            id: id.into(),
            schema: self.schema.clone(),
            rows,
        }
    }
}

/// Reads a CSV file. Without a header, attributes are named `col0..colN-1`.
pub fn load_csv(path: impl AsRef<Path>, has_header: bool) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_string());
    read_csv(file, has_header, id)
}

pub fn read_csv<R: std::io::Read>(reader: R, has_header: bool, id: impl Into<String>) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut records = rdr.records();
    let first = match records.next() {
        Some(r) => r?,
        None => return Err(Error::Empty("csv file has no rows".into())),
    };
    let width = first.len();
    let mut rows = Vec::new();
    let schema = if has_header {
        Schema::new(first.iter().map(str::to_string))?
    } else {
        rows.push(first.iter().map(str::to_string).collect());
        Schema::new((0..width).map(|i| format!("col{i}")))?
    };
    for (i, rec) in records.enumerate() {
        let rec = rec?;
        // 1-based line numbers as a user would count them in the file
        let line = i + 2;
        if rec.len() != width {
            return Err(Error::RaggedRow {
                row: line,
                expected: width,
                found: rec.len(),
            });
        }
        rows.push(rec.iter().map(str::to_string).collect());
    }
    if rows.is_empty() {
        return Err(Error::Empty("csv file has a header but no data rows".into()));
    }
    Dataset::new(id, schema, rows)
}

pub fn write_csv(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv_to(dataset, file)
}

pub fn write_csv_to<W: std::io::Write>(dataset: &Dataset, writer: W) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().from_writer(writer);
    wtr.write_record(dataset.schema.attributes())?;
    for row in &dataset.rows {
        wtr.write_record(row)?;
    }
    wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

/// +1 for a correct cell, -1 for an erroneous one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Correct,
    Error,
}

impl Label {
    pub fn sign(self) -> i8 {
        match self {
            Label::Correct => 1,
            Label::Error => -1,
        }
    }

    /// Class index used by the classifier: 0 correct, 1 error.
    pub fn class(self) -> usize {
        match self {
            Label::Correct => 0,
            Label::Error => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Correct => "correct",
            Label::Error => "error",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingEntry {
    pub cell: CellRef,
    pub observed: String,
    pub truth: String,
}

impl TrainingEntry {
    pub fn label(&self) -> Label {
        label_of(&self.observed, &self.truth)
    }
}

/// Exact string equality decides correctness.
pub fn label_of(observed: &str, truth: &str) -> Label {
    if observed == truth {
        Label::Correct
    } else {
        Label::Error
    }
}

/// Labeled cells; no cell appears twice.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingSet {
    entries: Vec<TrainingEntry>,
}

impl TrainingSet {
    pub fn new(entries: Vec<TrainingEntry>) -> Result<Self> {
        let mut seen = HashSet::new();
        for e in &entries {
            if !seen.insert(e.cell) {
                return Err(Error::Labels(format!("duplicate cell {}", e.cell)));
            }
        }
        Ok(TrainingSet { entries })
    }

    /// Builds entries from a ground-truth map, reading observed values from
    /// the dataset.
    pub fn from_truth(dataset: &Dataset, truth: &GroundTruth) -> Result<Self> {
        let mut entries = Vec::with_capacity(truth.len());
        for (&cell, clean) in truth.iter() {
            if !dataset.contains(cell) {
                return Err(Error::Labels(format!("cell {cell} outside the dataset")));
            }
            entries.push(TrainingEntry {
                cell,
                observed: dataset.value(cell).to_string(),
                truth: clean.clone(),
            });
        }
        Ok(TrainingSet { entries })
    }

    pub fn entries(&self) -> &[TrainingEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn cells(&self) -> impl Iterator<Item = CellRef> + '_ {
        self.entries.iter().map(|e| e.cell)
    }

    pub fn count(&self, label: Label) -> usize {
        self.entries.iter().filter(|e| e.label() == label).count()
    }

    pub fn errors(&self) -> impl Iterator<Item = &TrainingEntry> {
        self.entries.iter().filter(|e| e.label() == Label::Error)
    }

    pub fn correct(&self) -> impl Iterator<Item = &TrainingEntry> {
        self.entries.iter().filter(|e| e.label() == Label::Correct)
    }

    /// Checks that every observed value matches the dataset.
    pub fn validate_against(&self, dataset: &Dataset) -> Result<()> {
        for e in &self.entries {
            if !dataset.contains(e.cell) {
                return Err(Error::Labels(format!("cell {} outside the dataset", e.cell)));
            }
            if dataset.value(e.cell) != e.observed {
                return Err(Error::Labels(format!(
                    "observed value at {} does not match the dataset",
                    e.cell
                )));
            }
        }
        Ok(())
    }
}

/// Clean values for a subset of cells.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GroundTruth {
    values: BTreeMap<CellRef, String>,
}

impl GroundTruth {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, cell: CellRef, clean: impl Into<String>) {
        self.values.insert(cell, clean.into());
    }

    pub fn get(&self, cell: CellRef) -> Option<&str> {
        self.values.get(&cell).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&CellRef, &String)> {
        self.values.iter()
    }

    /// Full truth for a clean dataset: every cell maps to its own value.
    pub fn from_clean(dataset: &Dataset) -> Self {
        let values = dataset.cells().map(|c| (c, dataset.value(c).to_string())).collect();
        GroundTruth { values }
    }

    /// Cells whose observed value in `dataset` differs from the truth.
    pub fn erroneous_cells(&self, dataset: &Dataset) -> HashSet<CellRef> {
        self.values
            .iter()
            .filter(|(c, v)| dataset.contains(**c) && dataset.value(**c) != v.as_str())
            .map(|(c, _)| *c)
            .collect()
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct TruthRecord {
    tuple_index: usize,
    attribute: String,
    clean_value: String,
}

/// Reads `tuple_index,attribute,clean_value`, resolving attribute names
/// against the schema.
pub fn load_truth(path: impl AsRef<Path>, schema: &Schema) -> Result<GroundTruth> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_truth(file, schema)
}

pub fn read_truth<R: std::io::Read>(reader: R, schema: &Schema) -> Result<GroundTruth> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut truth = GroundTruth::new();
    for (i, rec) in rdr.deserialize::<TruthRecord>().enumerate() {
        let rec = rec?;
        let attr = schema
            .index_of(&rec.attribute)
            .ok_or_else(|| Error::Labels(format!("line {}: unknown attribute `{}`", i + 2, rec.attribute)))?;
        let cell = CellRef::new(rec.tuple_index, attr);
        if truth.get(cell).is_some() {
            return Err(Error::Labels(format!("line {}: duplicate cell {cell}", i + 2)));
        }
        truth.insert(cell, rec.clean_value);
    }
    Ok(truth)
}

pub fn write_truth(truth: &GroundTruth, schema: &Schema, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut wtr = csv::Writer::from_writer(file);
    for (cell, v) in truth.iter() {
        wtr.serialize(TruthRecord {
            tuple_index: cell.tuple,
            attribute: schema.name(cell.attr).to_string(),
            clean_value: v.clone(),
        })?;
    }
    wtr.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub holdout_fraction_of_train: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.10,
            holdout_fraction_of_train: 0.10,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "train_fraction must be in (0, 1], got {}",
                self.train_fraction
            )));
        }
        if !(0.0..1.0).contains(&self.holdout_fraction_of_train) {
            return Err(Error::Config(format!(
                "holdout_fraction_of_train must be in [0, 1), got {}",
                self.holdout_fraction_of_train
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Split {
    pub train: TrainingSet,
    pub holdout: TrainingSet,
    pub test: TrainingSet,
}

/// Partitions labeled cells into disjoint train, holdout and test sets.
///
/// The labeled set is shuffled with the spec's seed; the first
/// `round(train_fraction * n)` entries form T, of which
/// `round(holdout_fraction * |T|)` become the holdout.
pub fn split(labels: &TrainingSet, spec: &SplitSpec) -> Result<Split> {
    spec.validate()?;
    let mut entries = labels.entries.clone();
    // canonical order first so the partition depends only on the label set
    entries.sort_by_key(|e| e.cell);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    entries.shuffle(&mut rng);

    let n = entries.len();
    let n_labeled = ((spec.train_fraction * n as f64).round() as usize).min(n);
    let n_holdout = (spec.holdout_fraction_of_train * n_labeled as f64).round() as usize;
    if n_labeled == n {
        log::debug!("train_fraction {} leaves an empty test set", spec.train_fraction);
    }
    let test = entries.split_off(n_labeled);
    let train = entries.split_off(n_holdout);
    let holdout = entries;
    Ok(Split {
        train: TrainingSet { entries: train },
        holdout: TrainingSet { entries: holdout },
        test: TrainingSet { entries: test },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn labels(n: usize) -> TrainingSet {
        let entries = (0..n)
            .map(|i| TrainingEntry {
                cell: CellRef::new(i / 4, i % 4),
                observed: format!("v{i}"),
                truth: if i % 7 == 0 { "other".into() } else { format!("v{i}") },
            })
            .collect();
        TrainingSet::new(entries).unwrap()
    }

    #[test]
    fn loads_header_and_rows() {
        let ds = read_csv("a,b\n1,2\n3,4\n5,6\n".as_bytes(), true, "t").unwrap();
        assert_eq!(ds.num_attributes(), 2);
        assert_eq!(ds.num_tuples(), 3);
        assert_eq!(ds.value(CellRef::new(2, 1)), "6");
    }

    #[test]
    fn quoted_comma_is_one_cell() {
        let ds = read_csv("a,b\n\"a,b\",c\n".as_bytes(), true, "t").unwrap();
        assert_eq!(ds.value(CellRef::new(0, 0)), "a,b");
    }

    #[test]
    fn ragged_row_names_the_line() {
        let err = read_csv("a,b\n1,2\n3\n".as_bytes(), true, "t").unwrap_err();
        match err {
            Error::RaggedRow { row, expected, found } => {
                assert_eq!((row, expected, found), (3, 2, 1));
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn empty_file_is_an_error() {
        assert!(matches!(read_csv("".as_bytes(), true, "t"), Err(Error::Empty(_))));
        assert!(matches!(read_csv("a,b\n".as_bytes(), true, "t"), Err(Error::Empty(_))));
    }

    #[test]
    fn empty_fields_are_empty_strings() {
        let ds = read_csv("a,b\n,x\n".as_bytes(), true, "t").unwrap();
        assert_eq!(ds.value(CellRef::new(0, 0)), "");
    }

    #[test]
    fn headerless_names_columns() {
        let ds = read_csv("1,2\n".as_bytes(), false, "t").unwrap();
        assert_eq!(ds.schema().attributes(), ["col0", "col1"]);
        assert_eq!(ds.num_tuples(), 1);
    }

    #[test]
    fn schema_rejects_duplicates_and_empty() {
        assert!(Schema::new(["a", "a"]).is_err());
        assert!(Schema::new([""]).is_err());
        assert!(Schema::new(Vec::<String>::new()).is_err());
    }

    #[test]
    fn label_examples() {
        assert_eq!(label_of("60612", "60612").sign(), 1);
        assert_eq!(label_of("6061x2", "60612").sign(), -1);
        assert_eq!(label_of("", "a").sign(), -1);
    }

    #[test]
    fn split_sizes() {
        let s = split(&labels(1000), &SplitSpec::default()).unwrap();
        assert_eq!((s.train.len(), s.holdout.len(), s.test.len()), (90, 10, 900));
    }

    #[test]
    fn full_train_fraction_empties_test() {
        let spec = SplitSpec {
            train_fraction: 1.0,
            ..SplitSpec::default()
        };
        let s = split(&labels(50), &spec).unwrap();
        assert!(s.test.is_empty());
        assert_eq!(s.train.len() + s.holdout.len(), 50);
    }

    #[test]
    fn bad_fractions_rejected() {
        for (t, h) in [(0.0, 0.1), (1.5, 0.1), (0.5, 1.0), (0.5, -0.1)] {
            let spec = SplitSpec {
                train_fraction: t,
                holdout_fraction_of_train: h,
                seed: 1,
            };
            assert!(matches!(split(&labels(10), &spec), Err(Error::Config(_))));
        }
    }

    #[test]
    fn duplicate_cells_rejected() {
        let e = TrainingEntry {
            cell: CellRef::new(0, 0),
            observed: "a".into(),
            truth: "a".into(),
        };
        assert!(TrainingSet::new(vec![e.clone(), e]).is_err());
    }

    proptest! {
        #[test]
        fn split_is_deterministic_disjoint_and_complete(n in 1usize..300, frac in 0.01f64..1.0, seed: u64) {
            let l = labels(n);
            let spec = SplitSpec { train_fraction: frac, holdout_fraction_of_train: 0.1, seed };
            let a = split(&l, &spec).unwrap();
            let b = split(&l, &spec).unwrap();
            prop_assert_eq!(&a, &b);
            let mut all: Vec<CellRef> = a.train.cells().chain(a.holdout.cells()).chain(a.test.cells()).collect();
            let total = all.len();
            all.sort();
            all.dedup();
            prop_assert_eq!(all.len(), total);
            prop_assert_eq!(total, n);
        }

        #[test]
        fn csv_round_trip(rows in proptest::collection::vec(proptest::collection::vec("[a-z ,\"\n]{0,6}", 3), 1..8)) {
            let schema = Schema::new(["a", "b", "c"]).unwrap();
            let ds = Dataset::new("rt", schema, rows).unwrap();
            let mut buf = Vec::new();
            write_csv_to(&ds, &mut buf).unwrap();
            let back = read_csv(buf.as_slice(), true, "rt").unwrap();
            prop_assert_eq!(back, ds);
        }
    }
}
