//! Error injection into a clean table.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{CellRef, Dataset, GroundTruth};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorKind {
    /// Insert the typo character (or a random letter) at a random position.
    Typo,
    /// Replace one character with the typo character.
    CharSwap,
    /// Replace the value with another value of the same attribute.
    ValueSwap,
    /// Copy the value of another attribute of the same tuple.
    AttributeShift,
}

impl ErrorKind {
    pub const ALL: [ErrorKind; 4] = [
        ErrorKind::Typo,
        ErrorKind::CharSwap,
        ErrorKind::ValueSwap,
        ErrorKind::AttributeShift,
    ];
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InjectionSpec {
    /// Fraction of cells to corrupt, in (0, 1).
    pub error_rate: f64,
    /// Proportion of each error kind; must sum to 1.
    pub mix: BTreeMap<ErrorKind, f64>,
    /// Character used by typos; `None` draws a random lowercase letter.
    pub typo_char: Option<char>,
    pub seed: u64,
}

impl Default for InjectionSpec {
    fn default() -> Self {
        InjectionSpec {
            error_rate: 0.05,
            mix: BTreeMap::from([(ErrorKind::Typo, 1.0)]),
            typo_char: Some('x'),
            seed: 0,
        }
    }
}

impl InjectionSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.error_rate > 0.0 && self.error_rate < 1.0) {
            return Err(Error::Config(format!(
                "error_rate must be in (0, 1), got {}",
                self.error_rate
            )));
        }
        if self.mix.values().any(|&p| p < 0.0) {
            return Err(Error::Config("error mix proportions must be non-negative".into()));
        }
        let total: f64 = self.mix.values().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "error mix proportions sum to {total}, expected 1"
            )));
        }
        Ok(())
    }
}

const INJECTION_STREAM: u64 = 0x696e_6a65_6374;

/// Splits `total` into integer counts proportional to `weights` by the
/// largest-remainder method.
pub fn apportion(total: usize, weights: &[f64]) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    if sum <= 0.0 {
        return vec![0; weights.len()];
    }
    let exact: Vec<f64> = weights.iter().map(|w| w / sum * total as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        (exact[b] - exact[b].floor())
            .total_cmp(&(exact[a] - exact[a].floor()))
            .then(a.cmp(&b))
    });
    let short = total - counts.iter().sum::<usize>();
    for &i in order.iter().take(short) {
        counts[i] += 1;
    }
    counts
}

fn typo<R: Rng>(value: &str, c: Option<char>, rng: &mut R) -> String {
    let c = c.unwrap_or_else(|| char::from(b'a' + rng.gen_range(0..26u8)));
    let chars: Vec<char> = value.chars().collect();
    let at = rng.gen_range(0..=chars.len());
    chars[..at]
        .iter()
        .chain(std::iter::once(&c))
        .chain(&chars[at..])
        .collect()
}

fn char_swap<R: Rng>(value: &str, c: Option<char>, rng: &mut R) -> Option<String> {
    let c = c.unwrap_or('x');
    let mut chars: Vec<char> = value.chars().collect();
    let sites: Vec<usize> = (0..chars.len()).filter(|&i| chars[i] != c).collect();
    let &at = sites.choose(rng)?;
    chars[at] = c;
    Some(chars.into_iter().collect())
}

/// Corrupts exactly `ceil(error_rate * cells)` cells of `clean`. Returns
/// the dirty table and ground truth for every cell.
pub fn inject_errors(clean: &Dataset, spec: &InjectionSpec) -> Result<(Dataset, GroundTruth)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    // label splits shuffle the same cell list with the same seeds
    rng.set_stream(INJECTION_STREAM);
    let total = (spec.error_rate * clean.num_cells() as f64).ceil() as usize;
    let mut cells: Vec<CellRef> = clean.cells().collect();
    cells.shuffle(&mut rng);
    cells.truncate(total);
    cells.sort();

    let kinds: Vec<ErrorKind> = spec.mix.keys().copied().collect();
    let weights: Vec<f64> = spec.mix.values().copied().collect();
    let counts = apportion(total, &weights);
    let mut assignment: Vec<ErrorKind> = kinds
        .iter()
        .zip(&counts)
        .flat_map(|(&k, &n)| std::iter::repeat_n(k, n))
        .collect();
    assignment.shuffle(&mut rng);

    let mut columns: Vec<Vec<&str>> = Vec::with_capacity(clean.num_attributes());
    for a in 0..clean.num_attributes() {
        let mut col: Vec<&str> = clean.column(a).collect();
        col.sort_unstable();
        col.dedup();
        columns.push(col);
    }

    let mut updates = BTreeMap::new();
    for (&cell, &kind) in cells.iter().zip(&assignment) {
        let value = clean.value(cell);
        let dirty = match kind {
            ErrorKind::Typo => None,
            ErrorKind::CharSwap => char_swap(value, spec.typo_char, &mut rng),
            ErrorKind::ValueSwap => {
                let others: Vec<&&str> = columns[cell.attr].iter().filter(|v| **v != value).collect();
                others.choose(&mut rng).map(|v| v.to_string())
            }
            ErrorKind::AttributeShift => {
                let row = clean.row(cell.tuple);
                let others: Vec<&String> = row.iter().filter(|v| v.as_str() != value).collect();
                others.choose(&mut rng).map(|v| v.to_string())
            }
        }
        .unwrap_or_else(|| typo(value, spec.typo_char, &mut rng));
        debug_assert_ne!(dirty, value);
        updates.insert(cell, dirty);
    }
    let dirty = clean.with_values(format!("{}-dirty-{}", clean.id(), spec.seed), &updates);
    Ok((dirty, GroundTruth::from_clean(clean)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Schema;

    fn table(rows: usize, cols: usize) -> Dataset {
        let names: Vec<String> = (0..cols).map(|c| format!("a{c}")).collect();
        let data = (0..rows)
            .map(|r| (0..cols).map(|c| format!("{}{}", r % 7, c)).collect())
            .collect();
        Dataset::new("t", Schema::new(names).unwrap(), data).unwrap()
    }

    fn corrupted(clean: &Dataset, dirty: &Dataset) -> Vec<CellRef> {
        clean.cells().filter(|&c| clean.value(c) != dirty.value(c)).collect()
    }

    #[test]
    fn corrupts_the_exact_count() {
        let clean = table(1000, 10);
        let (dirty, truth) = inject_errors(&clean, &InjectionSpec::default()).unwrap();
        assert_eq!(corrupted(&clean, &dirty).len(), 500);
        assert_eq!(truth.erroneous_cells(&dirty).len(), 500);
        assert_eq!(truth.len(), 10_000);
    }

    #[test]
    fn typo_inserts_one_x() {
        let clean = Dataset::new("z", Schema::new(["zip"]).unwrap(), vec![vec!["60612".into()]; 10]).unwrap();
        let spec = InjectionSpec {
            error_rate: 0.5,
            ..InjectionSpec::default()
        };
        let (dirty, _) = inject_errors(&clean, &spec).unwrap();
        for c in corrupted(&clean, &dirty) {
            let v = dirty.value(c);
            assert_eq!(v.len(), 6);
            assert_eq!(v.replacen('x', "", 1), "60612");
        }
    }

    #[test]
    fn value_swaps_use_existing_values() {
        let clean = table(200, 3);
        let spec = InjectionSpec {
            error_rate: 0.1,
            mix: BTreeMap::from([(ErrorKind::ValueSwap, 1.0)]),
            ..InjectionSpec::default()
        };
        let (dirty, _) = inject_errors(&clean, &spec).unwrap();
        for c in corrupted(&clean, &dirty) {
            assert!(clean.column(c.attr).any(|v| v == dirty.value(c)));
        }
    }

    #[test]
    fn mix_is_honored() {
        let clean = table(400, 5);
        let spec = InjectionSpec {
            error_rate: 0.1,
            mix: BTreeMap::from([(ErrorKind::Typo, 0.7), (ErrorKind::ValueSwap, 0.3)]),
            ..InjectionSpec::default()
        };
        let (dirty, _) = inject_errors(&clean, &spec).unwrap();
        let cells = corrupted(&clean, &dirty);
        assert_eq!(cells.len(), 200);
        let typos = cells
            .iter()
            .filter(|&&c| dirty.value(c).len() == clean.value(c).len() + 1 && dirty.value(c).contains('x'))
            .count();
        // value swaps here never add a character
        assert_eq!(typos, 140);
    }

    #[test]
    fn deterministic_per_seed() {
        let clean = table(100, 4);
        let a = inject_errors(&clean, &InjectionSpec::default()).unwrap();
        let b = inject_errors(&clean, &InjectionSpec::default()).unwrap();
        assert_eq!(a.0, b.0);
        let c = inject_errors(
            &clean,
            &InjectionSpec {
                seed: 1,
                ..InjectionSpec::default()
            },
        )
        .unwrap();
        assert_ne!(a.0, c.0);
    }

    #[test]
    fn bad_specs_are_rejected() {
        let clean = table(10, 2);
        for rate in [0.0, 1.0, -0.1] {
            let spec = InjectionSpec {
                error_rate: rate,
                ..InjectionSpec::default()
            };
            assert!(inject_errors(&clean, &spec).is_err());
        }
        let spec = InjectionSpec {
            mix: BTreeMap::from([(ErrorKind::Typo, 0.5)]),
            ..InjectionSpec::default()
        };
        assert!(spec.validate().is_err());
    }

    #[test]
    fn largest_remainder() {
        assert_eq!(apportion(10, &[0.7, 0.3]), vec![7, 3]);
        assert_eq!(apportion(3, &[1.0, 1.0, 1.0]), vec![1, 1, 1]);
        assert_eq!(apportion(5, &[0.5, 0.5]), vec![3, 2]);
        assert_eq!(apportion(7, &[0.25, 0.25, 0.5]).iter().sum::<usize>(), 7);
    }
}
