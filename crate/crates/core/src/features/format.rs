//! Per-attribute 3-gram format models with Laplace smoothing.
//!
//! Values are padded with a begin and an end sentinel before 3-grams are
//! taken, so `"ab"` yields `^ab` and `ab$`. The raw alphabet is the 128
//! ASCII characters plus one symbol for any non-ASCII character; the
//! symbolic alphabet collapses characters to letter / digit / other.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Alphabet {
    Raw,
    Symbolic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SymbolClass {
    Character,
    Number,
    Symbol,
}

pub fn symbol_class(c: char) -> SymbolClass {
    if c.is_numeric() {
        SymbolClass::Number
    } else if c.is_alphabetic() {
        SymbolClass::Character
    } else {
        SymbolClass::Symbol
    }
}

impl Alphabet {
    /// Number of symbols including the two sentinels.
    pub fn size(self) -> u32 {
        match self {
            Alphabet::Raw => 131,
            Alphabet::Symbolic => 5,
        }
    }

    fn begin(self) -> u32 {
        self.size() - 2
    }

    fn end(self) -> u32 {
        self.size() - 1
    }

    fn symbol(self, c: char) -> u32 {
        match self {
            Alphabet::Raw => {
                if c.is_ascii() {
                    c as u32
                } else {
                    128
                }
            }
            Alphabet::Symbolic => match symbol_class(c) {
                SymbolClass::Character => 0,
                SymbolClass::Number => 1,
                SymbolClass::Symbol => 2,
            },
        }
    }

    /// Number of distinct 3-grams over the alphabet.
    pub fn gram_space(self) -> u64 {
        u64::from(self.size()).pow(3)
    }

    /// Encoded 3-grams of the sentinel-padded value.
    pub fn grams(self, value: &str) -> Vec<u32> {
        let mut syms = Vec::with_capacity(value.len() + 2);
        syms.push(self.begin());
        syms.extend(value.chars().map(|c| self.symbol(c)));
        syms.push(self.end());
        let a = self.size();
        syms.windows(3).map(|w| (w[0] * a + w[1]) * a + w[2]).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NGramFormatModel {
    alphabet: Alphabet,
    counts: BTreeMap<u32, u64>,
    total: u64,
}

impl NGramFormatModel {
    pub fn fit<'a>(alphabet: Alphabet, values: impl IntoIterator<Item = &'a str>) -> Self {
        let mut counts = BTreeMap::new();
        let mut total = 0;
        for v in values {
            for g in alphabet.grams(v) {
                *counts.entry(g).or_insert(0) += 1;
                total += 1;
            }
        }
        NGramFormatModel {
            alphabet,
            counts,
            total,
        }
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn distinct_grams(&self) -> usize {
        self.counts.len()
    }

    fn denominator(&self) -> f64 {
        (self.total + self.alphabet.gram_space()) as f64
    }

    pub fn count(&self, gram: u32) -> u64 {
        self.counts.get(&gram).copied().unwrap_or(0)
    }

    /// Smoothed probability `(count + 1) / (total + |alphabet|^3)`.
    pub fn probability(&self, gram: u32) -> f64 {
        (self.count(gram) + 1) as f64 / self.denominator()
    }

    /// Probability of a gram never seen during fitting.
    pub fn floor(&self) -> f64 {
        1.0 / self.denominator()
    }

    /// Smallest smoothed probability over the whole gram space.
    pub fn min_probability(&self) -> f64 {
        if (self.counts.len() as u64) < self.alphabet.gram_space() {
            self.floor()
        } else {
            self.counts
                .values()
                .map(|&c| (c + 1) as f64)
                .fold(f64::INFINITY, f64::min)
                / self.denominator()
        }
    }

    /// Probability of the least probable 3-gram in `value`. Values with no
    /// 3-gram (only the empty string) get the model's minimum.
    pub fn score(&self, value: &str) -> f64 {
        self.alphabet
            .grams(value)
            .into_iter()
            .map(|g| self.probability(g))
            .reduce(f64::min)
            .unwrap_or_else(|| self.min_probability())
    }

    /// Score of `new` under the model refitted with one occurrence of `old`
    /// replaced by `new`.
    pub fn score_replacing(&self, old: &str, new: &str) -> f64 {
        if old == new {
            return self.score(new);
        }
        let removed = self.alphabet.grams(old);
        let added = self.alphabet.grams(new);
        let total = self.total - removed.len() as u64 + added.len() as u64;
        let denom = (total + self.alphabet.gram_space()) as f64;
        let adjusted = |g: u32| {
            let plus = added.iter().filter(|&&x| x == g).count() as u64;
            let minus = removed.iter().filter(|&&x| x == g).count() as u64;
            ((self.count(g) + plus).saturating_sub(minus) + 1) as f64 / denom
        };
        added
            .iter()
            .map(|&g| adjusted(g))
            .reduce(f64::min)
            .unwrap_or(1.0 / denom)
    }

    /// Sum of probabilities over the full gram space; 1 up to rounding.
    pub fn total_mass(&self) -> f64 {
        let seen: f64 = self.counts.keys().map(|&g| self.probability(g)).sum();
        let unseen = (self.alphabet.gram_space() - self.counts.len() as u64) as f64 * self.floor();
        seen + unseen
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn decode(a: Alphabet, g: u32) -> [u32; 3] {
        let s = a.size();
        [g / (s * s), (g / s) % s, g % s]
    }

    #[test]
    fn padded_grams() {
        let a = Alphabet::Raw;
        let grams = a.grams("ab");
        assert_eq!(grams.len(), 2);
        assert_eq!(decode(a, grams[0]), [129, 'a' as u32, 'b' as u32]);
        assert_eq!(decode(a, grams[1]), ['a' as u32, 'b' as u32, 130]);
        assert_eq!(a.grams("a").len(), 1);
        assert!(a.grams("").is_empty());
    }

    #[test]
    fn symbolic_classes() {
        let classes: Vec<_> = "a1-".chars().map(symbol_class).collect();
        assert_eq!(
            classes,
            [SymbolClass::Character, SymbolClass::Number, SymbolClass::Symbol]
        );
    }

    #[test]
    fn rare_value_scores_lower() {
        let mut values = vec!["abc"; 9];
        values.push("xyz");
        let m = NGramFormatModel::fit(Alphabet::Raw, values);
        // 10 values x 3 grams = 30 grams; abc grams seen 9 times, xyz once
        let denom = 30.0 + 131f64.powi(3);
        assert!((m.score("abc") - 10.0 / denom).abs() < 1e-18);
        assert!((m.score("xyz") - 2.0 / denom).abs() < 1e-18);
        assert!(m.score("xyz") < m.score("abc"));
    }

    #[test]
    fn uniform_column_score() {
        let m = NGramFormatModel::fit(Alphabet::Raw, vec!["60612"; 10]);
        // 5 grams per value, each seen 10 times
        let expect = 11.0 / (50.0 + 131f64.powi(3));
        assert!((m.score("60612") - expect).abs() < 1e-18);
    }

    #[test]
    fn unseen_gram_hits_the_floor() {
        let m = NGramFormatModel::fit(Alphabet::Raw, vec!["60612"; 10]);
        assert_eq!(m.score("6061x2"), 1.0 / (50.0 + 131f64.powi(3)));
        assert_eq!(m.score(""), m.floor());
    }

    #[test]
    fn shared_rarest_gram_means_equal_scores() {
        let m = NGramFormatModel::fit(Alphabet::Raw, ["aaaa", "aaaa", "aaab"]);
        // both values' rarest gram is the unseen floor gram
        assert_eq!(m.score("qaaa"), m.score("aaaq"));
    }

    #[test]
    fn replacing_matches_a_refit() {
        let mut column = vec!["60612"; 9];
        column.push("02110");
        let m = NGramFormatModel::fit(Alphabet::Raw, column.iter().copied());
        let mut refit_column = column.clone();
        refit_column[9] = "6061x2";
        let refit = NGramFormatModel::fit(Alphabet::Raw, refit_column.iter().copied());
        assert_eq!(m.score_replacing("02110", "6061x2"), refit.score("6061x2"));
        assert_eq!(m.score_replacing("60612", "60612"), m.score("60612"));
    }

    proptest! {
        #[test]
        fn normalizes(values in proptest::collection::vec("[a-c0-9 é-]{0,6}", 0..20), sym: bool) {
            let a = if sym { Alphabet::Symbolic } else { Alphabet::Raw };
            let m = NGramFormatModel::fit(a, values.iter().map(String::as_str));
            prop_assert!((m.total_mass() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn score_in_unit_interval_and_monotone(values in proptest::collection::vec("[ab1]{0,5}", 1..10), v in "[ab1]{0,5}") {
            let m = NGramFormatModel::fit(Alphabet::Raw, values.iter().map(String::as_str));
            let s = m.score(&v);
            prop_assert!(s > 0.0 && s <= 1.0);
            // adding more copies of v never lowers its score
            let mut more = values.clone();
            more.push(v.clone());
            let m2 = NGramFormatModel::fit(Alphabet::Raw, more.iter().map(String::as_str));
            prop_assert!(m2.score(&v) >= s * (1.0 - 1e-12) || v.is_empty());
        }
    }
}
