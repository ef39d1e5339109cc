//! String transformations `lhs ↦ rhs` and their extraction from labeled
//! (clean, dirty) pairs.

use std::collections::BTreeSet;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::matching::{longest_common_substring, similarity_chars};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Template {
    Add,
    Remove,
    Exchange,
}

/// A single rewrite of `lhs` into `rhs`. Never an identity.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Transformation {
    lhs: String,
    rhs: String,
}

impl Transformation {
    /// `None` for identities, which carry no information about the channel.
    pub fn new(lhs: impl Into<String>, rhs: impl Into<String>) -> Option<Self> {
        let (lhs, rhs) = (lhs.into(), rhs.into());
        (lhs != rhs).then_some(Transformation { lhs, rhs })
    }

    pub fn lhs(&self) -> &str {
        &self.lhs
    }

    pub fn rhs(&self) -> &str {
        &self.rhs
    }

    pub fn template(&self) -> Template {
        if self.lhs.is_empty() {
            Template::Add
        } else if self.rhs.is_empty() {
            Template::Remove
        } else {
            Template::Exchange
        }
    }

    /// Whether the rule can fire on `v`. An empty left side fits anywhere.
    pub fn applies_to(&self, v: &str) -> bool {
        v.contains(self.lhs.as_str())
    }

    /// Byte offsets where the rule can fire: every (possibly overlapping)
    /// occurrence of `lhs`, or every insertion point for an empty `lhs`.
    pub fn sites(&self, v: &str) -> Vec<usize> {
        if self.lhs.is_empty() {
            return v
                .char_indices()
                .map(|(i, _)| i)
                .chain(std::iter::once(v.len()))
                .collect();
        }
        v.char_indices()
            .map(|(i, _)| i)
            .filter(|&i| v[i..].starts_with(self.lhs.as_str()))
            .collect()
    }

    /// Applies the rule once at a uniformly chosen site.
    pub fn apply<R: Rng + ?Sized>(&self, v: &str, rng: &mut R) -> Result<String> {
        let sites = self.sites(v);
        if sites.is_empty() {
            return Err(Error::NotApplicable {
                lhs: self.lhs.clone(),
                value: v.to_string(),
            });
        }
        let at = sites[rng.gen_range(0..sites.len())];
        Ok(self.apply_at(v, at))
    }

    /// Applies the rule at byte offset `at`, which must be one of `sites`.
    pub fn apply_at(&self, v: &str, at: usize) -> String {
        let mut out = String::with_capacity(v.len() + self.rhs.len());
        out.push_str(&v[..at]);
        out.push_str(&self.rhs);
        out.push_str(&v[at + self.lhs.len()..]);
        out
    }
}

impl fmt::Display for Transformation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let side = |s: &str| if s.is_empty() { "∅".to_string() } else { s.to_string() };
        write!(f, "{} ↦ {}", side(&self.lhs), side(&self.rhs))
    }
}

/// A correct value and an erroneous observation of it.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabeledPair {
    pub clean: String,
    pub dirty: String,
}

impl LabeledPair {
    pub fn new(clean: impl Into<String>, dirty: impl Into<String>) -> Option<Self> {
        let (clean, dirty) = (clean.into(), dirty.into());
        (clean != dirty).then_some(LabeledPair { clean, dirty })
    }
}

/// Hierarchical extraction of every rewrite consistent with `pair`.
///
/// The first element is always `clean ↦ dirty`. Both strings are split
/// around their longest common substring; the left/right fragments are
/// paired straight when that pairing's summed similarity is strictly
/// larger, crossed otherwise. The chosen fragment rewrites are emitted and
/// then extracted from recursively, so a fragment rewrite appears once at
/// its own level and again at the head of its recursive list. Identity
/// rewrites are dropped.
pub fn learn_transformations(pair: &LabeledPair) -> Vec<Transformation> {
    let clean: Vec<char> = pair.clean.chars().collect();
    let dirty: Vec<char> = pair.dirty.chars().collect();
    let mut out = Vec::new();
    extract(&clean, &dirty, &mut out);
    out
}

fn extract(clean: &[char], dirty: &[char], out: &mut Vec<Transformation>) {
    if clean.is_empty() && dirty.is_empty() {
        return;
    }
    let text = |s: &[char]| s.iter().collect::<String>();
    out.extend(Transformation::new(text(clean), text(dirty)));
    let block = longest_common_substring(clean, dirty);
    if block.len == 0 {
        // nothing to split around; the whole-string rewrite is all there is
        return;
    }
    let (lc, rc) = (&clean[..block.a_start], &clean[block.a_start + block.len..]);
    let (ld, rd) = (&dirty[..block.b_start], &dirty[block.b_start + block.len..]);

    let straight = similarity_chars(lc, ld) + similarity_chars(rc, rd);
    let crossed = similarity_chars(lc, rd) + similarity_chars(rc, ld);
    let pairs = if straight > crossed {
        [(lc, ld), (rc, rd)]
    } else {
        [(lc, rd), (rc, ld)]
    };
    for (c, d) in pairs {
        out.extend(Transformation::new(text(c), text(d)));
    }
    for (c, d) in pairs {
        extract(c, d, out);
    }
}

/// The transformation set and the per-pair lists it was built from.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TransformationSet {
    pub phi: BTreeSet<Transformation>,
    pub lists: Vec<Vec<Transformation>>,
}

/// Runs extraction over every pair and takes the set union.
pub fn build_phi(pairs: &[LabeledPair]) -> TransformationSet {
    if pairs.is_empty() {
        log::warn!("no labeled pairs: the transformation set is empty");
    }
    let lists: Vec<Vec<Transformation>> = pairs.iter().map(learn_transformations).collect();
    let phi = lists.iter().flatten().cloned().collect();
    TransformationSet { phi, lists }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn t(l: &str, r: &str) -> Transformation {
        Transformation::new(l, r).unwrap()
    }

    fn learn(c: &str, d: &str) -> Vec<Transformation> {
        learn_transformations(&LabeledPair::new(c, d).unwrap())
    }

    #[test]
    fn zip_typo_hierarchy() {
        // LCS "6061" leaves (∅,∅) and (2,x2); the straight pairing wins,
        // then (2,x2) splits around "2" into a tie that goes crossed: ∅ ↦ x.
        let got = learn("60612", "6061x2");
        assert_eq!(
            got,
            vec![t("60612", "6061x2"), t("2", "x2"), t("2", "x2"), t("", "x"), t("", "x")]
        );
    }

    #[test]
    fn madison_hierarchy() {
        let got = learn("Madison", "Madixson");
        assert_eq!(got[0], t("Madison", "Madixson"));
        assert!(got.contains(&t("son", "xson")));
        assert!(got.contains(&t("", "x")));
        assert_eq!(
            got,
            vec![
                t("Madison", "Madixson"),
                t("son", "xson"),
                t("son", "xson"),
                t("", "x"),
                t("", "x")
            ]
        );
    }

    #[test]
    fn single_exchange() {
        assert_eq!(learn("a", "b"), vec![t("a", "b")]);
    }

    #[test]
    fn substitution_reaches_character_level() {
        let got = learn("abc", "axc");
        assert!(got.contains(&t("b", "x")), "{got:?}");
    }

    #[test]
    fn identities_rejected() {
        assert!(Transformation::new("ab", "ab").is_none());
        assert!(Transformation::new("", "").is_none());
        assert!(LabeledPair::new("v", "v").is_none());
    }

    #[test]
    fn templates() {
        assert_eq!(t("", "x").template(), Template::Add);
        assert_eq!(t("x", "").template(), Template::Remove);
        assert_eq!(t("a", "b").template(), Template::Exchange);
    }

    #[test]
    fn union_deduplicates_but_lists_keep_multiplicity() {
        let pairs = vec![
            LabeledPair::new("ab", "axb").unwrap(),
            LabeledPair::new("cd", "cxd").unwrap(),
        ];
        let set = build_phi(&pairs);
        let adds = set.lists.iter().flatten().filter(|x| **x == t("", "x")).count();
        assert!(adds >= 2);
        assert_eq!(set.phi.iter().filter(|x| **x == t("", "x")).count(), 1);

        let both = build_phi(&[
            LabeledPair::new("60612", "6061x2").unwrap(),
            LabeledPair::new("Madison", "Madixson").unwrap(),
        ]);
        assert!(both.phi.contains(&t("", "x")));
        assert!(build_phi(&[]).phi.is_empty());
    }

    #[test]
    fn apply_single_occurrence_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(t("12", "1x2").apply("60612", &mut rng).unwrap(), "6061x2");
    }

    #[test]
    fn apply_insertion_positions() {
        let rule = t("", "x");
        assert_eq!(rule.sites("ab"), vec![0, 1, 2]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let out = rule.apply("ab", &mut rng).unwrap();
            assert!(["xab", "axb", "abx"].contains(&out.as_str()));
        }
        assert_eq!(rule.apply("", &mut rng).unwrap(), "x");
    }

    #[test]
    fn apply_overlapping_removal() {
        let rule = t("a", "");
        assert_eq!(rule.sites("aa"), vec![0, 1]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(rule.apply("aa", &mut rng).unwrap(), "a");
        assert_eq!(t("aa", "b").sites("aaa"), vec![0, 1]);
    }

    #[test]
    fn apply_requires_occurrence() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(
            t("q", "z").apply("abc", &mut rng),
            Err(Error::NotApplicable { .. })
        ));
    }

    #[test]
    fn apply_handles_multibyte() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let out = t("", "x").apply("é", &mut rng).unwrap();
        assert!(out == "xé" || out == "éx");
    }
}
