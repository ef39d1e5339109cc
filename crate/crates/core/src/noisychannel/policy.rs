use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::transform::Transformation;
use crate::error::{Error, Result};

/// Relative frequency of each transformation across all extracted lists.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalPolicy {
    entries: Vec<(Transformation, f64)>,
}

/// `p(φ) = c_φ / c`, where `c_φ` counts occurrences of `φ` over all lists
/// and `c` is the total number of list elements.
pub fn empirical_policy(lists: &[Vec<Transformation>]) -> Result<EmpiricalPolicy> {
    let mut counts: BTreeMap<&Transformation, usize> = BTreeMap::new();
    let mut total = 0usize;
    for phi in lists.iter().flatten() {
        *counts.entry(phi).or_default() += 1;
        total += 1;
    }
    if total == 0 {
        return Err(Error::Empty("no transformations to build a policy from".into()));
    }
    let entries = counts
        .into_iter()
        .map(|(phi, c)| (phi.clone(), c as f64 / total as f64))
        .collect();
    Ok(EmpiricalPolicy { entries })
}

impl EmpiricalPolicy {
    pub fn entries(&self) -> &[(Transformation, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn probability(&self, phi: &Transformation) -> f64 {
        self.entries.iter().find(|(t, _)| t == phi).map_or(0.0, |(_, p)| *p)
    }

    /// Transformations sorted by decreasing probability.
    pub fn ranked(&self) -> Vec<(Transformation, f64)> {
        let mut v = self.entries.clone();
        v.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        v
    }

    /// Same support with every probability equal; used to measure what the
    /// learned distribution adds over the bare transformation set.
    pub fn uniform(&self) -> EmpiricalPolicy {
        let p = 1.0 / self.entries.len().max(1) as f64;
        EmpiricalPolicy {
            entries: self.entries.iter().map(|(t, _)| (t.clone(), p)).collect(),
        }
    }

    /// Renormalizes the policy over transformations whose left side occurs
    /// in `v`.
    pub fn conditional(&self, v: &str) -> ConditionalPolicy {
        conditional_policy(self, v)
    }
}

/// `Π̂(v)`: the policy restricted to rules applicable to `v`. Empty when no
/// rule applies.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConditionalPolicy {
    entries: Vec<(Transformation, f64)>,
}

pub fn conditional_policy(policy: &EmpiricalPolicy, v: &str) -> ConditionalPolicy {
    let applicable: Vec<&(Transformation, f64)> = policy.entries.iter().filter(|(t, _)| t.applies_to(v)).collect();
    let mass: f64 = applicable.iter().map(|(_, p)| p).sum();
    if applicable.is_empty() || mass <= 0.0 {
        return ConditionalPolicy::default();
    }
    ConditionalPolicy {
        entries: applicable.into_iter().map(|(t, p)| (t.clone(), p / mass)).collect(),
    }
}

impl ConditionalPolicy {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[(Transformation, f64)] {
        &self.entries
    }

    pub fn probability(&self, phi: &Transformation) -> f64 {
        self.entries.iter().find(|(t, _)| t == phi).map_or(0.0, |(_, p)| *p)
    }

    /// The `k` most probable entries, ties broken by transformation order.
    pub fn top(&self, k: usize) -> Vec<(Transformation, f64)> {
        let mut v = self.entries.clone();
        v.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        v.truncate(k);
        v
    }

    /// Draws one transformation; `None` when the support is empty.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<&Transformation> {
        if self.entries.is_empty() {
            return None;
        }
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (t, p) in &self.entries {
            acc += p;
            if u < acc {
                return Some(t);
            }
        }
        self.entries.last().map(|(t, _)| t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn t(l: &str, r: &str) -> Transformation {
        Transformation::new(l, r).unwrap()
    }

    #[test]
    fn counts_over_lists() {
        let p = empirical_policy(&[vec![t("a", "b"), t("", "x")], vec![t("", "x")]]).unwrap();
        assert!((p.probability(&t("", "x")) - 2.0 / 3.0).abs() < 1e-15);
        assert!((p.probability(&t("a", "b")) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn single_rule_has_probability_one() {
        let p = empirical_policy(&[vec![t("q", "r")]]).unwrap();
        assert_eq!(p.probability(&t("q", "r")), 1.0);
    }

    #[test]
    fn empty_lists_are_an_error() {
        assert!(empirical_policy(&[]).is_err());
        assert!(empirical_policy(&[vec![]]).is_err());
    }

    #[test]
    fn conditional_restricts_and_renormalizes() {
        let p = empirical_policy(&[vec![t("", "x"), t("", "x"), t("ab", "cd")]]).unwrap();
        let c = conditional_policy(&p, "zz");
        assert_eq!(c.len(), 1);
        assert!((c.probability(&t("", "x")) - 1.0).abs() < 1e-15);

        let c = conditional_policy(&p, "zabz");
        assert!((c.probability(&t("", "x")) - 2.0 / 3.0).abs() < 1e-15);
        assert!((c.probability(&t("ab", "cd")) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn empty_lhs_matches_empty_value() {
        let p = empirical_policy(&[vec![t("", "x")]]).unwrap();
        assert_eq!(conditional_policy(&p, "").len(), 1);
    }

    #[test]
    fn no_applicable_rule_gives_empty_support() {
        let p = empirical_policy(&[vec![t("ab", "cd"), t("q", "")]]).unwrap();
        let c = conditional_policy(&p, "zz");
        assert!(c.is_empty());
        let mut rng = rand::rngs::mock::StepRng::new(0, 1);
        assert!(c.sample(&mut rng).is_none());
    }

    fn rule() -> impl Strategy<Value = Transformation> {
        ("[ab]{0,2}", "[abx]{0,2}").prop_filter_map("identity", |(l, r)| Transformation::new(l, r))
    }

    proptest! {
        #[test]
        fn both_policies_normalize(lists in proptest::collection::vec(proptest::collection::vec(rule(), 1..5), 1..6), v in "[abz]{0,5}") {
            let p = empirical_policy(&lists).unwrap();
            let s: f64 = p.entries().iter().map(|e| e.1).sum();
            prop_assert!((s - 1.0).abs() < 1e-9);
            prop_assert!(p.entries().iter().all(|e| e.1 > 0.0));
            let c = conditional_policy(&p, &v);
            if !c.is_empty() {
                let s: f64 = c.entries().iter().map(|e| e.1).sum();
                prop_assert!((s - 1.0).abs() < 1e-9);
                prop_assert!(c.entries().iter().all(|(t, _)| v.contains(t.lhs())));
            }
        }
    }
}
