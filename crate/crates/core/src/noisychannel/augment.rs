use std::collections::HashMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::policy::{ConditionalPolicy, EmpiricalPolicy};
use crate::data::{CellRef, TrainingSet};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugConfig {
    /// Probability of accepting each draw.
    pub alpha: f64,
    pub seed: u64,
    /// Draw budget per requested example before giving up.
    pub max_draws_per_example: usize,
}

impl Default for AugConfig {
    fn default() -> Self {
        AugConfig {
            alpha: 1.0,
            seed: 0,
            max_draws_per_example: 1000,
        }
    }
}

impl AugConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!("alpha must be in [0, 1], got {}", self.alpha)));
        }
        Ok(())
    }
}

/// A synthetic error: the clean training value at `cell` rewritten to
/// `dirty`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugmentedExample {
    pub cell: CellRef,
    pub clean: String,
    pub dirty: String,
}

/// Generates `p - n` synthetic errors from the correct examples of
/// `train`, where `p` and `n` count its correct and erroneous entries.
pub fn augment(train: &TrainingSet, policy: &EmpiricalPolicy, config: &AugConfig) -> Result<Vec<AugmentedExample>> {
    let p = train.count(crate::data::Label::Correct);
    let n = train.count(crate::data::Label::Error);
    if p <= n {
        log::warn!("training set already has {n} errors for {p} correct examples; nothing to augment");
        return Ok(Vec::new());
    }
    augment_n(train, policy, config, p - n)
}

/// Generates up to `target` synthetic errors.
///
/// Each draw picks a correct example uniformly, flips a coin with
/// probability `alpha` and, on success, samples a rule from the policy
/// conditioned on the example's value and applies it at a uniform site.
/// Draws stop after `max_draws_per_example * target` attempts.
pub fn augment_n(
    train: &TrainingSet,
    policy: &EmpiricalPolicy,
    config: &AugConfig,
    target: usize,
) -> Result<Vec<AugmentedExample>> {
    config.validate()?;
    let correct: Vec<_> = train.correct().collect();
    let mut out = Vec::with_capacity(target);
    if target == 0 || correct.is_empty() || policy.is_empty() {
        if target > 0 {
            log::warn!("augmentation needs correct examples and a non-empty policy");
        }
        return Ok(out);
    }
    if config.alpha == 0.0 {
        log::warn!("alpha is 0; no synthetic errors are generated");
        return Ok(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut cache: HashMap<&str, ConditionalPolicy> = HashMap::new();
    let budget = config.max_draws_per_example.saturating_mul(target);
    let mut draws = 0usize;
    while out.len() < target && draws < budget {
        draws += 1;
        let example = correct[rng.gen_range(0..correct.len())];
        let accept = rng.gen_bool(config.alpha);
        let value = example.observed.as_str();
        let conditional = cache.entry(value).or_insert_with(|| policy.conditional(value));
        if !accept || conditional.is_empty() {
            continue;
        }
        let phi = conditional.sample(&mut rng).expect("non-empty support");
        let dirty = phi.apply(value, &mut rng)?;
        debug_assert_ne!(dirty, value);
        out.push(AugmentedExample {
            cell: example.cell,
            clean: value.to_string(),
            dirty,
        });
    }
    if out.len() < target {
        log::warn!(
            "augmentation stopped after {draws} draws with {} of {target} examples",
            out.len()
        );
    }
    Ok(out)
}

/// Resampling baseline: repeats the existing error examples (cycling in a
/// seeded random order) until the classes balance.
pub fn resample_errors(train: &TrainingSet, seed: u64) -> Vec<CellRef> {
    let p = train.count(crate::data::Label::Correct);
    let errors: Vec<CellRef> = train.errors().map(|e| e.cell).collect();
    if errors.is_empty() || p <= errors.len() {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..p - errors.len())
        .map(|_| errors[rng.gen_range(0..errors.len())])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::TrainingEntry;
    use crate::noisychannel::policy::empirical_policy;
    use crate::noisychannel::transform::Transformation;

    fn train(correct: usize, errors: usize) -> TrainingSet {
        let mut entries = Vec::new();
        for i in 0..correct {
            entries.push(TrainingEntry {
                cell: CellRef::new(i, 0),
                observed: format!("val{i}"),
                truth: format!("val{i}"),
            });
        }
        for i in 0..errors {
            entries.push(TrainingEntry {
                cell: CellRef::new(correct + i, 0),
                observed: format!("bad{i}"),
                truth: format!("good{i}"),
            });
        }
        TrainingSet::new(entries).unwrap()
    }

    fn insert_x() -> EmpiricalPolicy {
        empirical_policy(&[vec![Transformation::new("", "x").unwrap()]]).unwrap()
    }

    #[test]
    fn fills_the_class_gap_with_single_insertions() {
        let cfg = AugConfig {
            alpha: 1.0,
            seed: 7,
            ..AugConfig::default()
        };
        let out = augment(&train(8, 3), &insert_x(), &cfg).unwrap();
        assert_eq!(out.len(), 5);
        for ex in &out {
            assert_eq!(ex.dirty.chars().count(), ex.clean.chars().count() + 1);
            assert_eq!(ex.dirty.replacen('x', "", 1), ex.clean);
            assert_ne!(ex.dirty, ex.clean);
        }
    }

    #[test]
    fn alpha_zero_generates_nothing() {
        let cfg = AugConfig {
            alpha: 0.0,
            seed: 7,
            max_draws_per_example: 10,
        };
        assert!(augment(&train(8, 3), &insert_x(), &cfg).unwrap().is_empty());
    }

    #[test]
    fn no_gap_no_examples() {
        let cfg = AugConfig::default();
        assert!(augment(&train(3, 3), &insert_x(), &cfg).unwrap().is_empty());
    }

    #[test]
    fn inapplicable_policy_terminates() {
        let policy = empirical_policy(&[vec![Transformation::new("qq", "z").unwrap()]]).unwrap();
        let cfg = AugConfig {
            alpha: 1.0,
            seed: 1,
            max_draws_per_example: 5,
        };
        assert!(augment(&train(10, 1), &policy, &cfg).unwrap().is_empty());
    }

    #[test]
    fn deterministic_given_seed() {
        let cfg = AugConfig {
            alpha: 0.5,
            seed: 11,
            ..AugConfig::default()
        };
        let a = augment(&train(20, 2), &insert_x(), &cfg).unwrap();
        let b = augment(&train(20, 2), &insert_x(), &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bad_alpha_rejected() {
        let cfg = AugConfig {
            alpha: 1.5,
            ..AugConfig::default()
        };
        assert!(augment(&train(5, 1), &insert_x(), &cfg).is_err());
    }

    #[test]
    fn resampling_balances_with_existing_errors() {
        let t = train(10, 2);
        let extra = resample_errors(&t, 3);
        assert_eq!(extra.len(), 8);
        let errs: Vec<_> = t.errors().map(|e| e.cell).collect();
        assert!(extra.iter().all(|c| errs.contains(c)));
    }
}
