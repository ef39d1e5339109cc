//! The learned noisy channel: transformations extracted from (clean, dirty)
//! pairs, a policy over them, and the augmentation loop that uses both to
//! synthesize error examples.

pub mod augment;
pub mod matching;
pub mod policy;
pub mod transform;
pub mod weak;

pub use augment::{augment, augment_n, resample_errors, AugConfig, AugmentedExample};
pub use matching::similarity;
pub use policy::{conditional_policy, empirical_policy, ConditionalPolicy, EmpiricalPolicy};
pub use transform::{build_phi, learn_transformations, LabeledPair, Template, Transformation, TransformationSet};
pub use weak::{weak_label_pairs, weak_label_pairs_with, WeakPair};

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, TrainingSet};
use crate::error::Result;

/// Where the labeled pairs came from.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairSources {
    pub from_training: usize,
    pub from_weak_supervision: usize,
}

/// Transformations plus their empirical policy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoisyChannel {
    pub transformations: TransformationSet,
    pub policy: EmpiricalPolicy,
    pub sources: PairSources,
}

impl NoisyChannel {
    pub fn learn(pairs: &[LabeledPair]) -> Result<Self> {
        let transformations = build_phi(pairs);
        let policy = empirical_policy(&transformations.lists)?;
        Ok(NoisyChannel {
            transformations,
            policy,
            sources: PairSources::default(),
        })
    }
}

/// Labeled pairs for channel learning: errors already in `train` first,
/// topped up with weakly supervised pairs from `dataset` when fewer than
/// `min_pairs` are available.
pub fn collect_pairs(dataset: &Dataset, train: &TrainingSet, min_pairs: usize) -> (Vec<LabeledPair>, PairSources) {
    let mut pairs: Vec<LabeledPair> = train
        .errors()
        .filter_map(|e| LabeledPair::new(e.truth.clone(), e.observed.clone()))
        .collect();
    let mut sources = PairSources {
        from_training: pairs.len(),
        from_weak_supervision: 0,
    };
    if pairs.len() < min_pairs {
        let weak = weak_label_pairs(dataset);
        sources.from_weak_supervision = weak.len();
        pairs.extend(weak.into_iter().map(|w| w.pair));
    }
    (pairs, sources)
}
