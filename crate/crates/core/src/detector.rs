//! End-to-end training and prediction.
//!
//! Training runs in this order: labeled (clean, dirty) pairs, noisy channel,
//! synthetic errors, representation models, classifier, calibration.

use std::collections::{BTreeSet, HashSet};
use std::path::Path;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::constraints::DenialConstraint;
use crate::data::{CellRef, Dataset, Label, TrainingSet};
use crate::error::{Error, Result};
use crate::features::{FeatureConfig, FeaturePipeline, Featurizer};
use crate::neural::{self, Calibrator, Example, Network, TrainConfig, TrainReport};
use crate::noisychannel::{
    augment_n, collect_pairs, resample_errors, AugConfig, AugmentedExample, NoisyChannel, PairSources,
};

pub const CHECKPOINT_VERSION: u32 = 1;

/// How the error class is filled out before training.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Augmentation {
    /// Synthetic errors from the learned noisy channel.
    #[default]
    Channel,
    /// Labeled examples only.
    None,
    /// Existing error examples repeated until the classes balance.
    Resample,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    pub features: FeatureConfig,
    pub train: TrainConfig,
    pub augment: AugConfig,
    pub augmentation: Augmentation,
    /// Fraction of error examples to reach after augmentation. `None`
    /// generates `p - n` examples, which balances the classes.
    pub error_ratio: Option<f64>,
    /// Below this many labeled errors, weak supervision adds pairs.
    pub min_pairs: usize,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            features: FeatureConfig::default(),
            train: TrainConfig::default(),
            augment: AugConfig::default(),
            augmentation: Augmentation::Channel,
            error_ratio: None,
            min_pairs: 20,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.augment.validate()?;
        if let Some(r) = self.error_ratio {
            if !(r > 0.0 && r < 1.0) {
                return Err(Error::Config(format!("error_ratio must be in (0, 1), got {r}")));
            }
        }
        Ok(())
    }

    /// Sets every seed from one value.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.train.seed = seed;
        self.augment.seed = seed;
        self.features.embedding.seed = seed;
        self
    }
}

/// Number of synthetic errors needed so that errors make up `ratio` of
/// all examples, given `p` correct and `n` error examples.
pub fn synthetic_target(p: usize, n: usize, ratio: Option<f64>) -> usize {
    match ratio {
        None => p.saturating_sub(n),
        Some(r) => {
            let m = (r * (p + n) as f64 - n as f64) / (1.0 - r);
            m.round().max(0.0) as usize
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub channel: Duration,
    pub augment: Duration,
    pub features: Duration,
    pub train: Duration,
    pub calibrate: Duration,
}

#[derive(Clone, Debug, Default)]
pub struct FitReport {
    pub pairs: PairSources,
    pub transformations: usize,
    pub synthetic: usize,
    pub resampled: usize,
    pub train: TrainReport,
    pub timings: StageTimings,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub cell: CellRef,
    pub label: Label,
    /// Calibrated probability that the cell is an error.
    pub probability: f64,
}

/// A trained, calibrated detector bound to the feature pipeline it was
/// trained with.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Detector {
    pub version: u32,
    pub layout_hash: String,
    pub pipeline: FeaturePipeline,
    pub network: Network,
    pub calibrator: Calibrator,
    pub threshold: f64,
    pub channel: Option<NoisyChannel>,
    pub training_cells: BTreeSet<CellRef>,
}

/// Learns the noisy channel from the errors in `train`, adding weakly
/// supervised pairs when there are fewer than `min_pairs`.
pub fn learn_channel(dataset: &Dataset, train: &TrainingSet, min_pairs: usize) -> Result<Option<NoisyChannel>> {
    let (pairs, sources) = collect_pairs(dataset, train, min_pairs);
    if pairs.is_empty() {
        log::warn!("no labeled or weakly supervised error pairs; the noisy channel is empty");
        return Ok(None);
    }
    let mut channel = NoisyChannel::learn(&pairs)?;
    channel.sources = sources;
    Ok(Some(channel))
}

/// Synthetic errors for `train` according to `config`.
pub fn synthesize(
    train: &TrainingSet,
    channel: Option<&NoisyChannel>,
    config: &DetectorConfig,
) -> Result<Vec<AugmentedExample>> {
    let p = train.count(Label::Correct);
    let n = train.count(Label::Error);
    let target = synthetic_target(p, n, config.error_ratio);
    match channel {
        Some(c) => augment_n(train, &c.policy, &config.augment, target),
        None => Ok(Vec::new()),
    }
}

fn labeled_examples(featurizer: &Featurizer<'_>, set: &TrainingSet) -> Vec<Example> {
    set.entries()
        .iter()
        .map(|e| Example {
            features: featurizer.featurize(e.cell),
            label: e.label(),
        })
        .collect()
}

/// Trains a detector with a freshly fitted feature pipeline.
pub fn fit(
    dataset: &Dataset,
    constraints: &[DenialConstraint],
    train: &TrainingSet,
    holdout: &TrainingSet,
    config: &DetectorConfig,
) -> Result<(Detector, FitReport)> {
    config.validate()?;
    let start = Instant::now();
    let pipeline = FeaturePipeline::fit(dataset, constraints, &config.features)?;
    let elapsed = start.elapsed();
    let (detector, mut report) = fit_with_pipeline(dataset, pipeline, train, holdout, config)?;
    report.timings.features += elapsed;
    Ok((detector, report))
}

/// Trains a detector on an already fitted pipeline.
pub fn fit_with_pipeline(
    dataset: &Dataset,
    pipeline: FeaturePipeline,
    train: &TrainingSet,
    holdout: &TrainingSet,
    config: &DetectorConfig,
) -> Result<(Detector, FitReport)> {
    config.validate()?;
    train.validate_against(dataset)?;
    holdout.validate_against(dataset)?;
    let mut report = FitReport::default();

    let t = Instant::now();
    let channel = match config.augmentation {
        Augmentation::Channel => learn_channel(dataset, train, config.min_pairs)?,
        _ => None,
    };
    if let Some(c) = &channel {
        report.pairs = c.sources.clone();
        report.transformations = c.transformations.phi.len();
    }
    report.timings.channel = t.elapsed();

    let t = Instant::now();
    let synthetic = match config.augmentation {
        Augmentation::Channel => synthesize(train, channel.as_ref(), config)?,
        _ => Vec::new(),
    };
    let resampled = match config.augmentation {
        Augmentation::Resample => resample_errors(train, config.augment.seed),
        _ => Vec::new(),
    };
    if config.augmentation == Augmentation::Channel && synthetic.is_empty() {
        log::warn!("augmentation produced no synthetic errors");
    }
    report.synthetic = synthetic.len();
    report.resampled = resampled.len();
    report.timings.augment = t.elapsed();

    let t = Instant::now();
    let featurizer = pipeline.featurizer(dataset)?;
    let mut examples = labeled_examples(&featurizer, train);
    examples.extend(synthetic.iter().map(|s| Example {
        features: featurizer.featurize_with(s.cell, &s.dirty),
        label: Label::Error,
    }));
    examples.extend(resampled.iter().map(|&cell| Example {
        features: featurizer.featurize(cell),
        label: Label::Error,
    }));
    report.timings.features += t.elapsed();

    let t = Instant::now();
    let (network, train_report) = neural::train(pipeline.layout(), &examples, &config.train)?;
    report.train = train_report;
    report.timings.train = t.elapsed();

    let t = Instant::now();
    let mut margins = Vec::with_capacity(holdout.len());
    let mut is_error = Vec::with_capacity(holdout.len());
    let mut ws = network.workspace();
    for e in holdout.entries() {
        let input = network.prepare(&featurizer.featurize(e.cell))?;
        margins.push(network.forward_input(&input, &mut ws).margin());
        is_error.push(e.label() == Label::Error);
    }
    let calibrator = Calibrator::fit(
        &margins,
        &is_error,
        config.train.calibration_epochs,
        config.train.calibration_learning_rate,
    );
    report.timings.calibrate = t.elapsed();
    drop(featurizer);

    let detector = Detector {
        version: CHECKPOINT_VERSION,
        layout_hash: pipeline.layout_hash(),
        pipeline,
        network,
        calibrator,
        threshold: config.train.threshold,
        channel,
        training_cells: train.cells().chain(holdout.cells()).collect(),
    };
    Ok((detector, report))
}

impl Detector {
    /// Predictions for `cells`.
    pub fn predict(&self, dataset: &Dataset, cells: &[CellRef]) -> Result<Vec<Prediction>> {
        let featurizer = self.pipeline.featurizer(dataset)?;
        self.predict_with(&featurizer, cells)
    }

    pub fn predict_with(&self, featurizer: &Featurizer<'_>, cells: &[CellRef]) -> Result<Vec<Prediction>> {
        let mut ws = self.network.workspace();
        cells
            .iter()
            .map(|&cell| {
                if !featurizer.dataset().contains(cell) {
                    return Err(Error::Config(format!("cell {cell} is outside the dataset")));
                }
                let input = self.network.prepare(&featurizer.featurize(cell))?;
                let z = self.network.forward_input(&input, &mut ws).margin();
                let probability = self.calibrator.probability(z);
                let label = if probability >= self.threshold {
                    Label::Error
                } else {
                    Label::Correct
                };
                Ok(Prediction {
                    cell,
                    label,
                    probability,
                })
            })
            .collect()
    }

    /// Predictions for every cell not used for training or calibration.
    pub fn predict_unlabeled(&self, dataset: &Dataset) -> Result<Vec<Prediction>> {
        let cells: Vec<CellRef> = dataset.cells().filter(|c| !self.training_cells.contains(c)).collect();
        self.predict(dataset, &cells)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer(std::io::BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut d: Detector = serde_json::from_reader(std::io::BufReader::new(file))?;
        if d.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint version {} (expected {CHECKPOINT_VERSION})",
                d.version
            )));
        }
        d.pipeline.reindex();
        if d.pipeline.layout_hash() != d.layout_hash {
            return Err(Error::Checkpoint(
                "stored layout hash does not match its pipeline".into(),
            ));
        }
        Ok(d)
    }
}

/// Cells flagged as errors.
pub fn flagged(predictions: &[Prediction]) -> HashSet<CellRef> {
    predictions
        .iter()
        .filter(|p| p.label == Label::Error)
        .map(|p| p.cell)
        .collect()
}
