//! Run configuration read from a TOML file. Command-line flags are applied
//! on top of it.

use std::path::{Path, PathBuf};

use anyhow::Context;
use augclean::data::SplitSpec;
use augclean::detector::DetectorConfig;
use augclean::features::FeatureGroup;
use augclean::harness::{ExperimentConfig, HospitalSpec, InjectionSpec};
use serde::{Deserialize, Serialize};

use crate::Usage;

/// Environment variable naming the default report directory.
pub const REPORT_DIR_ENV: &str = "AUGCLEAN_REPORT_DIR";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Paths {
    pub data: Option<PathBuf>,
    pub constraints: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub report_dir: Option<PathBuf>,
}

/// Benchmark settings for `bench`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchOptions {
    pub seeds: Vec<u64>,
    pub train_fraction: f64,
    pub holdout_fraction_of_train: f64,
    pub fractions: Vec<f64>,
    pub ratios: Vec<f64>,
    pub ablation_groups: Vec<FeatureGroup>,
    pub injection: InjectionSpec,
    /// Size of the synthetic table used when no dataset is given.
    pub tuples: usize,
    pub hospitals: usize,
}

impl Default for BenchOptions {
    fn default() -> Self {
        let e = ExperimentConfig::default();
        let h = HospitalSpec::default();
        BenchOptions {
            seeds: e.seeds,
            train_fraction: e.train_fraction,
            holdout_fraction_of_train: e.holdout_fraction_of_train,
            fractions: e.fractions,
            ratios: e.ratios,
            ablation_groups: e.ablation_groups,
            injection: e.injection,
            tuples: h.tuples,
            hospitals: h.hospitals,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub paths: Paths,
    /// Whether dataset CSV files start with a header row.
    pub has_header: bool,
    pub split: SplitSpec,
    pub detector: DetectorConfig,
    pub bench: BenchOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            paths: Paths::default(),
            has_header: true,
            // the labels given to `train` are all used unless a fraction is set
            split: SplitSpec {
                train_fraction: 1.0,
                ..SplitSpec::default()
            },
            detector: DetectorConfig::default(),
            bench: BenchOptions::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| Usage(format!("invalid config {}: {e:#}", path.display())).into())
    }

    pub fn parse(text: &str) -> anyhow::Result<Self> {
        toml::from_str(text).context("parsing TOML")
    }

    pub fn to_toml(&self) -> anyhow::Result<String> {
        toml::to_string(self).context("serializing config")
    }

    pub fn experiment(&self) -> ExperimentConfig {
        let b = &self.bench;
        ExperimentConfig {
            seeds: b.seeds.clone(),
            train_fraction: b.train_fraction,
            holdout_fraction_of_train: b.holdout_fraction_of_train,
            fractions: b.fractions.clone(),
            ratios: b.ratios.clone(),
            ablation_groups: b.ablation_groups.clone(),
            injection: b.injection.clone(),
            detector: self.detector.clone(),
        }
    }

    /// Report directory: config, then environment, then `reports`.
    pub fn report_dir(&self) -> PathBuf {
        self.paths
            .report_dir
            .clone()
            .or_else(|| std::env::var_os(REPORT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("reports"))
    }
}

/// Returns the path if set and existing, otherwise a usage error naming the
/// flag that supplies it.
pub fn require_file<'a>(path: &'a Option<PathBuf>, flag: &str) -> anyhow::Result<&'a Path> {
    let p = path
        .as_deref()
        .ok_or_else(|| Usage(format!("missing input: pass {flag}")))?;
    if !p.is_file() {
        return Err(Usage(format!("{} ({flag}) does not exist", p.display())).into());
    }
    Ok(p)
}

pub fn require_output<'a>(path: &'a Option<PathBuf>, flag: &str) -> anyhow::Result<&'a Path> {
    path.as_deref()
        .ok_or_else(|| Usage(format!("missing output path: pass {flag}")).into())
}

#[cfg(test)]
mod tests {
    use super::*;
    use augclean::detector::Augmentation;

    #[test]
    fn default_round_trips() {
        let c = RunConfig::default();
        assert_eq!(RunConfig::parse(&c.to_toml().unwrap()).unwrap(), c);
    }

    #[test]
    fn customized_round_trips() {
        let mut c = RunConfig::default();
        c.paths.data = Some("dirty.csv".into());
        c.detector.augmentation = Augmentation::Resample;
        c.detector.error_ratio = Some(0.35);
        c.detector.features.disabled.insert(FeatureGroup::Format3Gram);
        c.bench.ablation_groups = vec![FeatureGroup::CharEmbedding];
        c.bench.seeds = vec![3, 9];
        assert_eq!(RunConfig::parse(&c.to_toml().unwrap()).unwrap(), c);
    }

    #[test]
    fn partial_files_keep_defaults() {
        let c = RunConfig::parse("[detector.train]\nepochs = 7\n\n[detector.augment]\nalpha = 0.5\n").unwrap();
        assert_eq!(c.detector.train.epochs, 7);
        assert_eq!(c.detector.augment.alpha, 0.5);
        assert_eq!(c.detector.train.batch_size, 5);
        assert!(c.has_header);
    }

    #[test]
    fn unknown_values_are_rejected() {
        assert!(RunConfig::parse("[detector]\naugmentation = \"gan\"\n").is_err());
    }
}
