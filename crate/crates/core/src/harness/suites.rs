//! Experiment suites over injected-error benchmarks.
//!
//! Every seed injects its own errors into the clean table, fits one feature
//! pipeline on the dirty table and reuses it for all variants of the suite.
//! Reports are CSV tables with one row per (variant, seed).

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::constraints::{count_violations, DenialConstraint};
use crate::data::{split, CellRef, Dataset, GroundTruth, Split, SplitSpec, TrainingSet};
use crate::detector::{fit_with_pipeline, flagged, Augmentation, DetectorConfig};
use crate::error::{Error, Result};
use crate::features::{FeatureGroup, FeaturePipeline};
use crate::noisychannel::weak_label_pairs;

use super::inject::{inject_errors, InjectionSpec};
use super::metrics::{evaluate, Aggregate, EvalReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    End2end,
    Ablation,
    AugVsSuper,
    BalanceSweep,
    WeakPrecision,
}

impl Suite {
    pub const ALL: [Suite; 5] = [
        Suite::End2end,
        Suite::Ablation,
        Suite::AugVsSuper,
        Suite::BalanceSweep,
        Suite::WeakPrecision,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::End2end => "end2end",
            Suite::Ablation => "ablation",
            Suite::AugVsSuper => "aug-vs-super",
            Suite::BalanceSweep => "balance-sweep",
            Suite::WeakPrecision => "weak-precision",
        }
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.name() == s)
            .ok_or_else(|| Error::UnknownSuite(s.to_string()))
    }
}

impl std::fmt::Display for Suite {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A clean table and the constraints it satisfies.
#[derive(Clone, Debug)]
pub struct Benchmark {
    pub name: String,
    pub clean: Dataset,
    pub constraints: Vec<DenialConstraint>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub seeds: Vec<u64>,
    /// Fraction of all cells labeled for training (holdout included).
    pub train_fraction: f64,
    pub holdout_fraction_of_train: f64,
    /// Training fractions compared by the aug-vs-super suite.
    pub fractions: Vec<f64>,
    /// Target error ratios of the balance sweep.
    pub ratios: Vec<f64>,
    /// Groups removed one at a time by the ablation suite.
    pub ablation_groups: Vec<FeatureGroup>,
    /// Injection settings; each run adds its seed to `injection.seed`.
    pub injection: InjectionSpec,
    pub detector: DetectorConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seeds: (0..5).collect(),
            train_fraction: 0.10,
            holdout_fraction_of_train: 0.10,
            fractions: vec![0.01, 0.05, 0.10],
            ratios: vec![0.05, 0.20, 0.35, 0.50, 0.65, 0.80, 0.95],
            ablation_groups: FeatureGroup::ALL.to_vec(),
            injection: InjectionSpec::default(),
            detector: DetectorConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        self.injection.validate()?;
        self.detector.validate()?;
        for &f in std::iter::once(&self.train_fraction).chain(&self.fractions) {
            SplitSpec {
                train_fraction: f,
                holdout_fraction_of_train: self.holdout_fraction_of_train,
                seed: 0,
            }
            .validate()?;
        }
        if let Some(r) = self.ratios.iter().find(|r| !(**r > 0.0 && **r < 1.0)) {
            return Err(Error::Config(format!("error ratios must be in (0, 1), got {r}")));
        }
        Ok(())
    }
}

/// One (variant, seed) result.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub suite: String,
    pub dataset: String,
    pub variant: String,
    pub train_fraction: f64,
    pub seed: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Actual errors among the test cells; emitted pairs for weak-precision.
    pub support: usize,
    pub seconds: f64,
}

/// Per-seed state shared by all variants of a suite.
struct Run {
    dirty: Dataset,
    truth: GroundTruth,
    errors: HashSet<CellRef>,
    pipeline: Option<FeaturePipeline>,
}

impl Run {
    fn new(bench: &Benchmark, config: &ExperimentConfig, seed: u64, with_pipeline: bool) -> Result<Self> {
        let spec = InjectionSpec {
            seed: config.injection.seed.wrapping_add(seed),
            ..config.injection.clone()
        };
        let (dirty, truth) = inject_errors(&bench.clean, &spec)?;
        let errors = truth.erroneous_cells(&dirty);
        let pipeline = if with_pipeline {
            let features = config.detector.clone().with_seed(seed).features;
            Some(FeaturePipeline::fit(&dirty, &bench.constraints, &features)?)
        } else {
            None
        };
        Ok(Run {
            dirty,
            truth,
            errors,
            pipeline,
        })
    }

    fn split(&self, config: &ExperimentConfig, fraction: f64, seed: u64) -> Result<Split> {
        let labels = TrainingSet::from_truth(&self.dirty, &self.truth)?;
        split(
            &labels,
            &SplitSpec {
                train_fraction: fraction,
                holdout_fraction_of_train: config.holdout_fraction_of_train,
                seed,
            },
        )
    }

    fn score(&self, flags: &HashSet<CellRef>, split: &Split) -> EvalReport {
        let test: Vec<CellRef> = split.test.cells().collect();
        evaluate(flags, &self.errors, &test)
    }

    /// Trains on `split` with `pipeline` and scores the test cells. A
    /// training set without errors yields a detector that flags nothing.
    fn detect(&self, pipeline: &FeaturePipeline, split: &Split, config: &DetectorConfig) -> Result<EvalReport> {
        match fit_with_pipeline(&self.dirty, pipeline.clone(), &split.train, &split.holdout, config) {
            Ok((detector, _)) => {
                let test: Vec<CellRef> = split.test.cells().collect();
                let predictions = detector.predict(&self.dirty, &test)?;
                Ok(self.score(&flagged(&predictions), split))
            }
            Err(Error::SingleClass(class)) => {
                log::warn!("training set has only {class} examples; no cell is flagged");
                Ok(self.score(&HashSet::new(), split))
            }
            Err(e) => Err(e),
        }
    }
}

/// Flags every cell of every tuple that violates a constraint.
pub fn constraint_violation_baseline(dataset: &Dataset, constraints: &[DenialConstraint]) -> HashSet<CellRef> {
    let counts = count_violations(dataset, constraints);
    counts
        .iter()
        .enumerate()
        .filter(|(_, c)| c.iter().any(|&v| v > 0))
        .flat_map(|(t, _)| (0..dataset.num_attributes()).map(move |a| CellRef::new(t, a)))
        .collect()
}

struct Rows<'a> {
    suite: Suite,
    bench: &'a Benchmark,
    rows: Vec<ReportRow>,
}

impl Rows<'_> {
    fn push(&mut self, variant: impl Into<String>, fraction: f64, seed: u64, report: EvalReport, started: Instant) {
        let row = ReportRow {
            suite: self.suite.name().to_string(),
            dataset: self.bench.name.clone(),
            variant: variant.into(),
            train_fraction: fraction,
            seed,
            precision: report.precision,
            recall: report.recall,
            f1: report.f1,
            support: report.support(),
            seconds: started.elapsed().as_secs_f64(),
        };
        log::info!(
            "{} {} {} seed {}: P {:.3} R {:.3} F1 {:.3} ({:.1}s)",
            row.suite,
            row.dataset,
            row.variant,
            row.seed,
            row.precision,
            row.recall,
            row.f1,
            row.seconds
        );
        self.rows.push(row);
    }
}

/// Runs `suite` over every configured seed.
pub fn run_experiment(suite: Suite, bench: &Benchmark, config: &ExperimentConfig) -> Result<Vec<ReportRow>> {
    config.validate()?;
    let mut out = Rows {
        suite,
        bench,
        rows: Vec::new(),
    };
    for &seed in &config.seeds {
        let started = Instant::now();
        let run = Run::new(bench, config, seed, suite != Suite::WeakPrecision)?;
        let detector = config.detector.clone().with_seed(seed);
        let pipeline = run.pipeline.as_ref();
        match suite {
            Suite::End2end => {
                let s = run.split(config, config.train_fraction, seed)?;
                let r = run.detect(pipeline.unwrap(), &s, &detector)?;
                out.push("aug", config.train_fraction, seed, r, started);
            }
            Suite::Ablation => {
                let s = run.split(config, config.train_fraction, seed)?;
                let full = pipeline.unwrap();
                let r = run.detect(full, &s, &detector)?;
                out.push("full", config.train_fraction, seed, r, started);
                for &group in &config.ablation_groups {
                    let started = Instant::now();
                    let mut disabled: BTreeSet<FeatureGroup> = full.disabled().clone();
                    disabled.insert(group);
                    let r = run.detect(&full.with_disabled(disabled), &s, &detector)?;
                    out.push(format!("-{group}"), config.train_fraction, seed, r, started);
                }
            }
            Suite::AugVsSuper => {
                let cv = constraint_violation_baseline(&run.dirty, &bench.constraints);
                for &fraction in &config.fractions {
                    let s = run.split(config, fraction, seed)?;
                    for (variant, augmentation) in [
                        ("aug", Augmentation::Channel),
                        ("superl", Augmentation::None),
                        ("resample", Augmentation::Resample),
                    ] {
                        let started = Instant::now();
                        let c = DetectorConfig {
                            augmentation,
                            ..detector.clone()
                        };
                        let r = run.detect(pipeline.unwrap(), &s, &c)?;
                        out.push(variant, fraction, seed, r, started);
                    }
                    out.push("cv", fraction, seed, run.score(&cv, &s), Instant::now());
                }
            }
            Suite::BalanceSweep => {
                let s = run.split(config, config.train_fraction, seed)?;
                for &ratio in &config.ratios {
                    let started = Instant::now();
                    let c = DetectorConfig {
                        error_ratio: Some(ratio),
                        ..detector.clone()
                    };
                    let r = run.detect(pipeline.unwrap(), &s, &c)?;
                    out.push(format!("ratio-{ratio:.2}"), config.train_fraction, seed, r, started);
                }
            }
            Suite::WeakPrecision => {
                let pairs = weak_label_pairs(&run.dirty);
                let correct = pairs.iter().filter(|p| run.errors.contains(&p.cell)).count();
                let report = EvalReport::from_counts(correct, pairs.len() - correct, run.errors.len() - correct);
                out.rows.push(ReportRow {
                    suite: suite.name().to_string(),
                    dataset: bench.name.clone(),
                    variant: "weak".into(),
                    train_fraction: 0.0,
                    seed,
                    precision: report.precision,
                    recall: report.recall,
                    f1: report.f1,
                    support: pairs.len(),
                    seconds: started.elapsed().as_secs_f64(),
                });
            }
        }
    }
    Ok(out.rows)
}

/// Aggregated metrics of one variant over seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub suite: String,
    pub dataset: String,
    pub variant: String,
    pub train_fraction: f64,
    pub precision: Aggregate,
    pub recall: Aggregate,
    pub f1: Aggregate,
    pub support: Aggregate,
}

/// Groups rows by (suite, dataset, variant, train fraction), keeping the
/// order in which groups first appear.
pub fn summarize(rows: &[ReportRow]) -> Vec<SummaryRow> {
    let mut order: Vec<(String, String, String, u64)> = Vec::new();
    let mut groups: BTreeMap<(String, String, String, u64), Vec<&ReportRow>> = BTreeMap::new();
    for r in rows {
        let key = (
            r.suite.clone(),
            r.dataset.clone(),
            r.variant.clone(),
            r.train_fraction.to_bits(),
        );
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push(r);
    }
    order
        .into_iter()
        .map(|key| {
            let g = &groups[&key];
            let of = |f: fn(&ReportRow) -> f64| Aggregate::of(&g.iter().map(|r| f(r)).collect::<Vec<_>>());
            SummaryRow {
                suite: key.0,
                dataset: key.1,
                variant: key.2,
                train_fraction: f64::from_bits(key.3),
                precision: of(|r| r.precision),
                recall: of(|r| r.recall),
                f1: of(|r| r.f1),
                support: of(|r| r.support as f64),
            }
        })
        .collect()
}

/// Median F1 of `variant` at `train_fraction` (any fraction if `None`).
pub fn median_f1(summary: &[SummaryRow], variant: &str, train_fraction: Option<f64>) -> Option<f64> {
    summary
        .iter()
        .find(|s| s.variant == variant && train_fraction.is_none_or(|f| (s.train_fraction - f).abs() < 1e-12))
        .map(|s| s.f1.median)
}

/// Human-readable table of medians with mean ± standard error.
pub fn render_summary(summary: &[SummaryRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<15} {:<12} {:<26} {:>6} {:>7} {:>7} {:>7} {:>17}",
        "suite", "dataset", "variant", "train", "P", "R", "F1", "F1 mean±se"
    );
    for r in summary {
        let _ = writeln!(
            s,
            "{:<15} {:<12} {:<26} {:>6.3} {:>7.3} {:>7.3} {:>7.3} {:>9.3} ± {:.3}  (n={})",
            r.suite,
            r.dataset,
            r.variant,
            r.train_fraction,
            r.precision.median,
            r.recall.median,
            r.f1.median,
            r.f1.mean,
            r.f1.stderr,
            r.f1.runs
        );
    }
    s
}

pub fn write_rows(rows: &[ReportRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_rows(path: impl AsRef<Path>) -> Result<Vec<ReportRow>> {
    let mut r = csv::Reader::from_path(path.as_ref())?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Writes `<suite>.csv` and `<suite>-summary.txt` into `dir`.
pub fn write_report(dir: impl AsRef<Path>, suite: Suite, rows: &[ReportRow]) -> Result<(PathBuf, PathBuf)> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let table = dir.join(format!("{suite}.csv"));
    write_rows(rows, &table)?;
    let text = dir.join(format!("{suite}-summary.txt"));
    std::fs::write(&text, render_summary(&summarize(rows))).map_err(|e| Error::io(&text, e))?;
    Ok((table, text))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::parse_constraints;
    use crate::data::Schema;

    fn row(variant: &str, seed: u64, f1: f64) -> ReportRow {
        ReportRow {
            suite: "ablation".into(),
            dataset: "d".into(),
            variant: variant.into(),
            train_fraction: 0.1,
            seed,
            precision: f1,
            recall: f1,
            f1,
            support: 10,
            seconds: 0.0,
        }
    }

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        let err = "tuning".parse::<Suite>().unwrap_err();
        assert!(err.to_string().contains("balance-sweep"));
        assert!(err.is_usage());
    }

    #[test]
    fn summary_groups_variants_in_order() {
        let rows = vec![
            row("full", 0, 0.9),
            row("-x", 0, 0.5),
            row("full", 1, 0.7),
            row("-x", 1, 0.6),
        ];
        let s = summarize(&rows);
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].variant, "full");
        assert!((s[0].f1.median - 0.8).abs() < 1e-12);
        assert_eq!(median_f1(&s, "-x", Some(0.1)), Some(0.55));
        assert_eq!(median_f1(&s, "-x", Some(0.2)), None);
        assert!(render_summary(&s).contains("-x"));
    }

    #[test]
    fn report_files_parse_back() {
        let dir = tempfile::tempdir().unwrap();
        let rows = vec![row("full", 0, 0.9), row("full", 1, 0.8)];
        let (table, text) = write_report(dir.path(), Suite::Ablation, &rows).unwrap();
        assert_eq!(read_rows(&table).unwrap(), rows);
        assert!(std::fs::read_to_string(text).unwrap().contains("full"));
    }

    #[test]
    fn cv_flags_whole_violating_tuples() {
        let schema = Schema::new(["zip", "city"]).unwrap();
        let rows = [("1", "a"), ("1", "a"), ("1", "b"), ("2", "c")]
            .iter()
            .map(|(z, c)| vec![z.to_string(), c.to_string()])
            .collect();
        let ds = Dataset::new("t", schema, rows).unwrap();
        let dcs = parse_constraints("t1&t2: t1.zip=t2.zip & t1.city!=t2.city", ds.schema()).unwrap();
        let flags = constraint_violation_baseline(&ds, &dcs);
        assert_eq!(flags.len(), 6);
        assert!(!flags.contains(&CellRef::new(3, 0)));
    }

    #[test]
    fn config_is_validated() {
        let c = ExperimentConfig {
            seeds: vec![],
            ..ExperimentConfig::default()
        };
        assert!(c.validate().is_err());
        let c = ExperimentConfig {
            ratios: vec![0.5, 1.0],
            ..ExperimentConfig::default()
        };
        assert!(c.validate().is_err());
    }
}
