use std::collections::{BTreeMap, HashSet};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::Context;
use augclean::constraints::{load_constraints, DenialConstraint};
use augclean::data::{load_csv, load_truth, split, write_csv, write_truth, CellRef, Dataset, Label, TrainingSet};
use augclean::detector::{self, flagged, learn_channel, synthetic_target, Augmentation, Detector};
use augclean::features::{FeatureGroup, FeaturePipeline, Granularity, DEEP_INPUTS};
use augclean::harness::{
    self, hospital, hospital_benchmark, inject_errors, read_rows, render_summary, run_experiment, write_report,
    Benchmark, ErrorKind, HospitalSpec, Suite, HOSPITAL_CONSTRAINTS,
};
use augclean::noisychannel::{augment_n, NoisyChannel};

use crate::config::{require_file, require_output, RunConfig};
use crate::output::{read_predictions, write_augmented, write_predictions};
use crate::{Common, TrainArgs, Usage};

fn load_config(common: &Common) -> anyhow::Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let p = &mut cfg.paths;
    for (slot, flag) in [
        (&mut p.data, &common.data),
        (&mut p.constraints, &common.constraints),
        (&mut p.labels, &common.labels),
        (&mut p.model, &common.model),
    ] {
        if flag.is_some() {
            slot.clone_from(flag);
        }
    }
    if common.no_header {
        cfg.has_header = false;
    }
    if let Some(seed) = common.seed {
        cfg.split.seed = seed;
        cfg.bench.injection.seed = seed;
        cfg.detector = cfg.detector.with_seed(seed);
    }
    Ok(cfg)
}

fn dataset(cfg: &RunConfig) -> anyhow::Result<Dataset> {
    let path = require_file(&cfg.paths.data, "--data")?;
    load_csv(path, cfg.has_header).with_context(|| format!("loading {}", path.display()))
}

fn constraints(cfg: &RunConfig, data: &Dataset) -> anyhow::Result<Vec<DenialConstraint>> {
    match &cfg.paths.constraints {
        Some(_) => {
            let path = require_file(&cfg.paths.constraints, "--constraints")?;
            Ok(load_constraints(path, data.schema()).with_context(|| format!("loading {}", path.display()))?)
        }
        None => Ok(Vec::new()),
    }
}

fn labels(cfg: &RunConfig, data: &Dataset) -> anyhow::Result<TrainingSet> {
    let path = require_file(&cfg.paths.labels, "--labels")?;
    let truth = load_truth(path, data.schema()).with_context(|| format!("loading {}", path.display()))?;
    Ok(TrainingSet::from_truth(data, &truth)?)
}

fn disabled_groups(names: &[String]) -> anyhow::Result<Vec<FeatureGroup>> {
    Ok(names.iter().map(|n| n.parse()).collect::<augclean::Result<_>>()?)
}

fn secs(d: Duration) -> String {
    format!("{:.2}s", d.as_secs_f64())
}

pub fn train(args: &TrainArgs) -> anyhow::Result<()> {
    let mut cfg = load_config(&args.common)?;
    if let Some(f) = args.train_fraction {
        cfg.split.train_fraction = f;
    }
    if let Some(f) = args.holdout_fraction {
        cfg.split.holdout_fraction_of_train = f;
    }
    let d = &mut cfg.detector;
    if args.no_augment {
        d.augmentation = Augmentation::None;
    }
    if args.resample {
        d.augmentation = Augmentation::Resample;
    }
    if let Some(a) = args.alpha {
        d.augment.alpha = a;
    }
    if args.error_ratio.is_some() {
        d.error_ratio = args.error_ratio;
    }
    if let Some(e) = args.epochs {
        d.train.epochs = e;
    }
    if let Some(t) = args.threshold {
        d.train.threshold = t;
    }
    d.features.disabled.extend(disabled_groups(&args.disable)?);
    let model = require_output(&cfg.paths.model, "--model")?.to_path_buf();

    let data = dataset(&cfg)?;
    let dcs = constraints(&cfg, &data)?;
    let labels = labels(&cfg, &data)?;
    let parts = split(&labels, &cfg.split)?;
    println!(
        "training cells: {} ({} errors), calibration cells: {} ({} errors)",
        parts.train.len(),
        parts.train.count(Label::Error),
        parts.holdout.len(),
        parts.holdout.count(Label::Error)
    );
    let (det, report) = detector::fit(&data, &dcs, &parts.train, &parts.holdout, &cfg.detector)?;
    det.save(&model)?;

    let t = &report.timings;
    println!(
        "pairs: {} labeled, {} weakly supervised; {} transformations",
        report.pairs.from_training, report.pairs.from_weak_supervision, report.transformations
    );
    println!(
        "synthetic errors: {}, resampled errors: {}",
        report.synthetic, report.resampled
    );
    if let Some(loss) = report.train.epoch_loss.last() {
        println!("final training loss: {loss:.5}");
    }
    println!(
        "calibration: a = {:.4}, b = {:.4}{}",
        det.calibrator.a,
        det.calibrator.b,
        if det.calibrator.fitted { "" } else { " (not fitted)" }
    );
    println!("stage timings:");
    for (stage, d) in [
        ("noisy channel", t.channel),
        ("augmentation", t.augment),
        ("features", t.features),
        ("training", t.train),
        ("calibration", t.calibrate),
    ] {
        println!("  {stage:<14} {}", secs(d));
    }
    println!("wrote {}", model.display());
    Ok(())
}

pub fn detect(common: &Common, output: Option<&Path>, all: bool) -> anyhow::Result<()> {
    let cfg = load_config(common)?;
    let model = require_file(&cfg.paths.model, "--model")?;
    let det = Detector::load(model).with_context(|| format!("loading {}", model.display()))?;
    let data = dataset(&cfg)?;
    let predictions = if all {
        let cells: Vec<CellRef> = data.cells().collect();
        det.predict(&data, &cells)?
    } else {
        det.predict_unlabeled(&data)?
    };
    match output {
        Some(path) => {
            let file = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
            write_predictions(&predictions, data.schema(), std::io::BufWriter::new(file))?;
            let errors = predictions.iter().filter(|p| p.label == Label::Error).count();
            eprintln!(
                "{} cells scored, {errors} flagged; wrote {}",
                predictions.len(),
                path.display()
            );
        }
        None => write_predictions(&predictions, data.schema(), std::io::stdout().lock())?,
    }
    Ok(())
}

fn channel_from_labels(cfg: &RunConfig, data: &Dataset, labels: &TrainingSet) -> anyhow::Result<NoisyChannel> {
    learn_channel(data, labels, cfg.detector.min_pairs)?
        .ok_or_else(|| anyhow::anyhow!("no labeled or weakly supervised error pairs to learn from"))
}

pub fn augment(common: &Common, count: Option<usize>, alpha: Option<f64>, output: Option<&Path>) -> anyhow::Result<()> {
    let mut cfg = load_config(common)?;
    if let Some(a) = alpha {
        cfg.detector.augment.alpha = a;
    }
    let data = dataset(&cfg)?;
    let labels = labels(&cfg, &data)?;
    let channel = channel_from_labels(&cfg, &data, &labels)?;
    let target = count.unwrap_or_else(|| {
        synthetic_target(
            labels.count(Label::Correct),
            labels.count(Label::Error),
            cfg.detector.error_ratio,
        )
    });
    let examples = augment_n(&labels, &channel.policy, &cfg.detector.augment, target)?;
    eprintln!(
        "{} transformations; generated {} of {target} examples",
        channel.transformations.phi.len(),
        examples.len()
    );
    match output {
        Some(path) => {
            let file = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
            write_augmented(&examples, data.schema(), std::io::BufWriter::new(file))?;
        }
        None => write_augmented(&examples, data.schema(), std::io::stdout().lock())?,
    }
    Ok(())
}

fn parse_mix(items: &[String]) -> anyhow::Result<BTreeMap<ErrorKind, f64>> {
    let mut mix = BTreeMap::new();
    for item in items {
        let (kind, weight) = item
            .split_once('=')
            .ok_or_else(|| Usage(format!("mix entry `{item}` is not `kind=weight`")))?;
        let kind: ErrorKind =
            serde_json::from_value(serde_json::Value::String(kind.trim().to_string())).map_err(|_| {
                Usage(format!(
                    "unknown error kind `{kind}`; expected typo, char-swap, value-swap or attribute-shift"
                ))
            })?;
        let weight: f64 = weight
            .trim()
            .parse()
            .map_err(|_| Usage(format!("mix weight `{weight}` is not a number")))?;
        mix.insert(kind, weight);
    }
    Ok(mix)
}

pub fn inject(
    common: &Common,
    output: &Path,
    truth_path: &Path,
    rate: f64,
    mix: &[String],
    typo_char: &str,
) -> anyhow::Result<()> {
    let cfg = load_config(common)?;
    let clean = dataset(&cfg)?;
    let mut spec = cfg.bench.injection.clone();
    spec.error_rate = rate;
    if !mix.is_empty() {
        spec.mix = parse_mix(mix)?;
    }
    spec.typo_char = match typo_char {
        "random" => None,
        s => {
            let mut chars = s.chars();
            match (chars.next(), chars.next()) {
                (Some(c), None) => Some(c),
                _ => return Err(Usage(format!("--typo-char must be one character or `random`, got `{s}`")).into()),
            }
        }
    };
    let (dirty, truth) = inject_errors(&clean, &spec)?;
    write_csv(&dirty, output)?;
    write_truth(&truth, dirty.schema(), truth_path)?;
    println!(
        "corrupted {} of {} cells; wrote {} and {}",
        truth.erroneous_cells(&dirty).len(),
        dirty.num_cells(),
        output.display(),
        truth_path.display()
    );
    Ok(())
}

pub fn evaluate(common: &Common, truth_path: &Path, predictions: &Path, json: bool) -> anyhow::Result<()> {
    let cfg = load_config(common)?;
    let data = dataset(&cfg)?;
    let truth = load_truth(truth_path, data.schema()).with_context(|| format!("loading {}", truth_path.display()))?;
    let predictions = read_predictions(predictions, data.schema())?;
    let cells: Vec<CellRef> = predictions
        .iter()
        .map(|p| p.cell)
        .filter(|&c| truth.get(c).is_some())
        .collect();
    if cells.len() < predictions.len() {
        log::warn!(
            "{} predicted cells have no ground truth and are skipped",
            predictions.len() - cells.len()
        );
    }
    let errors: HashSet<CellRef> = truth.erroneous_cells(&data);
    let report = harness::evaluate(&flagged(&predictions), &errors, &cells);
    if json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        println!("cells      {}", cells.len());
        println!("errors     {}", report.support());
        println!("tp/fp/fn   {}/{}/{}", report.tp, report.fp, report.fn_);
        println!("precision  {:.4}", report.precision);
        println!("recall     {:.4}", report.recall);
        println!("f1         {:.4}", report.f1);
    }
    Ok(())
}

pub struct BenchFlags {
    pub seeds: Option<u64>,
    pub report_dir: Option<PathBuf>,
    pub train_fraction: Option<f64>,
    pub error_rate: Option<f64>,
    pub tuples: Option<usize>,
    pub epochs: Option<usize>,
    pub groups: Vec<String>,
}

pub fn bench(suite: &str, common: &Common, flags: BenchFlags) -> anyhow::Result<()> {
    let suite: Suite = suite.parse()?;
    let mut cfg = load_config(common)?;
    let b = &mut cfg.bench;
    if let Some(n) = flags.seeds {
        b.seeds = (0..n).collect();
    }
    if let Some(f) = flags.train_fraction {
        b.train_fraction = f;
        b.fractions = vec![f];
    }
    if let Some(r) = flags.error_rate {
        b.injection.error_rate = r;
    }
    if let Some(t) = flags.tuples {
        b.tuples = t;
    }
    if !flags.groups.is_empty() {
        b.ablation_groups = disabled_groups(&flags.groups)?;
    }
    if let Some(e) = flags.epochs {
        cfg.detector.train.epochs = e;
    }
    if flags.report_dir.is_some() {
        cfg.paths.report_dir = flags.report_dir;
    }

    let bench = match &cfg.paths.data {
        Some(_) => {
            let clean = dataset(&cfg)?;
            let constraints = constraints(&cfg, &clean)?;
            Benchmark {
                name: clean.id().to_string(),
                clean,
                constraints,
            }
        }
        None => hospital_benchmark(&HospitalSpec {
            tuples: cfg.bench.tuples,
            hospitals: cfg.bench.hospitals,
            seed: 0,
        })?,
    };
    let rows = run_experiment(suite, &bench, &cfg.experiment())?;
    let (table, text) = write_report(cfg.report_dir(), suite, &rows)?;
    print!("{}", render_summary(&harness::summarize(&rows)));
    println!("wrote {} and {}", table.display(), text.display());
    Ok(())
}

pub fn inspect_policy(common: &Common, top: usize, value: Option<&str>) -> anyhow::Result<()> {
    let cfg = load_config(common)?;
    let channel = match &cfg.paths.model {
        Some(_) => {
            let path = require_file(&cfg.paths.model, "--model")?;
            Detector::load(path)?
                .channel
                .ok_or_else(|| anyhow::anyhow!("the checkpoint was trained without a noisy channel"))?
        }
        None => {
            let data = dataset(&cfg)?;
            let labels = labels(&cfg, &data)?;
            channel_from_labels(&cfg, &data, &labels)?
        }
    };
    let mut out = std::io::stdout().lock();
    writeln!(
        out,
        "pairs: {} labeled, {} weakly supervised",
        channel.sources.from_training, channel.sources.from_weak_supervision
    )?;
    writeln!(out, "transformations: {}", channel.transformations.phi.len())?;
    let ranked = match value {
        Some(v) => {
            let c = channel.policy.conditional(v);
            writeln!(out, "policy conditioned on {v:?} ({} applicable):", c.len())?;
            c.top(top)
        }
        None => {
            writeln!(out, "policy:")?;
            channel.policy.ranked().into_iter().take(top).collect()
        }
    };
    for (phi, p) in ranked {
        writeln!(out, "  {p:>8.5}  {phi}")?;
    }
    Ok(())
}

fn attribute_index(data: &Dataset, name: &str) -> anyhow::Result<usize> {
    data.schema()
        .index_of(name)
        .or_else(|| name.parse().ok().filter(|&i| i < data.num_attributes()))
        .ok_or_else(|| Usage(format!("unknown attribute `{name}`")).into())
}

pub fn inspect_features(common: &Common, tuple: usize, attribute: &str, value: Option<&str>) -> anyhow::Result<()> {
    let cfg = load_config(common)?;
    let data = dataset(&cfg)?;
    let det = match &cfg.paths.model {
        Some(_) => Some(Detector::load(require_file(&cfg.paths.model, "--model")?)?),
        None => None,
    };
    let fitted;
    let pipeline = match &det {
        Some(d) => &d.pipeline,
        None => {
            let dcs = constraints(&cfg, &data)?;
            fitted = FeaturePipeline::fit(&data, &dcs, &cfg.detector.features)?;
            &fitted
        }
    };
    let attr = attribute_index(&data, attribute)?;
    if tuple >= data.num_tuples() {
        return Err(Usage(format!(
            "tuple {tuple} is out of range (dataset has {})",
            data.num_tuples()
        ))
        .into());
    }
    let cell = CellRef::new(tuple, attr);
    let featurizer = pipeline.featurizer(&data)?;
    let observed = data.value(cell);
    let shown = value.unwrap_or(observed);
    let f = match value {
        Some(v) => featurizer.featurize_with(cell, v),
        None => featurizer.featurize(cell),
    };

    let mut out = std::io::stdout().lock();
    writeln!(out, "cell ({tuple}, {}) value {shown:?}", data.schema().name(attr))?;
    writeln!(out, "layout {}", pipeline.layout_hash())?;
    let names = pipeline.layout().wide_names(pipeline.schema(), pipeline.constraints());
    for (name, x) in names.iter().zip(&f.wide) {
        writeln!(out, "  {name:<32} {x:.6}")?;
    }
    let dims = pipeline.layout().embedding_dims;
    let pathways = [
        Granularity::Character,
        Granularity::CellToken,
        Granularity::TupleBag,
        Granularity::DatasetNeighbor,
    ];
    for (k, g) in pathways.iter().enumerate().take(DEEP_INPUTS) {
        let v = &f.deep[k * dims..(k + 1) * dims];
        let norm = v.iter().map(|x| f64::from(*x).powi(2)).sum::<f64>().sqrt();
        writeln!(out, "  {:<32} |v| = {norm:.4}", format!("{g:?} embedding"))?;
    }
    if let Some(d) = &det {
        let input = d.network.prepare(&f)?;
        let z = d.network.forward_input(&input, &mut d.network.workspace()).margin();
        writeln!(out, "error probability {:.6}", d.calibrator.probability(z))?;
    }
    Ok(())
}

pub fn generate(
    output: &Path,
    constraints_out: Option<&Path>,
    tuples: usize,
    hospitals: usize,
    seed: u64,
) -> anyhow::Result<()> {
    let data = hospital(&HospitalSpec {
        tuples,
        hospitals,
        seed,
    })?;
    write_csv(&data, output)?;
    if let Some(path) = constraints_out {
        std::fs::write(path, HOSPITAL_CONSTRAINTS).with_context(|| format!("writing {}", path.display()))?;
    }
    println!("wrote {} ({} tuples)", output.display(), data.num_tuples());
    Ok(())
}

pub fn summarize(reports: &[PathBuf]) -> anyhow::Result<()> {
    let mut rows = Vec::new();
    for path in reports {
        rows.extend(read_rows(path).with_context(|| format!("reading {}", path.display()))?);
    }
    print!("{}", render_summary(&harness::summarize(&rows)));
    Ok(())
}

pub fn show_config(common: &Common) -> anyhow::Result<()> {
    print!("{}", load_config(common)?.to_toml()?);
    Ok(())
}
