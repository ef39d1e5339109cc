mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Bad input or configuration; exits with status 2.
#[derive(Debug)]
pub struct Usage(pub String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

#[derive(Parser, Debug)]
#[command(name = "augclean", version, about = "Few-shot error detection for tabular data")]
struct Cli {
    /// Log progress (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

/// Inputs shared by most commands. Flags override the config file.
#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// TOML run configuration.
    #[arg(long, short = 'c')]
    pub config: Option<PathBuf>,
    /// Dataset CSV.
    #[arg(long, short = 'd')]
    pub data: Option<PathBuf>,
    /// Denial constraints, one per line.
    #[arg(long)]
    pub constraints: Option<PathBuf>,
    /// Labeled cells as `tuple_index,attribute,clean_value`.
    #[arg(long, short = 'l')]
    pub labels: Option<PathBuf>,
    /// Model checkpoint.
    #[arg(long, short = 'm')]
    pub model: Option<PathBuf>,
    /// The dataset CSV has no header row.
    #[arg(long)]
    pub no_header: bool,
    /// Seed for splits, embeddings, augmentation and training.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
    /// Fraction of the labeled cells used for training and calibration.
    #[arg(long)]
    pub train_fraction: Option<f64>,
    /// Fraction of the training cells held out for calibration.
    #[arg(long)]
    pub holdout_fraction: Option<f64>,
    /// Train on the labeled cells only.
    #[arg(long, conflicts_with = "resample")]
    pub no_augment: bool,
    /// Balance the classes by repeating labeled errors.
    #[arg(long)]
    pub resample: bool,
    /// Acceptance probability of each augmentation draw.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Fraction of error examples after augmentation.
    #[arg(long)]
    pub error_ratio: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Calibrated probability at or above which a cell is flagged.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Feature groups to switch off (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub disable: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Learn the noisy channel, augment, and train a calibrated detector.
    Train(TrainArgs),
    /// Write predictions for every cell not used in training.
    Detect {
        #[command(flatten)]
        common: Common,
        /// Output CSV (stdout when omitted).
        #[arg(long, short = 'o')]
        output: Option<PathBuf>,
        /// Include the cells used for training and calibration.
        #[arg(long)]
        all: bool,
    },
    /// Generate synthetic error examples from labeled cells.
    Augment {
        #[command(flatten)]
        common: Common,
        /// Number of examples (default: enough to balance the classes).
        #[arg(long, short = 'n')]
        count: Option<usize>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long, short = 'o')]
        output: Option<PathBuf>,
    },
    /// Corrupt a clean CSV and write the ground truth.
    InjectErrors {
        #[command(flatten)]
        common: Common,
        /// Dirty CSV to write.
        #[arg(long, short = 'o')]
        output: PathBuf,
        /// Ground-truth CSV to write.
        #[arg(long)]
        truth: PathBuf,
        /// Fraction of cells to corrupt.
        #[arg(long, default_value_t = 0.05)]
        rate: f64,
        /// Error mix as `kind=weight` pairs, e.g. `typo=0.7,value-swap=0.3`.
        #[arg(long, value_delimiter = ',')]
        mix: Vec<String>,
        /// Character inserted by typos; `random` picks a letter per error.
        #[arg(long, default_value = "x")]
        typo_char: String,
    },
    /// Score a predictions file against ground truth.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long, short = 'p')]
        predictions: PathBuf,
        /// Print JSON instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Run an experiment suite and write its report.
    Bench {
        /// end2end, ablation, aug-vs-super, balance-sweep or weak-precision.
        suite: String,
        #[command(flatten)]
        common: Common,
        /// Number of seeds, starting at 0.
        #[arg(long)]
        seeds: Option<u64>,
        #[arg(long, env = config::REPORT_DIR_ENV)]
        report_dir: Option<PathBuf>,
        #[arg(long)]
        train_fraction: Option<f64>,
        #[arg(long)]
        error_rate: Option<f64>,
        /// Tuples in the synthetic table (when no dataset is given).
        #[arg(long)]
        tuples: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
        /// Groups removed by the ablation suite (comma separated).
        #[arg(long, value_delimiter = ',')]
        groups: Vec<String>,
    },
    /// Show the learned transformations and their probabilities.
    InspectPolicy {
        #[command(flatten)]
        common: Common,
        #[arg(long, short = 'k', default_value_t = 20)]
        top: usize,
        /// Show the policy conditioned on this value.
        #[arg(long)]
        value: Option<String>,
    },
    /// Show the feature vector of one cell.
    InspectFeatures {
        #[command(flatten)]
        common: Common,
        #[arg(long, short = 't')]
        tuple: usize,
        /// Attribute name or index.
        #[arg(long, short = 'a')]
        attribute: String,
        /// Featurize this value in place of the observed one.
        #[arg(long)]
        value: Option<String>,
    },
    /// Write the synthetic hospital table and its constraints.
    Generate {
        #[arg(long, short = 'o')]
        output: PathBuf,
        #[arg(long)]
        constraints_out: Option<PathBuf>,
        #[arg(long, default_value_t = 1000)]
        tuples: usize,
        #[arg(long, default_value_t = 50)]
        hospitals: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print the effective configuration as TOML.
    ShowConfig {
        #[command(flatten)]
        common: Common,
    },
    /// Print the summary of one or more bench reports.
    Summarize {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    use commands as c;
    match cli.command {
        Command::Train(args) => c::train(&args),
        Command::Detect { common, output, all } => c::detect(&common, output.as_deref(), all),
        Command::Augment {
            common,
            count,
            alpha,
            output,
        } => c::augment(&common, count, alpha, output.as_deref()),
        Command::InjectErrors {
            common,
            output,
            truth,
            rate,
            mix,
            typo_char,
        } => c::inject(&common, &output, &truth, rate, &mix, &typo_char),
        Command::Evaluate {
            common,
            truth,
            predictions,
            json,
        } => c::evaluate(&common, &truth, &predictions, json),
        Command::Bench {
            suite,
            common,
            seeds,
            report_dir,
            train_fraction,
            error_rate,
            tuples,
            epochs,
            groups,
        } => c::bench(
            &suite,
            &common,
            c::BenchFlags {
                seeds,
                report_dir,
                train_fraction,
                error_rate,
                tuples,
                epochs,
                groups,
            },
        ),
        Command::InspectPolicy { common, top, value } => c::inspect_policy(&common, top, value.as_deref()),
        Command::InspectFeatures {
            common,
            tuple,
            attribute,
            value,
        } => c::inspect_features(&common, tuple, &attribute, value.as_deref()),
        Command::Generate {
            output,
            constraints_out,
            tuples,
            hospitals,
            seed,
        } => c::generate(&output, constraints_out.as_deref(), tuples, hospitals, seed),
        Command::ShowConfig { common } => c::show_config(&common),
        Command::Summarize { reports } => c::summarize(&reports),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<Usage>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<augclean::Error>() {
            return if e.is_usage() { 2 } else { 1 };
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
