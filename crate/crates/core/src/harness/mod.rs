//! Benchmarks with injected errors, evaluation metrics and experiment
//! suites.

pub mod inject;
pub mod metrics;
pub mod suites;
pub mod synth;

pub use inject::{apportion, inject_errors, ErrorKind, InjectionSpec};
pub use metrics::{evaluate, f1, Aggregate, EvalReport};
pub use suites::{
    constraint_violation_baseline, median_f1, read_rows, render_summary, run_experiment, summarize, write_report,
    write_rows, Benchmark, ExperimentConfig, ReportRow, Suite, SummaryRow,
};
pub use synth::{hospital, HospitalSpec, HOSPITAL_ATTRIBUTES, HOSPITAL_CONSTRAINTS};

use crate::constraints::parse_constraints;
use crate::error::Result;

/// The synthetic hospital table with its three constraints.
pub fn hospital_benchmark(spec: &HospitalSpec) -> Result<Benchmark> {
    let clean = hospital(spec)?;
    let constraints = parse_constraints(HOSPITAL_CONSTRAINTS, clean.schema())?;
    Ok(Benchmark {
        name: "hospital".into(),
        clean,
        constraints,
    })
}
