//! Experiment harness: reference portfolio, SGD traces, the accuracy study and
//! the risk measure comparison.

mod commands;
mod spec;
mod study;

pub use commands::{
    cmd_measure_comparison, cmd_reference, cmd_sgd_trace, comparison_table, read_comparison_csv,
    read_trace_csv, write_comparison_csv, write_trace_csv, ComparisonRow, TraceRow,
};
pub use spec::{Estimation, Experiment, ExperimentSpec, Setting};
pub use study::{
    cmd_accuracy_study, read_bench_csv, read_runs_csv, study_table, write_bench_csv,
    write_runs_csv, BenchRow, RunRecord, StudyOutput,
};

use crate::error::{RbError, Result};
use crate::models::ReturnModel;

const BUNDLED: &[(&str, &str)] = &[
    ("tmix_4assets", include_str!("../../data/tmix_4assets.json")),
    (
        "gmix_3assets_p1",
        include_str!("../../data/gmix_3assets_p1.json"),
    ),
    (
        "gmix_3assets_p08",
        include_str!("../../data/gmix_3assets_p08.json"),
    ),
];

/// Names of the models shipped with the crate.
pub fn bundled_model_names() -> Vec<&'static str> {
    BUNDLED.iter().map(|(n, _)| *n).collect()
}

/// A bundled model by name: `tmix_4assets` (four-asset Student-t mixture),
/// `gmix_3assets_p1` and `gmix_3assets_p08` (three-asset Gaussian models).
pub fn bundled_model(name: &str) -> Result<ReturnModel> {
    let text = BUNDLED
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
        .ok_or_else(|| {
            RbError::Precondition(format!(
                "no bundled model `{name}` (available: {})",
                bundled_model_names().join(", ")
            ))
        })?;
    ReturnModel::from_json(text)
}

/// Loads a model from a file path, or a bundled model when the argument has
/// the form `bundled:<name>`.
pub fn load_model(source: &str) -> Result<ReturnModel> {
    match source.strip_prefix("bundled:") {
        Some(name) => bundled_model(name),
        None => {
            let text = std::fs::read_to_string(source)
                .map_err(|e| RbError::Parse(format!("cannot read model file {source}: {e}")))?;
            ReturnModel::from_json(&text)
        }
    }
}
