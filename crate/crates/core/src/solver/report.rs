use serde::{Deserialize, Serialize};

use super::config::Method;
use crate::allocation::{RawAllocation, RiskContributionReport, Weights};
use crate::error::Result;
use crate::risk::ZetaState;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub method: Method,
    pub measure: String,
    pub weights: Weights,
    pub raw: RawAllocation,
    pub zeta: ZetaState,
    pub contributions: RiskContributionReport,
    pub objective_trace: Vec<(usize, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl SolveReport {
    /// Copy with the wall-clock time removed, for byte-stable output.
    pub fn without_timing(mut self) -> Self {
        self.wall_time = None;
        self
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn csv_header(d: usize) -> Vec<String> {
        let mut h: Vec<String> = [
            "method",
            "measure",
            "seed",
            "iterations",
            "converged",
            "wall_time",
            "total_risk",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        h.extend((1..=d).map(|i| format!("theta_{i}")));
        h.extend((1..=d).map(|i| format!("rc_{i}")));
        h
    }

    /// One CSV record matching [`SolveReport::csv_header`]; an absent time is an empty cell.
    pub fn csv_record(&self) -> Vec<String> {
        let mut r = vec![
            self.method.name().to_string(),
            self.measure.clone(),
            self.seed.to_string(),
            self.iterations.to_string(),
            self.converged.to_string(),
            self.wall_time
                .map(|t| format!("{t:.6}"))
                .unwrap_or_default(),
            format!("{:e}", self.contributions.total_risk),
        ];
        r.extend(self.weights.as_slice().iter().map(|v| format!("{v:e}")));
        r.extend(
            self.contributions
                .contributions
                .iter()
                .map(|v| format!("{v:e}")),
        );
        r
    }

    /// Header plus the single record.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(Self::csv_header(self.weights.dim()))?;
        w.write_record(self.csv_record())?;
        w.flush()?;
        Ok(())
    }

    /// Asset-indexed table of weights and contributions at 5 decimals.
    pub fn table(&self) -> String {
        let mut out = format!("{:>6} {:>10} {:>12}\n", "asset", "weight", "contribution");
        for (i, (w, c)) in self
            .weights
            .as_slice()
            .iter()
            .zip(&self.contributions.contributions)
            .enumerate()
        {
            out.push_str(&format!("{:>6} {:>10.5} {:>12.5}\n", i + 1, w, c));
        }
        out.push_str(&format!(
            "{:>6} {:>10.5} {:>12.5}\n",
            "total", 1.0, self.contributions.total_risk
        ));
        out
    }
}
