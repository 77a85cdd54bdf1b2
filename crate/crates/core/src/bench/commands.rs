use crate::allocation::{normalize, Budgets, RawAllocation};
use crate::error::{RbError, Result};
use crate::models::{sample_model, ReturnModel, ReturnSample};
use crate::risk::RiskMeasureSpec;
use crate::solver::{
    reference_solve, sgd_solve, sgd_solve_with_observer, Method, SolveReport, SolverConfig,
};

/// Exact ES risk budgeting portfolio of `model`.
pub fn cmd_reference(
    model: &ReturnModel,
    budgets: &Budgets,
    alpha: f64,
    config: &SolverConfig,
) -> Result<SolveReport> {
    let cfg = SolverConfig {
        method: Method::Reference,
        ..config.clone()
    };
    reference_solve(&RiskMeasureSpec::es(alpha), budgets, model, &cfg)
}

/// Risk budgeting weights under one measure.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub measure: String,
    pub weights: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Solves the risk budgeting problem under each measure with SGD on one
/// shared sample of `sample_size` draws from `model`.
pub fn cmd_measure_comparison(
    model: &ReturnModel,
    measures: &[RiskMeasureSpec],
    budgets: &Budgets,
    sample_size: usize,
    config: &SolverConfig,
) -> Result<Vec<ComparisonRow>> {
    if measures.is_empty() {
        return Err(RbError::Precondition("no risk measures to compare".into()));
    }
    for m in measures {
        m.validate()?;
    }
    let sample = sample_model(model, sample_size, config.seed)?;
    measures
        .iter()
        .map(|m| {
            let report = sgd_solve(m, budgets, &sample, config)?;
            for w in &report.warnings {
                log::warn!("{}: {w}", report.measure);
            }
            Ok(ComparisonRow {
                measure: report.measure,
                weights: report.weights.into_vec(),
                warnings: report.warnings,
            })
        })
        .collect()
}

/// Columns: measure, theta_1..theta_d.
pub fn write_comparison_csv<W: std::io::Write>(writer: W, rows: &[ComparisonRow]) -> Result<()> {
    let d = rows.first().map_or(0, |r| r.weights.len());
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["measure".to_string()];
    header.extend((1..=d).map(|i| format!("theta_{i}")));
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.measure.clone()];
        rec.extend(r.weights.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Inverse of [`write_comparison_csv`]; warnings are not stored in the CSV.
pub fn read_comparison_csv<R: std::io::Read>(reader: R) -> Result<Vec<ComparisonRow>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let weights = rec
            .iter()
            .skip(1)
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|e| RbError::Parse(format!("weight `{s}`: {e}")))
            })
            .collect::<Result<_>>()?;
        rows.push(ComparisonRow {
            measure: rec.get(0).unwrap_or_default().to_string(),
            weights,
            warnings: Vec::new(),
        });
    }
    Ok(rows)
}

/// Weights at 5 decimals, one row per measure.
pub fn comparison_table(rows: &[ComparisonRow]) -> String {
    let d = rows.first().map_or(0, |r| r.weights.len());
    let mut out = format!("{:<24}", "measure");
    for i in 1..=d {
        out.push_str(&format!(" {:>9}", format!("theta_{i}")));
    }
    out.push('\n');
    for r in rows {
        out.push_str(&format!("{:<24}", r.measure));
        for w in &r.weights {
            out.push_str(&format!(" {w:>9.5}"));
        }
        out.push('\n');
    }
    out
}

/// One SGD iterate: raw allocation, auxiliary variables and normalized weights.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub y: Vec<f64>,
    pub zeta: Vec<f64>,
    pub theta: Vec<f64>,
}

/// SGD for ES at level `alpha` on a sample, recording every iterate
/// (the start included).
pub fn cmd_sgd_trace(
    sample: &ReturnSample,
    budgets: &Budgets,
    alpha: f64,
    config: &SolverConfig,
) -> Result<(SolveReport, Vec<TraceRow>)> {
    let mut rows = Vec::new();
    let report =
        sgd_solve_with_observer(&RiskMeasureSpec::es(alpha), budgets, sample, config, |s| {
            let theta = RawAllocation::new(s.y.to_vec())
                .map(|y| normalize(&y).into_vec())
                .unwrap_or_else(|_| vec![f64::NAN; s.y.len()]);
            rows.push(TraceRow {
                iteration: s.iteration,
                y: s.y.to_vec(),
                zeta: s.zeta.to_vec(),
                theta,
            });
        })?;
    Ok((report, rows))
}

fn zeta_columns(k: usize) -> Vec<String> {
    if k == 1 {
        vec!["zeta".into()]
    } else {
        (1..=k).map(|i| format!("zeta_{i}")).collect()
    }
}

/// Columns: iteration, y_1..y_d, zeta, theta_1..theta_d.
pub fn write_trace_csv<W: std::io::Write>(writer: W, rows: &[TraceRow]) -> Result<()> {
    let (d, k) = rows.first().map_or((0, 1), |r| (r.y.len(), r.zeta.len()));
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["iteration".to_string()];
    header.extend((1..=d).map(|i| format!("y_{i}")));
    header.extend(zeta_columns(k));
    header.extend((1..=d).map(|i| format!("theta_{i}")));
    w.write_record(&header)?;
    let mut rec = Vec::with_capacity(header.len());
    for r in rows {
        rec.clear();
        rec.push(r.iteration.to_string());
        rec.extend(
            r.y.iter()
                .chain(&r.zeta)
                .chain(&r.theta)
                .map(|v| v.to_string()),
        );
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace_csv<R: std::io::Read>(reader: R) -> Result<Vec<TraceRow>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header = rdr.headers()?.clone();
    let d = header.iter().filter(|h| h.starts_with("y_")).count();
    let k = header.iter().filter(|h| h.starts_with("zeta")).count();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| RbError::Parse(format!("trace value `{s}`: {e}")))
        };
        let values: Vec<f64> = rec.iter().skip(1).map(parse).collect::<Result<_>>()?;
        if values.len() != 2 * d + k {
            return Err(RbError::Parse(format!(
                "trace row has {} values, expected {}",
                values.len(),
                2 * d + k
            )));
        }
        let iteration = rec
            .get(0)
            .unwrap_or_default()
            .parse()
            .map_err(|e| RbError::Parse(format!("iteration: {e}")))?;
        rows.push(TraceRow {
            iteration,
            y: values[..d].to_vec(),
            zeta: values[d..d + k].to_vec(),
            theta: values[d + k..].to_vec(),
        });
    }
    Ok(rows)
}
