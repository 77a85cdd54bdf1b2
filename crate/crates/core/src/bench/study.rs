use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::spec::{Estimation, ExperimentSpec, Setting};
use crate::allocation::{l1_accuracy, Budgets};
use crate::error::{RbError, Result};
use crate::models::{
    em_fit_gmix, em_fit_tmix, sample_model, sample_tmix, EmConfig, ReturnModel, StudentTMixture,
};
use crate::numeric::{self, mix_seed};
use crate::risk::RiskMeasureSpec;
use crate::solver::{reference_solve, solve, Method, ProblemData, SolverConfig};

/// Summary of one (dimension, setting, method) cell over all repetitions.
/// Absent statistics (no successful run, or timing disabled) are empty cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub d: usize,
    pub method: Method,
    pub setting: String,
    pub acc_mean: Option<f64>,
    pub acc_std: Option<f64>,
    pub time_mean: Option<f64>,
    pub time_std: Option<f64>,
    /// Number of failed repetitions.
    pub errors: usize,
}

/// Outcome of one method in one repetition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub d: usize,
    pub repetition: usize,
    pub seed: u64,
    pub setting: String,
    pub method: Method,
    pub accuracy: Option<f64>,
    pub time: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyOutput {
    pub rows: Vec<BenchRow>,
    pub runs: Vec<RunRecord>,
}

/// Mean and sample standard deviation; absent for no values.
fn mean_std(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let (m, s) = numeric::mean_std(values);
    (Some(m), Some(s))
}

struct Repetition<'a> {
    spec: &'a ExperimentSpec,
    risk: RiskMeasureSpec,
    d: usize,
    r: usize,
    seed: u64,
    timing: bool,
}

impl Repetition<'_> {
    fn record(
        &self,
        setting: Setting,
        method: Method,
        outcome: Result<(f64, Option<f64>)>,
    ) -> RunRecord {
        let (accuracy, time, error) = match outcome {
            Ok((a, t)) => (Some(a), t, None),
            Err(e) => {
                log::warn!("d={} repetition {} {setting} {method}: {e}", self.d, self.r);
                (None, None, Some(e.to_string()))
            }
        };
        RunRecord {
            d: self.d,
            repetition: self.r,
            seed: self.seed,
            setting: setting.name().into(),
            method,
            accuracy,
            time,
            error,
        }
    }

    fn solver_config(&self, base: &SolverConfig, setting: Setting) -> SolverConfig {
        let mut cfg = base.clone();
        cfg.seed = mix_seed(&[self.seed, 3, cfg.seed]);
        if cfg.method == Method::Sgd {
            cfg.epochs = match setting {
                Setting::ModelFree => self.spec.model_free_epochs,
                Setting::ModelBased(_) => self.spec.model_based_epochs,
            };
        }
        cfg
    }

    fn estimate(
        &self,
        estimation: Estimation,
        truth: &StudentTMixture,
        hist: &crate::models::ReturnSample,
    ) -> Result<ReturnModel> {
        let em = EmConfig {
            seed: mix_seed(&[self.seed, 4, self.spec.em.seed]),
            ..self.spec.em.clone()
        };
        Ok(match estimation {
            Estimation::TrueParams => truth.clone().into(),
            Estimation::TmixEm => em_fit_tmix(hist, truth.components().len(), &truth.dofs(), &em)?
                .model
                .into(),
            Estimation::GmixEm => em_fit_gmix(hist, truth.components().len(), &em)?
                .model
                .into(),
        })
    }

    fn run(&self) -> Vec<RunRecord> {
        let spec = self.spec;
        let budgets = Budgets::equal(self.d);
        let settings = spec.settings();
        let fail_all = |e: &RbError| -> Vec<RunRecord> {
            settings
                .iter()
                .flat_map(|&s| spec.methods(s).into_iter().map(move |c| (s, c.method)))
                .map(|(s, m)| {
                    self.record(s, m, Err(RbError::Numeric(format!("setup failed: {e}"))))
                })
                .collect()
        };
        let setup = (|| {
            let truth = crate::models::synth_dgp(self.d, self.seed, &spec.dgp)?;
            let reference = reference_solve(
                &self.risk,
                &budgets,
                &truth.clone().into(),
                &SolverConfig::with_method(Method::Reference),
            )?;
            let hist = sample_tmix(&truth, spec.hist_size, mix_seed(&[self.seed, 1]))?;
            Ok::<_, RbError>((truth, reference.weights.into_vec(), hist))
        })();
        let (truth, reference, hist) = match setup {
            Ok(v) => v,
            Err(e) => return fail_all(&e),
        };
        let accuracy = |report: crate::solver::SolveReport| -> Result<(f64, Option<f64>)> {
            let acc = l1_accuracy(report.weights.as_slice(), &reference)?;
            Ok((acc, report.wall_time.filter(|_| self.timing)))
        };

        let mut out = Vec::new();
        for (si, &setting) in settings.iter().enumerate() {
            let configs = spec.methods(setting);
            let data = match setting {
                Setting::ModelFree => Ok((None, hist.clone())),
                Setting::ModelBased(est) => self.estimate(est, &truth, &hist).and_then(|model| {
                    let sim =
                        sample_model(&model, spec.sim_size, mix_seed(&[self.seed, 2, si as u64]))?;
                    Ok((Some(model), sim))
                }),
            };
            let (model, sample) = match data {
                Ok(v) => v,
                Err(e) => {
                    for c in configs {
                        out.push(self.record(setting, c.method, Err(RbError::Fit(e.to_string()))));
                    }
                    continue;
                }
            };
            for base in configs {
                let cfg = self.solver_config(base, setting);
                let problem = match (&model, cfg.method) {
                    (Some(m), Method::Msbgd) => ProblemData::Model(m),
                    _ => ProblemData::Sample(&sample),
                };
                let outcome = solve(&self.risk, &budgets, problem, &cfg).and_then(&accuracy);
                out.push(self.record(setting, cfg.method, outcome));
            }
        }
        out
    }
}

/// Runs the accuracy study: for every dimension and repetition, draws a
/// ground-truth model and a historical sample, solves the exact ES risk
/// parity problem under the truth, and records the `100 * L1` distance of
/// every configured method in every setting.
///
/// Repetitions run on the current rayon pool; results do not depend on its size.
pub fn cmd_accuracy_study(spec: &ExperimentSpec, timing: bool) -> Result<StudyOutput> {
    spec.validate()?;
    let risk = RiskMeasureSpec::es(spec.alpha);
    let jobs: Vec<(usize, usize)> = spec
        .dims
        .iter()
        .flat_map(|&d| (0..spec.repetitions).map(move |r| (d, r)))
        .collect();
    let runs: Vec<RunRecord> = jobs
        .par_iter()
        .map(|&(d, r)| {
            Repetition {
                spec,
                risk: risk.clone(),
                d,
                r,
                seed: mix_seed(&[spec.seed, d as u64, r as u64]),
                timing,
            }
            .run()
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();

    let mut rows = Vec::new();
    for &d in &spec.dims {
        for setting in spec.settings() {
            for cfg in spec.methods(setting) {
                let cell: Vec<&RunRecord> = runs
                    .iter()
                    .filter(|x| x.d == d && x.setting == setting.name() && x.method == cfg.method)
                    .collect();
                let acc: Vec<f64> = cell.iter().filter_map(|x| x.accuracy).collect();
                let time: Vec<f64> = cell.iter().filter_map(|x| x.time).collect();
                let (acc_mean, acc_std) = mean_std(&acc);
                let (time_mean, time_std) = mean_std(&time);
                rows.push(BenchRow {
                    d,
                    method: cfg.method,
                    setting: setting.name().into(),
                    acc_mean,
                    acc_std,
                    time_mean,
                    time_std,
                    errors: cell.iter().filter(|x| x.error.is_some()).count(),
                });
            }
        }
    }
    Ok(StudyOutput { rows, runs })
}

fn write_rows<W: std::io::Write, T: Serialize>(writer: W, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

fn read_rows<R: std::io::Read, T: for<'de> Deserialize<'de>>(reader: R) -> Result<Vec<T>> {
    csv::Reader::from_reader(reader)
        .deserialize()
        .map(|r| r.map_err(RbError::from))
        .collect()
}

/// Columns: d, method, setting, acc_mean, acc_std, time_mean, time_std, errors.
pub fn write_bench_csv<W: std::io::Write>(writer: W, rows: &[BenchRow]) -> Result<()> {
    if rows.is_empty() {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "d",
            "method",
            "setting",
            "acc_mean",
            "acc_std",
            "time_mean",
            "time_std",
            "errors",
        ])?;
        w.flush()?;
        return Ok(());
    }
    write_rows(writer, rows)
}

pub fn read_bench_csv<R: std::io::Read>(reader: R) -> Result<Vec<BenchRow>> {
    read_rows(reader)
}

pub fn write_runs_csv<W: std::io::Write>(writer: W, runs: &[RunRecord]) -> Result<()> {
    write_rows(writer, runs)
}

pub fn read_runs_csv<R: std::io::Read>(reader: R) -> Result<Vec<RunRecord>> {
    read_rows(reader)
}

/// Human-readable table: accuracies at 2 decimals as `mean (std)`.
pub fn study_table(rows: &[BenchRow]) -> String {
    let cell = |m: Option<f64>, s: Option<f64>, prec: usize| match (m, s) {
        (Some(m), Some(s)) => format!("{m:.prec$} ({s:.prec$})"),
        _ => "-".into(),
    };
    let mut out = format!(
        "{:>5} {:<12} {:<7} {:>16} {:>18} {:>6}\n",
        "d", "setting", "method", "accuracy", "time (s)", "errors"
    );
    for r in rows {
        out.push_str(&format!(
            "{:>5} {:<12} {:<7} {:>16} {:>18} {:>6}\n",
            r.d,
            r.setting,
            r.method.name(),
            cell(r.acc_mean, r.acc_std, 2),
            cell(r.time_mean, r.time_std, 3),
            r.errors
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_std_conventions() {
        assert_eq!(mean_std(&[]), (None, None));
        assert_eq!(mean_std(&[2.5]), (Some(2.5), Some(0.0)));
        let (m, s) = mean_std(&[1.0, 3.0]);
        assert_eq!(m, Some(2.0));
        assert!((s.unwrap() - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn bench_csv_round_trip() {
        let rows = vec![
            BenchRow {
                d: 10,
                method: Method::Sgd,
                setting: "model_free".into(),
                acc_mean: Some(5.123456789012345),
                acc_std: Some(0.1 + 0.2),
                time_mean: None,
                time_std: None,
                errors: 0,
            },
            BenchRow {
                d: 10,
                method: Method::Msbgd,
                setting: "tmix_em".into(),
                acc_mean: None,
                acc_std: None,
                time_mean: Some(1e-7),
                time_std: Some(0.0),
                errors: 3,
            },
        ];
        let mut buf = Vec::new();
        write_bench_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("d,method,setting,acc_mean,acc_std,time_mean,time_std,errors\n"));
        assert_eq!(read_bench_csv(buf.as_slice()).unwrap(), rows);
    }
}
