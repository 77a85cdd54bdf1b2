//! Barzilai-Borwein descent on sample estimates of `g(R(y)) - sum_i b_i ln y_i`
//! with forward-difference gradients.

use std::time::Instant;

use super::config::{Method, SolverConfig};
use super::report::SolveReport;
use super::sample_eval::sample_audit;
use super::start::{ray_start, start_direction};
use crate::allocation::{normalize, Budgets, RawAllocation};
use crate::error::{RbError, Result};
use crate::models::{sample_model, ReturnModel, ReturnSample, RowSource};
use crate::numeric::mix_seed;
use crate::risk::{positivity_warnings, RiskMeasureSpec, SampleRisk, ZetaState};

const MAX_HALVINGS: usize = 60;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Sample objective `g(R(y)) - sum b ln y` and its forward-difference gradient.
struct SampleObjective<'a> {
    eval: &'a SampleRisk,
    budgets: &'a Budgets,
    fd_step: f64,
}

impl SampleObjective<'_> {
    fn value(&self, sample: &ReturnSample, y: &[f64]) -> Result<f64> {
        Ok(self.eval.g_value(&sample.losses(y))? + self.budgets.log_barrier(y))
    }

    /// Forward differences with step `fd_step * y_i` in coordinate `i`.
    fn gradient(&self, sample: &ReturnSample, y: &[f64], fy: f64) -> Result<Vec<f64>> {
        let mut probe = y.to_vec();
        let mut g = Vec::with_capacity(y.len());
        for i in 0..y.len() {
            let h = self.fd_step * y[i];
            probe[i] = y[i] + h;
            g.push((self.value(sample, &probe)? - fy) / h);
            probe[i] = y[i];
        }
        Ok(g)
    }
}

struct DescentOutcome {
    iterates: Vec<Vec<f64>>,
    trace: Vec<(usize, f64)>,
    converged: bool,
}

/// BB1 steps `s's / s'r`; on a non-positive curvature estimate falls back to
/// `initial / k`, and halves any step that would leave the positive orthant.
///
/// `evaluate(k, y)` returns the objective and gradient at iteration `k`;
/// `stop` decides convergence from consecutive objective values.
fn bb_descent<E>(
    y0: Vec<f64>,
    max_iters: usize,
    mut evaluate: E,
    stop: Option<f64>,
) -> Result<DescentOutcome>
where
    E: FnMut(usize, &[f64]) -> Result<(f64, Vec<f64>)>,
{
    let (mut fy, mut g) = evaluate(0, &y0)?;
    if !fy.is_finite() {
        return Err(RbError::Numeric(format!(
            "objective is {fy} at the starting point"
        )));
    }
    let norm = |v: &[f64]| dot(v, v).sqrt();
    let initial = 0.01 * norm(&y0) / norm(&g).max(f64::MIN_POSITIVE);
    let mut trace = vec![(0, fy)];
    let mut iterates = vec![y0.clone()];
    let mut y = y0;
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut converged = false;
    for k in 1..=max_iters {
        let mut step = match &prev {
            None => initial,
            Some((yp, gp)) => {
                let s: Vec<f64> = y.iter().zip(yp).map(|(a, b)| a - b).collect();
                let r: Vec<f64> = g.iter().zip(gp).map(|(a, b)| a - b).collect();
                let sr = dot(&s, &r);
                let bb = dot(&s, &s) / sr;
                if sr > 0.0 && bb.is_finite() {
                    bb
                } else {
                    initial / k as f64
                }
            }
        };
        let mut next: Vec<f64> = y.iter().zip(&g).map(|(v, gi)| v - step * gi).collect();
        let mut halvings = 0;
        while next.iter().any(|v| !(*v > 0.0)) {
            halvings += 1;
            if halvings > MAX_HALVINGS {
                return Err(RbError::Numeric(format!(
                    "no positive step found at iteration {k}"
                )));
            }
            step *= 0.5;
            next = y.iter().zip(&g).map(|(v, gi)| v - step * gi).collect();
        }
        let (f_next, g_next) = evaluate(k, &next)?;
        if !f_next.is_finite() || f_next.abs() > super::sgd::DIVERGENCE_THRESHOLD {
            return Err(RbError::Divergence {
                iteration: k,
                value: f_next,
            });
        }
        trace.push((k, f_next));
        prev = Some((
            std::mem::replace(&mut y, next),
            std::mem::replace(&mut g, g_next),
        ));
        iterates.push(y.clone());
        let change = (f_next - fy).abs();
        fy = f_next;
        if let Some(tol) = stop {
            if change < tol {
                converged = true;
                break;
            }
        }
    }
    Ok(DescentOutcome {
        iterates,
        trace,
        converged,
    })
}

fn check_dim(budgets: &Budgets, d: usize) -> Result<()> {
    if budgets.dim() != d {
        return Err(RbError::DimensionMismatch {
            expected: budgets.dim(),
            found: d,
        });
    }
    Ok(())
}

/// One-sample benchmark descent on a fixed sample; stops when the objective
/// changes by less than `stop_tol`.
pub fn osbgd_solve(
    spec: &RiskMeasureSpec,
    budgets: &Budgets,
    sample: &ReturnSample,
    config: &SolverConfig,
) -> Result<SolveReport> {
    config.validate()?;
    check_dim(budgets, sample.dim())?;
    let eval = SampleRisk::new(spec)?;
    let started = Instant::now();
    let q = eval.objective().exponent();
    let direction = start_direction(config.initial_point.as_deref(), budgets)?;
    let y0 = ray_start(&direction, q, |w| eval.risk(&sample.losses(w)))?;
    let problem = SampleObjective {
        eval: &eval,
        budgets,
        fd_step: config.fd_step,
    };
    let outcome = bb_descent(
        y0,
        config.iteration_cap(),
        |_, y| {
            let f = problem.value(sample, y)?;
            Ok((f, problem.gradient(sample, y, f)?))
        },
        Some(config.stop_tol),
    )?;
    let wall_time = started.elapsed().as_secs_f64();
    let y = outcome
        .iterates
        .last()
        .expect("descent keeps the start")
        .clone();
    finish(
        Method::Osbgd,
        spec,
        budgets,
        sample,
        &eval,
        y,
        outcome,
        wall_time,
        config.seed,
    )
}

#[allow(clippy::too_many_arguments)]
fn finish(
    method: Method,
    spec: &RiskMeasureSpec,
    budgets: &Budgets,
    sample: &ReturnSample,
    eval: &SampleRisk,
    y: Vec<f64>,
    outcome: DescentOutcome,
    wall_time: f64,
    seed: u64,
) -> Result<SolveReport> {
    let raw = RawAllocation::new(y)?;
    let weights = normalize(&raw);
    let (zeta, _) = eval
        .objective()
        .minimize_zeta(&sample.losses(raw.as_slice()))?;
    let contributions = sample_audit(spec, sample, &weights, budgets)?;
    let warnings = positivity_warnings(spec, budgets.dim(), |w| eval.risk(&sample.losses(w)))?;
    Ok(SolveReport {
        method,
        measure: spec.label(),
        weights,
        raw,
        zeta: ZetaState::new(zeta)?,
        contributions,
        iterations: outcome.trace.len() - 1,
        objective_trace: outcome.trace,
        wall_time: Some(wall_time),
        converged: outcome.converged,
        seed,
        warnings,
    })
}

/// Multi-sample benchmark descent: each iteration's gradient uses a fresh
/// sample of `resample_size` draws from `model`; runs a fixed number of
/// iterations and averages the last `last_k` iterates.
pub fn msbgd_solve(
    spec: &RiskMeasureSpec,
    budgets: &Budgets,
    model: &ReturnModel,
    config: &SolverConfig,
) -> Result<SolveReport> {
    config.validate()?;
    check_dim(budgets, model.dim())?;
    let eval = SampleRisk::new(spec)?;
    let started = Instant::now();
    let q = eval.objective().exponent();
    let draw = |k: usize| {
        sample_model(
            model,
            config.resample_size,
            mix_seed(&[config.seed, k as u64]),
        )
    };
    let first = draw(0)?;
    let direction = start_direction(config.initial_point.as_deref(), budgets)?;
    let y0 = ray_start(&direction, q, |w| eval.risk(&first.losses(w)))?;
    let problem = SampleObjective {
        eval: &eval,
        budgets,
        fd_step: config.fd_step,
    };
    let mut last_sample = first;
    let outcome = bb_descent(
        y0,
        config.iteration_cap(),
        |k, y| {
            if k > 0 {
                last_sample = draw(k)?;
            }
            let f = problem.value(&last_sample, y)?;
            Ok((f, problem.gradient(&last_sample, y, f)?))
        },
        None,
    )?;
    let wall_time = started.elapsed().as_secs_f64();
    let tail = &outcome.iterates[outcome.iterates.len().saturating_sub(config.last_k)..];
    let d = budgets.dim();
    let y: Vec<f64> = (0..d)
        .map(|i| tail.iter().map(|v| v[i]).sum::<f64>() / tail.len() as f64)
        .collect();
    let mut report = finish(
        Method::Msbgd,
        spec,
        budgets,
        &last_sample,
        &eval,
        y,
        outcome,
        wall_time,
        config.seed,
    )?;
    report.converged = true;
    Ok(report)
}
