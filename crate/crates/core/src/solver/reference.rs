//! Deterministic solve of the exact risk budgeting problem under a model.

use std::time::Instant;

use super::config::{Method, SolverConfig};
use super::exact::ExactRisk;
use super::report::SolveReport;
use super::start::{ray_start, start_direction};
use crate::allocation::{normalize, Budgets, RawAllocation};
use crate::error::{RbError, Result};
use crate::models::ReturnModel;
use crate::risk::{positivity_warnings, RiskMeasureSpec, ZetaState};

const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimises `g(R(y)) - sum_i b_i ln y_i` with exact risk values until the
/// gradient sup-norm falls below `stop_tol`.
///
/// Iterates live in `u = ln y`, which keeps them positive; steps are
/// Barzilai-Borwein proposals accepted under an Armijo condition, so the
/// objective trace is non-increasing.
pub fn reference_solve(
    spec: &RiskMeasureSpec,
    budgets: &Budgets,
    model: &ReturnModel,
    config: &SolverConfig,
) -> Result<SolveReport> {
    config.validate()?;
    let exact = ExactRisk::new(spec, model)?;
    if exact.dim() != budgets.dim() {
        return Err(RbError::DimensionMismatch {
            expected: budgets.dim(),
            found: exact.dim(),
        });
    }
    let started = Instant::now();
    let direction = start_direction(config.initial_point.as_deref(), budgets)?;
    let mut y = ray_start(&direction, exact.exponent(), |w| exact.risk(w))?;
    let mut f = exact.gamma(budgets, &y)?;
    let mut gy = exact.gamma_gradient(budgets, &y)?;
    let mut trace = vec![(0, f)];
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    let sup = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let max_iters = config.iteration_cap();
    let mut iterations = 0;
    let mut converged = sup(&gy) < config.stop_tol;

    while !converged {
        if iterations >= max_iters {
            return Err(RbError::NonConvergence {
                iterations,
                grad_norm: sup(&gy),
                trace,
            });
        }
        iterations += 1;
        let u: Vec<f64> = y.iter().map(|v| v.ln()).collect();
        let gu: Vec<f64> = gy.iter().zip(&y).map(|(g, v)| g * v).collect();
        let fallback = 0.1 / sup(&gu).max(f64::MIN_POSITIVE);
        let mut step = match &prev {
            Some((up, gp)) => {
                let s: Vec<f64> = u.iter().zip(up).map(|(a, b)| a - b).collect();
                let r: Vec<f64> = gu.iter().zip(gp).map(|(a, b)| a - b).collect();
                let sr = dot(&s, &r);
                let bb = dot(&s, &s) / sr;
                if sr > 0.0 && bb.is_finite() {
                    bb
                } else {
                    fallback
                }
            }
            None => fallback,
        };
        let slope = dot(&gu, &gu);
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let candidate: Vec<f64> = u
                .iter()
                .zip(&gu)
                .map(|(a, g)| (a - step * g).exp())
                .collect();
            if let Ok(fc) = exact.gamma(budgets, &candidate) {
                if fc.is_finite() && fc <= f - ARMIJO * step * slope {
                    accepted = Some((candidate, fc));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((next, f_next)) = accepted else {
            return Err(RbError::NonConvergence {
                iterations,
                grad_norm: sup(&gy),
                trace,
            });
        };
        prev = Some((u, gu));
        y = next;
        f = f_next;
        gy = exact.gamma_gradient(budgets, &y)?;
        trace.push((iterations, f));
        converged = sup(&gy) < config.stop_tol;
    }
    let wall_time = started.elapsed().as_secs_f64();

    let zeta = match &exact {
        ExactRisk::Volatility(_) => vec![model.mixture().loss_distribution(&y).mean()],
        ExactRisk::Tail { .. } => exact.zeta(&y)?,
    };
    let raw = RawAllocation::new(y)?;
    let weights = normalize(&raw);
    let contributions = exact.audit(&weights, budgets)?;
    let warnings = positivity_warnings(spec, budgets.dim(), |w| exact.risk(w))?;
    Ok(SolveReport {
        method: Method::Reference,
        measure: spec.label(),
        weights,
        raw,
        zeta: ZetaState::new(zeta)?,
        contributions,
        objective_trace: trace,
        wall_time: Some(wall_time),
        iterations,
        converged,
        seed: config.seed,
        warnings,
    })
}
