//! Mini-batch stochastic (sub)gradient descent on the joint `(y, zeta)` objective.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{Method, SolverConfig};
use super::report::SolveReport;
use super::sample_eval::sample_audit;
use super::start::{ray_start, start_direction};
use crate::allocation::{normalize, Budgets, RawAllocation};
use crate::error::{RbError, Result};
use crate::models::{ReturnSample, RowSource};
use crate::numeric::mix_seed;
use crate::risk::{positivity_warnings, LossObjective, RiskMeasureSpec, SampleRisk, ZetaState};

/// Objective values above this are treated as divergence.
pub const DIVERGENCE_THRESHOLD: f64 = 1e12;
/// SGD also stops once a batch objective exceeds the first one by this
/// multiple of its magnitude (the start is scaled to be near-optimal).
const DIVERGENCE_GROWTH: f64 = 1e6;
/// Rows used to pick the starting point and the preconditioner.
const PILOT_ROWS: usize = 100_000;

/// Iterate snapshot passed to SGD observers.
#[derive(Debug, Clone, Copy)]
pub struct SgdState<'a> {
    pub iteration: usize,
    pub y: &'a [f64],
    pub zeta: &'a [f64],
}

/// Number of SGD updates for `n` rows: `epochs * ceil(n / batch)`.
pub fn sgd_iterations(n: usize, config: &SolverConfig) -> usize {
    config.epochs * n.div_ceil(config.batch_size)
}

pub fn sgd_solve(
    spec: &RiskMeasureSpec,
    budgets: &Budgets,
    sample: &ReturnSample,
    config: &SolverConfig,
) -> Result<SolveReport> {
    sgd_solve_with_observer(spec, budgets, sample, config, |_| {})
}

/// Scaling of the `zeta` updates: the inverse of a secant curvature estimate
/// of the objective in each `zeta` on the pilot losses.
fn zeta_preconditioner(objective: &LossObjective, pilot_losses: &[f64], zeta0: &[f64]) -> Vec<f64> {
    let n = pilot_losses.len() as f64;
    let mean = pilot_losses.iter().sum::<f64>() / n;
    let spread = (pilot_losses.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / n).sqrt();
    let spread = if spread > 0.0 { spread } else { 1.0 };
    let delta = 0.1 * spread;
    let k = objective.zeta_len();
    let shifted = |sign: f64| {
        let z: Vec<f64> = zeta0.iter().map(|z| z + sign * delta).collect();
        let mut dl = vec![0.0; pilot_losses.len()];
        let mut dz = vec![0.0; k];
        objective.value_and_grad(pilot_losses, &z, &mut dl, &mut dz);
        dz
    };
    let (up, down) = (shifted(1.0), shifted(-1.0));
    let curvature: Vec<f64> = up
        .iter()
        .zip(&down)
        .map(|(u, d)| (u - d) / (2.0 * delta))
        .collect();
    let top = curvature.iter().copied().fold(0.0, f64::max);
    curvature
        .iter()
        .map(|&c| {
            let c = if top > 0.0 {
                c.max(1e-6 * top)
            } else {
                1.0 / spread
            };
            1.0 / c
        })
        .collect()
}

/// SGD with an observer called on the starting point and after every update.
pub fn sgd_solve_with_observer<F>(
    spec: &RiskMeasureSpec,
    budgets: &Budgets,
    sample: &ReturnSample,
    config: &SolverConfig,
    mut observer: F,
) -> Result<SolveReport>
where
    F: FnMut(&SgdState),
{
    config.validate()?;
    let objective = LossObjective::from_spec(spec)?;
    let eval = SampleRisk::new(spec)?;
    let d = budgets.dim();
    if sample.dim() != d {
        return Err(RbError::DimensionMismatch {
            expected: d,
            found: sample.dim(),
        });
    }
    let n = sample.len();
    if n < config.batch_size {
        return Err(RbError::Precondition(format!(
            "sample has {n} rows, fewer than the batch size {}",
            config.batch_size
        )));
    }
    let started = Instant::now();

    let pilot = sample.head(n.min(PILOT_ROWS));
    let q = objective.exponent();
    let direction = start_direction(config.initial_point.as_deref(), budgets)?;
    let mut y = ray_start(&direction, q, |w| eval.risk(&pilot.losses(w)))?;
    let pilot_losses = pilot.losses(&y);
    let (mut zeta, _) = objective.minimize_zeta(&pilot_losses)?;
    let pz = zeta_preconditioner(&objective, &pilot_losses, &zeta);
    let floor = 1e-8 * y.iter().sum::<f64>() / d as f64;

    let total = sgd_iterations(n, config);
    let averaged = ((config.averaging_fraction * total as f64).ceil() as usize).clamp(1, total);
    let average_from = total - averaged;
    let stride = total.div_ceil(config.trace_points.max(1)).max(1);

    let mut y_sum = vec![0.0; d];
    let mut zeta_sum = vec![0.0; zeta.len()];
    let mut trace = Vec::new();
    let mut order: Vec<usize> = (0..n).collect();
    let mut losses = vec![0.0; config.batch_size];
    let mut dl = vec![0.0; config.batch_size];
    let mut dz = vec![0.0; zeta.len()];
    let mut gy = vec![0.0; d];
    let b = budgets.as_slice();

    observer(&SgdState {
        iteration: 0,
        y: &y,
        zeta: &zeta,
    });
    let mut start_value: Option<f64> = None;
    let mut k = 0usize;
    for epoch in 0..config.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[config.seed, epoch as u64]));
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            let m = batch.len();
            for (l, &j) in losses.iter_mut().zip(batch) {
                *l = -sample
                    .row(j)
                    .iter()
                    .zip(&y)
                    .map(|(x, w)| x * w)
                    .sum::<f64>();
            }
            let value = objective.value_and_grad(&losses[..m], &zeta, &mut dl[..m], &mut dz)
                + budgets.log_barrier(&y);
            let first = *start_value.get_or_insert(value);
            if !value.is_finite()
                || value > DIVERGENCE_THRESHOLD
                || value - first > DIVERGENCE_GROWTH * (1.0 + first.abs())
            {
                return Err(RbError::Divergence {
                    iteration: k,
                    value,
                });
            }
            if k.is_multiple_of(stride) || k + 1 == total {
                trace.push((k, value));
            }
            gy.iter_mut().for_each(|g| *g = 0.0);
            for (w, &j) in dl[..m].iter().zip(batch) {
                for (g, x) in gy.iter_mut().zip(sample.row(j)) {
                    *g -= w * x;
                }
            }
            let rate = config.step_schedule.rate(k);
            // Allocation steps are scaled by y_i^2 / b_i, the inverse barrier curvature.
            for i in 0..d {
                let g = gy[i] / m as f64 - b[i] / y[i];
                y[i] = (y[i] - rate * y[i] * y[i] / b[i] * g).max(floor);
            }
            for (z, (g, p)) in zeta.iter_mut().zip(dz.iter().zip(&pz)) {
                *z -= rate * p * g;
            }
            k += 1;
            if y.iter().chain(&zeta).any(|v| !v.is_finite()) {
                return Err(RbError::Divergence {
                    iteration: k,
                    value: f64::NAN,
                });
            }
            observer(&SgdState {
                iteration: k,
                y: &y,
                zeta: &zeta,
            });
            if k > average_from {
                y_sum.iter_mut().zip(&y).for_each(|(s, v)| *s += v);
                zeta_sum.iter_mut().zip(&zeta).for_each(|(s, v)| *s += v);
            }
        }
    }
    let count = averaged as f64;
    let y_avg: Vec<f64> = y_sum.iter().map(|s| s / count).collect();
    // The optimum is interior; an average pinned near the floor means the steps overshot.
    if y_avg.iter().any(|&v| v < 10.0 * floor) {
        return Err(RbError::Numeric(
            "SGD allocation collapsed to the positivity floor; reduce the step size".into(),
        ));
    }
    let raw = RawAllocation::new(y_avg)?;
    let zeta = ZetaState::new(zeta_sum.iter().map(|s| s / count).collect())?;
    let wall_time = started.elapsed().as_secs_f64();

    let weights = normalize(&raw);
    let contributions = sample_audit(spec, sample, &weights, budgets)?;
    let warnings = positivity_warnings(spec, d, |w| eval.risk(&pilot.losses(w)))?;
    Ok(SolveReport {
        method: Method::Sgd,
        measure: spec.label(),
        weights,
        raw,
        zeta,
        contributions,
        objective_trace: trace,
        wall_time: Some(wall_time),
        iterations: total,
        converged: true,
        seed: config.seed,
        warnings,
    })
}
