//! Risk budgeting solvers: mini-batch SGD, the finite-difference benchmark
//! descents, and the exact reference solve.

pub mod config;
pub mod descent;
pub mod exact;
pub mod reference;
pub mod report;
pub mod sample_eval;
pub mod sgd;
mod start;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub use config::{Method, SolverConfig, StepSchedule};
pub use descent::{msbgd_solve, osbgd_solve};
pub use exact::{exact_audit, ExactRisk, AUDIT_FD_STEP};
pub use reference::reference_solve;
pub use report::SolveReport;
pub use sample_eval::{sample_audit, sample_risk_and_gradient};
pub use sgd::{sgd_iterations, sgd_solve, sgd_solve_with_observer, SgdState, DIVERGENCE_THRESHOLD};

use crate::allocation::{l1_accuracy, Budgets};
use crate::error::{RbError, Result};
use crate::models::{ReturnModel, ReturnSample};
use crate::numeric::mix_seed;
use crate::risk::RiskMeasureSpec;

/// What a solver works from: a fixed return sample or a parametric model.
#[derive(Debug, Clone, Copy)]
pub enum ProblemData<'a> {
    Sample(&'a ReturnSample),
    Model(&'a ReturnModel),
}

/// Dispatches on `config.method`. Sample-based methods need a sample,
/// MSBGD and the reference solve need a model.
pub fn solve(
    spec: &RiskMeasureSpec,
    budgets: &Budgets,
    data: ProblemData<'_>,
    config: &SolverConfig,
) -> Result<SolveReport> {
    match (config.method, data) {
        (Method::Sgd, ProblemData::Sample(s)) => sgd_solve(spec, budgets, s, config),
        (Method::Osbgd, ProblemData::Sample(s)) => osbgd_solve(spec, budgets, s, config),
        (Method::Msbgd, ProblemData::Model(m)) => msbgd_solve(spec, budgets, m, config),
        (Method::Reference, ProblemData::Model(m)) => reference_solve(spec, budgets, m, config),
        (method, ProblemData::Sample(_)) => Err(RbError::Precondition(format!(
            "{method} needs a return model, not a sample"
        ))),
        (method, ProblemData::Model(_)) => Err(RbError::Precondition(format!(
            "{method} needs a return sample, not a model"
        ))),
    }
}

/// Seeded random starting directions, log-uniform in `[e^-1, e]` per coordinate.
pub fn random_starts(d: usize, starts: usize, seed: u64) -> Vec<Vec<f64>> {
    (0..starts)
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[seed, 0x5747, s as u64]));
            (0..d)
                .map(|_| rng.random_range(-1.0f64..1.0).exp())
                .collect()
        })
        .collect()
}

/// Solves from `starts` random initial points and returns the largest pairwise
/// `100 * ||theta_i - theta_j||_1`.
pub fn multistart_uniqueness_check(
    spec: &RiskMeasureSpec,
    budgets: &Budgets,
    data: ProblemData<'_>,
    config: &SolverConfig,
    starts: usize,
) -> Result<f64> {
    if starts < 2 {
        return Err(RbError::Precondition(format!(
            "uniqueness check needs at least 2 starts, got {starts}"
        )));
    }
    let points = random_starts(budgets.dim(), starts, config.seed);
    let weights: Vec<Vec<f64>> = points
        .into_par_iter()
        .map(|p| {
            let cfg = SolverConfig {
                initial_point: Some(p),
                ..config.clone()
            };
            solve(spec, budgets, data, &cfg).map(|r| r.weights.into_vec())
        })
        .collect::<Result<_>>()?;
    let mut worst = 0.0f64;
    for i in 0..weights.len() {
        for j in i + 1..weights.len() {
            worst = worst.max(l1_accuracy(&weights[i], &weights[j])?);
        }
    }
    Ok(worst)
}
