//! Exact risk evaluators for the reference solve and model-based audits.

use crate::allocation::{euler_audit, Budgets, RiskContributionReport, Weights};
use crate::error::{RbError, Result};
use crate::models::{Mixture, ReturnModel};
use crate::numeric::central_gradient;
use crate::risk::{LossObjective, RiskMeasureSpec, Volatility};

/// Relative step of the central differences used inside the reference solve.
const SOLVE_FD_REL: f64 = 1e-6;
/// Absolute step on the simplex for Euler audits.
pub const AUDIT_FD_STEP: f64 = 1e-4;

/// A risk measure evaluated in closed form (or by 1-d root finding) under a model.
#[derive(Debug, Clone)]
pub enum ExactRisk {
    /// `sum_k coeff_k ES_{s_k} + mean_weight * E[L]`
    Tail {
        mixture: Mixture,
        levels: Vec<f64>,
        coeff: Vec<f64>,
        mean_weight: f64,
    },
    Volatility(Volatility),
}

impl ExactRisk {
    /// Supported: volatility (any model with finite covariance) and the ES family,
    /// including discretised spectral measures.
    pub fn new(spec: &RiskMeasureSpec, model: &ReturnModel) -> Result<Self> {
        let mixture = model.mixture();
        match spec {
            RiskMeasureSpec::Volatility => {
                Ok(Self::Volatility(Volatility::new(mixture.covariance()?)?))
            }
            RiskMeasureSpec::ExpectedShortfall { .. }
            | RiskMeasureSpec::EsMeanMixture { .. }
            | RiskMeasureSpec::Spectral { .. } => match LossObjective::from_spec(spec)? {
                LossObjective::Tail {
                    levels,
                    coeff,
                    mean_weight,
                } => Ok(Self::Tail {
                    mixture: mixture.clone(),
                    levels,
                    coeff,
                    mean_weight,
                }),
                LossObjective::Deviation { .. } => {
                    unreachable!("tail specs map to tail objectives")
                }
            },
            other => Err(RbError::InvalidSpec(format!(
                "no exact evaluator for {}; use a sample-based solver",
                other.label()
            ))),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Tail { mixture, .. } => mixture.dim(),
            Self::Volatility(v) => v.dim(),
        }
    }

    /// `q` in `g(x) = x^q`.
    pub fn exponent(&self) -> f64 {
        match self {
            Self::Tail { .. } => 1.0,
            Self::Volatility(_) => 2.0,
        }
    }

    pub fn risk(&self, y: &[f64]) -> Result<f64> {
        if y.len() != self.dim() {
            return Err(RbError::DimensionMismatch {
                expected: self.dim(),
                found: y.len(),
            });
        }
        match self {
            Self::Tail {
                mixture,
                levels,
                coeff,
                mean_weight,
            } => {
                let dist = mixture.loss_distribution(y);
                let mut total = mean_weight * dist.mean();
                for (s, c) in levels.iter().zip(coeff) {
                    total += c * dist.expected_shortfall(*s)?;
                }
                Ok(total)
            }
            Self::Volatility(v) => Ok(v.value(y)),
        }
    }

    /// VaR at each tail level, or the loss mean for volatility.
    pub fn zeta(&self, y: &[f64]) -> Result<Vec<f64>> {
        match self {
            Self::Tail {
                mixture, levels, ..
            } => {
                let dist = mixture.loss_distribution(y);
                levels.iter().map(|s| dist.quantile(*s)).collect()
            }
            Self::Volatility(_) => Ok(Vec::new()),
        }
    }

    /// Gradient of `R`: analytic for volatility, central differences with
    /// relative step `h_rel` for tail measures.
    pub fn gradient_with_step(&self, y: &[f64], h_rel: f64) -> Result<Vec<f64>> {
        match self {
            Self::Volatility(v) => Ok(v.value_and_gradient(y)?.1),
            Self::Tail { .. } => {
                let scale = y.iter().sum::<f64>() / y.len() as f64;
                let f = |p: &[f64]| self.risk(p).unwrap_or(f64::NAN);
                let g = central_gradient(f, y, h_rel * scale);
                if g.iter().any(|v| !v.is_finite()) {
                    return Err(RbError::Numeric("non-finite risk gradient".into()));
                }
                Ok(g)
            }
        }
    }

    pub fn gradient(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.gradient_with_step(y, SOLVE_FD_REL)
    }

    /// `g(R(y)) - sum_i b_i ln y_i`
    pub fn gamma(&self, budgets: &Budgets, y: &[f64]) -> Result<f64> {
        let r = self.risk(y)?;
        Ok(r.powf(self.exponent()) + budgets.log_barrier(y))
    }

    /// Gradient of [`ExactRisk::gamma`].
    pub fn gamma_gradient(&self, budgets: &Budgets, y: &[f64]) -> Result<Vec<f64>> {
        let q = self.exponent();
        let outer = if q == 1.0 {
            1.0
        } else {
            q * self.risk(y)?.powf(q - 1.0)
        };
        let g = self.gradient(y)?;
        Ok(g.iter()
            .zip(budgets.as_slice())
            .zip(y)
            .map(|((gi, b), yi)| outer * gi - b / yi)
            .collect())
    }

    /// Euler audit with central differences of step [`AUDIT_FD_STEP`] (analytic for volatility).
    pub fn audit(&self, theta: &Weights, budgets: &Budgets) -> Result<RiskContributionReport> {
        let risk = |w: &[f64]| self.risk(w).unwrap_or(f64::NAN);
        let grad = |w: &[f64]| match self {
            Self::Volatility(v) => v
                .value_and_gradient(w)
                .map(|r| r.1)
                .unwrap_or_else(|_| vec![f64::NAN; w.len()]),
            Self::Tail { .. } => central_gradient(risk, w, AUDIT_FD_STEP),
        };
        euler_audit(theta, risk, grad, budgets)
    }
}

/// Euler audit of `theta` under the exact evaluator of `spec` for `model`.
pub fn exact_audit(
    spec: &RiskMeasureSpec,
    model: &ReturnModel,
    theta: &Weights,
    budgets: &Budgets,
) -> Result<RiskContributionReport> {
    ExactRisk::new(spec, model)?.audit(theta, budgets)
}
