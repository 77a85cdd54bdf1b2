//! Exact risk evaluators for parametric return models.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::allocation::RawAllocation;
use crate::error::{RbError, Result};
use crate::models::{GaussianMixture, Mixture, StudentTMixture};

fn check_dim(mixture: &Mixture, y: &RawAllocation) -> Result<()> {
    if mixture.dim() != y.dim() {
        return Err(RbError::DimensionMismatch {
            expected: mixture.dim(),
            found: y.dim(),
        });
    }
    Ok(())
}

/// VaR of the portfolio loss `-y'X` under any mixture model.
pub fn var_mixture(mixture: &Mixture, y: &RawAllocation, alpha: f64) -> Result<f64> {
    check_dim(mixture, y)?;
    mixture.loss_distribution(y.as_slice()).quantile(alpha)
}

/// ES of the portfolio loss `-y'X` under any mixture model.
pub fn es_mixture(mixture: &Mixture, y: &RawAllocation, alpha: f64) -> Result<f64> {
    check_dim(mixture, y)?;
    mixture
        .loss_distribution(y.as_slice())
        .expected_shortfall(alpha)
}

pub fn var_tmix(model: &StudentTMixture, y: &RawAllocation, alpha: f64) -> Result<f64> {
    var_mixture(model, y, alpha)
}

pub fn es_tmix(model: &StudentTMixture, y: &RawAllocation, alpha: f64) -> Result<f64> {
    es_mixture(model, y, alpha)
}

pub fn var_gmix(model: &GaussianMixture, y: &RawAllocation, alpha: f64) -> Result<f64> {
    var_mixture(model, y, alpha)
}

pub fn es_gmix(model: &GaussianMixture, y: &RawAllocation, alpha: f64) -> Result<f64> {
    es_mixture(model, y, alpha)
}

/// `sqrt(y' Sigma y)` and its gradient for a validated SPD matrix.
#[derive(Debug, Clone)]
pub struct Volatility {
    sigma: DMatrix<f64>,
}

impl Volatility {
    pub fn new(sigma: DMatrix<f64>) -> Result<Self> {
        let d = sigma.nrows();
        if d == 0 || sigma.ncols() != d {
            return Err(RbError::InvalidModel(format!(
                "covariance must be square, got {}x{}",
                sigma.nrows(),
                sigma.ncols()
            )));
        }
        let tol = 1e-12 * sigma.amax().max(1.0);
        if (0..d).any(|i| (0..i).any(|j| (sigma[(i, j)] - sigma[(j, i)]).abs() > tol)) {
            return Err(RbError::InvalidModel("covariance is not symmetric".into()));
        }
        if Cholesky::new(sigma.clone()).is_none() {
            return Err(RbError::InvalidModel(
                "covariance is not positive definite".into(),
            ));
        }
        Ok(Self { sigma })
    }

    pub fn dim(&self) -> usize {
        self.sigma.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn value(&self, y: &[f64]) -> f64 {
        let y = DVector::from_column_slice(y);
        (y.dot(&(&self.sigma * &y))).sqrt()
    }

    pub fn value_and_gradient(&self, y: &[f64]) -> Result<(f64, Vec<f64>)> {
        if y.len() != self.dim() {
            return Err(RbError::DimensionMismatch {
                expected: self.dim(),
                found: y.len(),
            });
        }
        let yv = DVector::from_column_slice(y);
        let sy = &self.sigma * &yv;
        let value = yv.dot(&sy).sqrt();
        if !(value > 0.0 && value.is_finite()) {
            return Err(RbError::Numeric(format!("portfolio volatility {value}")));
        }
        Ok((value, sy.iter().map(|v| v / value).collect()))
    }
}

/// `sqrt(y' Sigma y)` and `Sigma y / sqrt(y' Sigma y)`.
pub fn volatility_value_and_gradient(
    sigma: &DMatrix<f64>,
    y: &RawAllocation,
) -> Result<(f64, Vec<f64>)> {
    Volatility::new(sigma.clone())?.value_and_gradient(y.as_slice())
}
