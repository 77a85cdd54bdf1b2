use statrs::function::beta::beta_reg;
use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

use crate::error::{RbError, Result};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard (location 0, scale 1) univariate kernel of an elliptical mixture component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kernel {
    Normal,
    StudentT { dof: f64, log_norm: f64 },
}

impl Kernel {
    pub fn student_t(dof: f64) -> Result<Self> {
        if !(dof.is_finite() && dof > 1.0) {
            return Err(RbError::InvalidModel(format!(
                "degrees of freedom must exceed 1 (finite mean), got {dof}"
            )));
        }
        let log_norm = ln_gamma(0.5 * (dof + 1.0))
            - ln_gamma(0.5 * dof)
            - 0.5 * (dof * std::f64::consts::PI).ln();
        Ok(Kernel::StudentT { dof, log_norm })
    }

    pub fn dof(&self) -> Option<f64> {
        match self {
            Kernel::Normal => None,
            Kernel::StudentT { dof, .. } => Some(*dof),
        }
    }

    pub fn pdf(&self, t: f64) -> f64 {
        match *self {
            Kernel::Normal => INV_SQRT_2PI * (-0.5 * t * t).exp(),
            Kernel::StudentT { dof, log_norm } => {
                (log_norm - 0.5 * (dof + 1.0) * (t * t / dof).ln_1p()).exp()
            }
        }
    }

    pub fn cdf(&self, t: f64) -> f64 {
        match *self {
            Kernel::Normal => 0.5 * erfc(-t / std::f64::consts::SQRT_2),
            Kernel::StudentT { dof, .. } => {
                if t.is_infinite() {
                    return if t > 0.0 { 1.0 } else { 0.0 };
                }
                let tail = 0.5 * beta_reg(0.5 * dof, 0.5, dof / (dof + t * t));
                if t <= 0.0 {
                    tail
                } else {
                    1.0 - tail
                }
            }
        }
    }

    /// Upper tail `1 - F(t)`, accurate far in the right tail.
    pub fn sf(&self, t: f64) -> f64 {
        self.cdf(-t)
    }

    /// `int_t^inf u f(u) du`; for Student-t this is `(nu + t^2) f(t) / (nu - 1)`.
    pub fn upper_first_moment(&self, t: f64) -> f64 {
        match *self {
            Kernel::Normal => self.pdf(t),
            Kernel::StudentT { dof, .. } => (dof + t * t) * self.pdf(t) / (dof - 1.0),
        }
    }

    /// `E[(T - t)_+]` for `T` drawn from the kernel.
    pub fn stop_loss(&self, t: f64) -> f64 {
        self.upper_first_moment(t) - t * self.sf(t)
    }

    /// Variance of the standard kernel, infinite for `nu <= 2`.
    pub fn variance(&self) -> f64 {
        match *self {
            Kernel::Normal => 1.0,
            Kernel::StudentT { dof, .. } if dof > 2.0 => dof / (dof - 2.0),
            Kernel::StudentT { .. } => f64::INFINITY,
        }
    }
}
