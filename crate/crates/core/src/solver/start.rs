use crate::allocation::Budgets;
use crate::error::{RbError, Result};

/// Starting direction: the configured point, or the budgets themselves.
pub(crate) fn start_direction(
    initial_point: Option<&[f64]>,
    budgets: &Budgets,
) -> Result<Vec<f64>> {
    match initial_point {
        Some(p) => {
            if p.len() != budgets.dim() {
                return Err(RbError::DimensionMismatch {
                    expected: budgets.dim(),
                    found: p.len(),
                });
            }
            if p.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                return Err(RbError::InvalidAllocation(
                    "initial point must be strictly positive".into(),
                ));
            }
            Ok(p.to_vec())
        }
        None => Ok(budgets.as_slice().to_vec()),
    }
}

/// Rescales `direction` to `c * direction` with `c = q^{-1/q} / R(direction)`,
/// the minimiser of `(c R)^q - ln c` along the ray.
pub(crate) fn ray_start<F>(direction: &[f64], q: f64, risk: F) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let r = risk(direction)?;
    if !(r > 0.0 && r.is_finite()) {
        return Err(RbError::Precondition(format!(
            "risk of the starting portfolio is {r:e}; risk budgeting needs positive risk for long-only portfolios"
        )));
    }
    let c = q.powf(-1.0 / q) / r;
    Ok(direction.iter().map(|v| c * v).collect())
}
