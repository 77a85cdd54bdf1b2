//! Budgets, weights and raw allocations, plus the Euler risk-decomposition audit.

use serde::{Deserialize, Serialize};

use crate::error::{RbError, Result};

/// Admissible drift of a simplex vector's sum away from one.
pub const SIMPLEX_TOL: f64 = 1e-12;

fn check_positive(values: &[f64], what: &str) -> Result<()> {
    if values.is_empty() {
        return Err(RbError::InvalidAllocation(format!("{what} is empty")));
    }
    if let Some((i, v)) = values
        .iter()
        .enumerate()
        .find(|(_, v)| !v.is_finite() || **v <= 0.0)
    {
        return Err(RbError::InvalidAllocation(format!(
            "{what} component {i} is {v}, expected a finite positive value"
        )));
    }
    Ok(())
}

fn check_unit_sum(values: &[f64], what: &str) -> Result<()> {
    let sum: f64 = values.iter().sum();
    if (sum - 1.0).abs() > SIMPLEX_TOL {
        return Err(RbError::InvalidAllocation(format!(
            "{what} sum to {sum:.15}, expected 1 within {SIMPLEX_TOL:e}"
        )));
    }
    Ok(())
}

/// Risk budgets: a point of the open simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Budgets(Vec<f64>);

impl Budgets {
    pub fn new(b: Vec<f64>) -> Result<Self> {
        check_positive(&b, "budgets").map_err(|e| RbError::InvalidBudgets(e.to_string()))?;
        check_unit_sum(&b, "budgets").map_err(|e| RbError::InvalidBudgets(e.to_string()))?;
        Ok(Self(b))
    }

    /// Equal risk contribution budgets `1/d`.
    pub fn equal(d: usize) -> Self {
        Self(vec![1.0 / d as f64; d])
    }

    /// Renormalises arbitrary positive scores into budgets.
    pub fn from_scores(scores: &[f64]) -> Result<Self> {
        check_positive(scores, "budget scores")
            .map_err(|e| RbError::InvalidBudgets(e.to_string()))?;
        let total: f64 = scores.iter().sum();
        Self::new(scores.iter().map(|s| s / total).collect())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// `-sum_i b_i log y_i`
    pub fn log_barrier(&self, y: &[f64]) -> f64 {
        -self.0.iter().zip(y).map(|(b, y)| b * y.ln()).sum::<f64>()
    }
}

impl TryFrom<Vec<f64>> for Budgets {
    type Error = RbError;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<Budgets> for Vec<f64> {
    fn from(b: Budgets) -> Self {
        b.0
    }
}

impl AsRef<[f64]> for Budgets {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Long-only portfolio weights in the open simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Weights(Vec<f64>);

impl Weights {
    /// Validates without repairing: inputs off the simplex by more than
    /// [`SIMPLEX_TOL`] are rejected.
    pub fn new(theta: Vec<f64>) -> Result<Self> {
        check_positive(&theta, "weights")?;
        check_unit_sum(&theta, "weights")?;
        Ok(Self(theta))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl TryFrom<Vec<f64>> for Weights {
    type Error = RbError;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<Weights> for Vec<f64> {
    fn from(w: Weights) -> Self {
        w.0
    }
}

impl AsRef<[f64]> for Weights {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Unnormalised allocation in the open positive orthant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct RawAllocation(Vec<f64>);

impl RawAllocation {
    pub fn new(y: Vec<f64>) -> Result<Self> {
        check_positive(&y, "allocation")?;
        Ok(Self(y))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl TryFrom<Vec<f64>> for RawAllocation {
    type Error = RbError;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<RawAllocation> for Vec<f64> {
    fn from(y: RawAllocation) -> Self {
        y.0
    }
}

impl From<Weights> for RawAllocation {
    fn from(w: Weights) -> Self {
        Self(w.0)
    }
}

impl AsRef<[f64]> for RawAllocation {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Maps a raw allocation onto the simplex, `y / sum(y)`.
///
/// A vector already summing to one up to rounding is returned bit-for-bit,
/// which makes the map exactly idempotent.
pub fn normalize(y: &RawAllocation) -> Weights {
    let sum: f64 = y.0.iter().sum();
    if (sum - 1.0).abs() <= y.0.len() as f64 * f64::EPSILON {
        return Weights(y.0.clone());
    }
    Weights(y.0.iter().map(|v| v / sum).collect())
}

/// `100 * ||a - b||_1`, the accuracy metric used throughout the benchmarks.
pub fn l1_accuracy(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(RbError::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(100.0 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>())
}

/// Euler decomposition `R(theta) = sum_i theta_i d_i R(theta)` and the gap to the budgets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskContributionReport {
    pub contributions: Vec<f64>,
    pub total_risk: f64,
    /// `theta_i d_i R - b_i R`, absolute.
    pub budget_errors: Vec<f64>,
}

impl RiskContributionReport {
    /// `|sum_i contributions_i - R|`
    pub fn euler_residual(&self) -> f64 {
        (self.contributions.iter().sum::<f64>() - self.total_risk).abs()
    }

    /// `max_i |theta_i d_i R - b_i R| / R`
    pub fn max_relative_budget_error(&self) -> f64 {
        self.budget_errors
            .iter()
            .map(|e| e.abs())
            .fold(0.0, f64::max)
            / self.total_risk.abs()
    }
}

/// Audits `theta` against `budgets` using caller-supplied risk and gradient evaluators.
pub fn euler_audit<R, G>(
    theta: &Weights,
    risk_fn: R,
    grad_fn: G,
    budgets: &Budgets,
) -> Result<RiskContributionReport>
where
    R: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    if theta.dim() != budgets.dim() {
        return Err(RbError::DimensionMismatch {
            expected: budgets.dim(),
            found: theta.dim(),
        });
    }
    let total_risk = risk_fn(theta.as_slice());
    if !total_risk.is_finite() {
        return Err(RbError::Numeric(format!("risk is {total_risk} at theta")));
    }
    let grad = grad_fn(theta.as_slice());
    if grad.len() != theta.dim() {
        return Err(RbError::DimensionMismatch {
            expected: theta.dim(),
            found: grad.len(),
        });
    }
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(RbError::Numeric("non-finite risk gradient".into()));
    }
    let contributions: Vec<f64> = theta
        .as_slice()
        .iter()
        .zip(&grad)
        .map(|(t, g)| t * g)
        .collect();
    let budget_errors = contributions
        .iter()
        .zip(budgets.as_slice())
        .map(|(c, b)| c - b * total_risk)
        .collect();
    Ok(RiskContributionReport {
        contributions,
        total_risk,
        budget_errors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn raw(v: &[f64]) -> RawAllocation {
        RawAllocation::new(v.to_vec()).unwrap()
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(
            normalize(&raw(&[2.0, 2.0, 2.0, 2.0])).as_slice(),
            &[0.25; 4]
        );
        assert_eq!(normalize(&raw(&[1.0, 3.0])).as_slice(), &[0.25, 0.75]);
    }

    #[test]
    fn normalize_rejects_bad_components() {
        assert!(RawAllocation::new(vec![1.0, 0.0]).is_err());
        assert!(RawAllocation::new(vec![1.0, -2.0]).is_err());
        assert!(RawAllocation::new(vec![1.0, f64::NAN]).is_err());
        assert!(RawAllocation::new(vec![]).is_err());
    }

    #[test]
    fn weights_reject_off_simplex() {
        assert!(Weights::new(vec![0.5, 0.5 + 1e-9]).is_err());
        assert!(Weights::new(vec![0.5, 0.5]).is_ok());
        assert!(Budgets::new(vec![0.3, 0.3]).is_err());
    }

    #[test]
    fn l1_examples() {
        assert_eq!(l1_accuracy(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 0.0);
        assert_eq!(l1_accuracy(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 200.0);
        assert!(l1_accuracy(&[1.0], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn l1_between_published_tables() {
        let reference = [0.17958, 0.28127, 0.30483, 0.23432];
        let sgd = [0.17954, 0.28165, 0.30449, 0.23432];
        let acc = l1_accuracy(&reference, &sgd).unwrap();
        // printed weights are rounded; the published deviation column sums to 0.078
        assert!((acc - 0.076).abs() < 1e-9, "{acc}");
        let deviations: f64 = [0.00005, 0.00038, 0.00034, 0.00001].iter().sum();
        assert!((100.0 * deviations - 0.078).abs() < 1e-12);
    }

    #[test]
    fn audit_symmetric_volatility() {
        let theta = Weights::new(vec![0.5, 0.5]).unwrap();
        let b = Budgets::equal(2);
        let risk = |y: &[f64]| (y[0] * y[0] + y[1] * y[1]).sqrt();
        let grad = |y: &[f64]| {
            let r = (y[0] * y[0] + y[1] * y[1]).sqrt();
            vec![y[0] / r, y[1] / r]
        };
        let report = euler_audit(&theta, risk, grad, &b).unwrap();
        assert!(report.budget_errors.iter().all(|e| e.abs() < 1e-15));
        assert!(report.euler_residual() < 1e-15);
    }

    #[test]
    fn audit_rejects_non_finite_gradient() {
        let theta = Weights::new(vec![0.5, 0.5]).unwrap();
        let err = euler_audit(&theta, |_| 1.0, |_| vec![f64::NAN, 0.0], &Budgets::equal(2));
        assert!(matches!(err, Err(RbError::Numeric(_))));
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(v in prop::collection::vec(1e-3f64..1e3, 1..12)) {
            let w = normalize(&raw(&v));
            let again = normalize(&RawAllocation::from(w.clone()));
            prop_assert_eq!(w.as_slice(), again.as_slice());
            prop_assert!((w.as_slice().iter().sum::<f64>() - 1.0).abs() <= SIMPLEX_TOL);
        }

        #[test]
        fn normalize_is_scale_free(v in prop::collection::vec(1e-3f64..1e3, 1..12), lambda in 1e-4f64..1e4) {
            let w = normalize(&raw(&v));
            let scaled: Vec<f64> = v.iter().map(|x| x * lambda).collect();
            let ws = normalize(&raw(&scaled));
            for (a, b) in w.as_slice().iter().zip(ws.as_slice()) {
                prop_assert!((a - b).abs() <= 1e-14);
            }
        }

        #[test]
        fn euler_residual_for_quadratic_form(
            raw_theta in prop::collection::vec(0.05f64..1.0, 3),
            diag in prop::collection::vec(0.5f64..2.0, 3),
            rho in -0.3f64..0.6,
        ) {
            let theta = normalize(&raw(&raw_theta));
            let sigma = [
                [diag[0], rho, 0.1],
                [rho, diag[1], rho * 0.5],
                [0.1, rho * 0.5, diag[2]],
            ];
            let quad = |y: &[f64]| -> f64 {
                (0..3).map(|i| (0..3).map(|j| y[i] * sigma[i][j] * y[j]).sum::<f64>()).sum()
            };
            let risk = |y: &[f64]| quad(y).sqrt();
            let grad = |y: &[f64]| {
                let r = quad(y).sqrt();
                (0..3).map(|i| (0..3).map(|j| sigma[i][j] * y[j]).sum::<f64>() / r).collect()
            };
            let report = euler_audit(&theta, risk, grad, &Budgets::equal(3)).unwrap();
            prop_assert!(report.euler_residual() < 1e-10);
        }
    }
}
