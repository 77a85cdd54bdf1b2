//! Risk and risk gradients on a fixed return sample.

use crate::allocation::{euler_audit, Budgets, RiskContributionReport, Weights};
use crate::error::{RbError, Result};
use crate::models::{portfolio_losses, RowSource};
use crate::risk::{empirical_var_method7, RiskMeasureSpec, SampleRisk};

/// Sample risk at `y` and its gradient.
///
/// ES terms differentiate the tail mean over the fixed tail set; the other
/// families differentiate the stochastic form at its exact inner minimiser.
/// Either way the gradient satisfies `y' grad = R(y)`.
pub fn sample_risk_and_gradient<S: RowSource + ?Sized>(
    eval: &SampleRisk,
    sample: &S,
    y: &[f64],
) -> Result<(f64, Vec<f64>)> {
    if sample.dim() != y.len() {
        return Err(RbError::DimensionMismatch {
            expected: sample.dim(),
            found: y.len(),
        });
    }
    let d = y.len();
    let losses = portfolio_losses(sample, y);
    let n = losses.len() as f64;
    let column_means = |weights: &dyn Fn(usize) -> f64| -> Vec<f64> {
        let mut g = vec![0.0; d];
        for j in 0..losses.len() {
            let w = weights(j);
            if w != 0.0 {
                for (gi, x) in g.iter_mut().zip(sample.row(j)) {
                    *gi -= w * x;
                }
            }
        }
        g
    };
    let tail = |alpha: f64| -> Result<(f64, Vec<f64>)> {
        let q = empirical_var_method7(&losses, alpha)?;
        let count = losses.iter().filter(|&&l| l >= q).count() as f64;
        let value = losses.iter().filter(|&&l| l >= q).sum::<f64>() / count;
        let g = column_means(&|j| if losses[j] >= q { 1.0 / count } else { 0.0 });
        Ok((value, g))
    };
    match *eval.spec() {
        RiskMeasureSpec::ExpectedShortfall { alpha } => tail(alpha),
        RiskMeasureSpec::EsMeanMixture { beta, delta, alpha } => {
            let (es, ges) = tail(alpha)?;
            let gm = column_means(&|_| 1.0 / n);
            let mean = losses.iter().sum::<f64>() / n;
            Ok((
                beta * es + delta * mean,
                ges.iter()
                    .zip(&gm)
                    .map(|(a, b)| beta * a + delta * b)
                    .collect(),
            ))
        }
        _ => {
            let obj = eval.objective();
            let (zeta, h) = obj.minimize_zeta(&losses)?;
            let mut dl = vec![0.0; losses.len()];
            let mut dz = vec![0.0; obj.zeta_len()];
            obj.value_and_grad(&losses, &zeta, &mut dl, &mut dz);
            // Samples tied with a threshold sit on a kink. Giving them the
            // fractional weight that zeroes the threshold derivative selects
            // the subgradient for which Euler's identity holds exactly.
            for (k, &z) in zeta.iter().enumerate() {
                let ties: Vec<usize> = (0..losses.len()).filter(|&j| losses[j] == z).collect();
                if !ties.is_empty() && dz[k] != 0.0 {
                    let share = n * dz[k] / ties.len() as f64;
                    for j in ties {
                        dl[j] += share;
                    }
                }
            }
            let gh = column_means(&|j| dl[j] / n);
            let q = obj.exponent();
            let r = obj.risk_from_value(h)?;
            let outer = if q == 1.0 {
                1.0
            } else {
                h.powf(1.0 / q - 1.0) / q
            };
            Ok((r, gh.iter().map(|g| outer * g).collect()))
        }
    }
}

/// Euler audit of `theta` on a sample, using [`sample_risk_and_gradient`].
pub fn sample_audit<S: RowSource + ?Sized>(
    spec: &RiskMeasureSpec,
    sample: &S,
    theta: &Weights,
    budgets: &Budgets,
) -> Result<RiskContributionReport> {
    let eval = SampleRisk::new(spec)?;
    let (risk, grad) = sample_risk_and_gradient(&eval, sample, theta.as_slice())?;
    euler_audit(theta, |_| risk, |_| grad.clone(), budgets)
}
