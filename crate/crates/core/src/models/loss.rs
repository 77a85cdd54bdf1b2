use super::kernel::Kernel;
use crate::error::{RbError, Result};
use crate::numeric::{expand_bracket, increasing_root};

/// Tolerance on `|F(VaR) - alpha|` for the quantile root.
pub const QUANTILE_FTOL: f64 = 1e-12;
const MAX_DOUBLINGS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossPart {
    pub weight: f64,
    pub location: f64,
    pub scale: f64,
    pub kernel: Kernel,
}

/// Univariate location-scale mixture describing a portfolio loss `-y'X`.
#[derive(Debug, Clone, PartialEq)]
pub struct LossDistribution {
    parts: Vec<LossPart>,
}

impl LossDistribution {
    pub fn new(parts: Vec<LossPart>) -> Self {
        Self { parts }
    }

    pub fn parts(&self) -> &[LossPart] {
        &self.parts
    }

    pub fn cdf(&self, z: f64) -> f64 {
        self.parts
            .iter()
            .map(|p| p.weight * p.kernel.cdf((z - p.location) / p.scale))
            .sum()
    }

    pub fn pdf(&self, z: f64) -> f64 {
        self.parts
            .iter()
            .map(|p| p.weight / p.scale * p.kernel.pdf((z - p.location) / p.scale))
            .sum()
    }

    pub fn mean(&self) -> f64 {
        self.parts.iter().map(|p| p.weight * p.location).sum()
    }

    /// `E[(L - zeta)_+]`
    pub fn stop_loss(&self, zeta: f64) -> f64 {
        self.parts
            .iter()
            .map(|p| p.weight * p.scale * p.kernel.stop_loss((zeta - p.location) / p.scale))
            .sum()
    }

    /// The unique root of `F(z) = alpha`.
    pub fn quantile(&self, alpha: f64) -> Result<f64> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(RbError::Precondition(format!(
                "quantile level {alpha} outside (0,1)"
            )));
        }
        let spread = self.parts.iter().map(|p| p.scale).fold(0.0, f64::max);
        if !(spread > 0.0 && spread.is_finite()) {
            return Err(RbError::Numeric(format!("degenerate loss scale {spread}")));
        }
        let lo = self
            .parts
            .iter()
            .map(|p| p.location)
            .fold(f64::INFINITY, f64::min)
            - 10.0 * spread;
        let hi = self
            .parts
            .iter()
            .map(|p| p.location)
            .fold(f64::NEG_INFINITY, f64::max)
            + 10.0 * spread;
        let f = |z: f64| self.cdf(z) - alpha;
        let (lo, hi) = expand_bracket(&f, lo, hi, MAX_DOUBLINGS)?;
        increasing_root(&f, lo, hi, QUANTILE_FTOL)
    }

    /// Expected shortfall via `VaR + E[(L - VaR)_+] / (1 - alpha)`.
    ///
    /// Evaluated at the root this equals the tail-moment closed form; this
    /// arrangement is stationary in the VaR argument, so root error enters
    /// only at second order.
    pub fn expected_shortfall(&self, alpha: f64) -> Result<f64> {
        if let Some(p) = self
            .parts
            .iter()
            .find(|p| matches!(p.kernel, Kernel::StudentT { dof, .. } if dof <= 1.0))
        {
            return Err(RbError::InvalidModel(format!(
                "expected shortfall undefined: degrees of freedom {:?} <= 1",
                p.kernel.dof()
            )));
        }
        let var = self.quantile(alpha)?;
        Ok(var + self.stop_loss(var) / (1.0 - alpha))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(kernel: Kernel, location: f64, scale: f64) -> LossDistribution {
        LossDistribution::new(vec![LossPart {
            weight: 1.0,
            location,
            scale,
            kernel,
        }])
    }

    #[test]
    fn standard_t4_quantile() {
        let l = single(Kernel::student_t(4.0).unwrap(), 0.0, 1.0);
        // independent: closed-form t4 cdf inverted by bisection in f64
        let cdf = |t: f64| 0.5 + t * (t * t + 6.0) / (2.0 * (t * t + 4.0f64).powf(1.5));
        let (mut a, mut b) = (0.0, 10.0);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if cdf(m) < 0.95 {
                a = m
            } else {
                b = m
            }
        }
        let q = l.quantile(0.95).unwrap();
        assert!((q - a).abs() < 1e-11, "{q} vs {a}");
        assert!((q - 2.13185).abs() < 5e-6);
    }

    #[test]
    fn standard_t4_es() {
        let l = single(Kernel::student_t(4.0).unwrap(), 0.0, 1.0);
        let es = l.expected_shortfall(0.95).unwrap();
        // frozen from adaptive quadrature of (1/(1-a)) int_a^1 VaR_s ds
        assert!((es - 3.202_870_402_1).abs() < 1e-9, "{es}");
        // midpoint rule over the quantile function, independent of the tail-moment identity
        let n = 20_000;
        let h = 0.05 / n as f64;
        let integral: f64 = (0..n)
            .map(|i| l.quantile(0.95 + (i as f64 + 0.5) * h).unwrap() * h)
            .sum();
        assert!((integral / 0.05 - es).abs() < 1e-3);
    }

    #[test]
    fn median_of_symmetric_loss_is_location() {
        let l = single(Kernel::student_t(3.0).unwrap(), -0.7, 2.0);
        assert!((l.quantile(0.5).unwrap() + 0.7).abs() < 1e-12);
    }

    #[test]
    fn cdf_limits() {
        let l = single(Kernel::student_t(2.5).unwrap(), 0.1, 0.3);
        assert!(l.cdf(-1e12) < 1e-12);
        assert!((l.cdf(1e12) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_es_closed_form() {
        // N(0,1): ES_a = phi(z_a) / (1 - a)
        let l = single(Kernel::Normal, 0.0, 1.0);
        let z = l.quantile(0.975).unwrap();
        assert!((z - 1.959_963_984_540_054).abs() < 1e-9);
        let phi = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
        assert!((l.expected_shortfall(0.975).unwrap() - phi / 0.025).abs() < 1e-10);
    }

    #[test]
    fn rejects_bad_level() {
        let l = single(Kernel::Normal, 0.0, 1.0);
        assert!(l.quantile(1.0).is_err());
        assert!(l.quantile(0.0).is_err());
    }
}
