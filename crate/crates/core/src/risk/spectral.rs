use serde::{Deserialize, Serialize};

use super::spec::RiskMeasureSpec;
use crate::error::{RbError, Result};

/// Upper end of the level grid; the distortion's mass above it is dropped.
pub const SPECTRAL_S_MAX: f64 = 0.999;

/// Discretisation of a spectral measure as a positive mixture of ES levels,
/// `rho_h(Z) ~ sum_k coeff_k ES_{s_k}(Z)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralGrid {
    s: Vec<f64>,
    coeff: Vec<f64>,
}

impl SpectralGrid {
    /// Explicit grid; levels must increase strictly inside `(0,1)` and
    /// weights must be positive and sum to one within `1e-6`.
    pub fn new(s: Vec<f64>, coeff: Vec<f64>) -> Result<Self> {
        if s.is_empty() || s.len() != coeff.len() {
            return Err(RbError::InvalidSpec(format!(
                "spectral grid needs matching non-empty levels and weights ({} vs {})",
                s.len(),
                coeff.len()
            )));
        }
        if s.iter().any(|&v| !(v > 0.0 && v < 1.0)) || s.windows(2).any(|w| w[0] >= w[1]) {
            return Err(RbError::InvalidSpec(
                "spectral levels must increase strictly inside (0,1)".into(),
            ));
        }
        if coeff.iter().any(|&c| !(c > 0.0 && c.is_finite())) {
            return Err(RbError::InvalidSpec(
                "spectral weights must be positive".into(),
            ));
        }
        let total: f64 = coeff.iter().sum();
        if (total - 1.0).abs() > 1e-6 {
            return Err(RbError::InvalidSpec(format!(
                "spectral weights sum to {total}, not 1"
            )));
        }
        Ok(Self { s, coeff })
    }

    pub fn levels(&self) -> &[f64] {
        &self.s
    }

    pub fn coeff(&self) -> &[f64] {
        &self.coeff
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }
}

/// Midpoint rule for `d mu(s) = (1 - s) h'(s) ds` with `h(s) = s^{1/c-1}/c`,
/// on `nodes` equal cells of `(0, SPECTRAL_S_MAX]`, renormalised to total mass one.
pub fn spectral_grid(spec: &RiskMeasureSpec) -> Result<SpectralGrid> {
    let RiskMeasureSpec::Spectral { c, nodes, .. } = *spec else {
        return Err(RbError::InvalidSpec(format!(
            "{} is not a spectral measure",
            spec.label()
        )));
    };
    spec.validate()?;
    let width = SPECTRAL_S_MAX / nodes as f64;
    let s: Vec<f64> = (0..nodes).map(|k| (k as f64 + 0.5) * width).collect();
    let slope = |v: f64| (1.0 / c - 1.0) * v.powf(1.0 / c - 2.0) / c;
    let raw: Vec<f64> = s.iter().map(|&v| (1.0 - v) * slope(v) * width).collect();
    let total: f64 = raw.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(RbError::Numeric(format!(
            "spectral grid mass {total} for c={c}"
        )));
    }
    // Far-left cells can underflow to zero for small c; floor them so every
    // node keeps a strictly positive weight.
    let floor = f64::MIN_POSITIVE.sqrt();
    let coeff: Vec<f64> = raw.iter().map(|r| (r / total).max(floor)).collect();
    let total: f64 = coeff.iter().sum();
    SpectralGrid::new(s, coeff.into_iter().map(|v| v / total).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_node() {
        let g = spectral_grid(&RiskMeasureSpec::Spectral {
            c: 0.3,
            nodes: 1,
            subtract_mean: false,
        })
        .unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!(g.coeff(), &[1.0]);
        assert!((g.levels()[0] - SPECTRAL_S_MAX / 2.0).abs() < 1e-15);
    }

    #[test]
    fn c_one_rejected() {
        assert!(spectral_grid(&RiskMeasureSpec::spectral(1.0, false)).is_err());
        assert!(spectral_grid(&RiskMeasureSpec::es(0.9)).is_err());
    }

    #[test]
    fn weights_follow_tail_density() {
        let c = 0.05;
        let g = spectral_grid(&RiskMeasureSpec::spectral(c, false)).unwrap();
        assert_eq!(g.len(), 20);
        assert!((g.coeff().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        // (1 - s) s^{1/c - 2} peaks at s = (1/c - 2) / (1/c - 1); weights rise up to there.
        let mode = (1.0 / c - 2.0) / (1.0 / c - 1.0);
        let rising: Vec<f64> = g
            .levels()
            .iter()
            .zip(g.coeff())
            .filter(|(s, _)| **s < mode)
            .map(|(_, w)| *w)
            .collect();
        assert!(rising.len() >= 18);
        assert!(rising.windows(2).all(|w| w[0] < w[1]));
        // Most of the mass sits in the deep tail.
        let tail: f64 = g
            .levels()
            .iter()
            .zip(g.coeff())
            .filter(|(s, _)| **s > 0.8)
            .map(|(_, w)| w)
            .sum();
        assert!(tail > 0.8);
    }
}
