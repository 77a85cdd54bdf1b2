//! Synthetic ground-truth return models standing in for market-calibrated ones.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::mixture::StudentTMixture;
use crate::error::{RbError, Result};

/// Magnitudes of a two-regime (calm / stressed) Student-t mixture of daily returns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DgpSpec {
    /// Range of the calm-regime probability.
    pub weight_range: (f64, f64),
    /// Typical absolute size of daily location parameters.
    pub location_scale: f64,
    /// Typical diagonal entry of the calm scale matrix.
    pub scale_level: f64,
    /// Per-asset volatility multiplier range around `sqrt(scale_level)`.
    pub vol_spread: (f64, f64),
    /// Stressed-regime volatility multiplier range.
    pub stress_vol_multiplier: (f64, f64),
    /// Average pairwise correlation in the calm regime.
    pub calm_correlation: f64,
    /// Average pairwise correlation in the stressed regime.
    pub stress_correlation: f64,
    /// Dispersion of the market loadings around their mean.
    pub loading_dispersion: f64,
    /// Number of extra random factors (the `A'A` part) and their loading size.
    pub extra_factors: usize,
    pub extra_factor_scale: f64,
    /// Minimum idiosyncratic share, the `eps I` part, in correlation units.
    pub ridge: f64,
    pub nu: (f64, f64),
}

impl Default for DgpSpec {
    fn default() -> Self {
        Self {
            weight_range: (0.6, 0.8),
            location_scale: 1e-3,
            scale_level: 1e-4,
            vol_spread: (0.7, 1.6),
            stress_vol_multiplier: (1.0, 2.0),
            calm_correlation: 0.3,
            stress_correlation: 0.5,
            loading_dispersion: 0.25,
            extra_factors: 3,
            extra_factor_scale: 0.15,
            ridge: 1e-3,
            nu: (4.0, 2.5),
        }
    }
}

fn correlation_matrix(rng: &mut ChaCha8Rng, d: usize, avg: f64, spec: &DgpSpec) -> DMatrix<f64> {
    let base = avg.clamp(0.0, 0.95).sqrt();
    let loadings: Vec<f64> = (0..d)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            (base * (1.0 + spec.loading_dispersion * z)).clamp(0.0, 0.97)
        })
        .collect();
    let k = spec.extra_factors;
    let a = DMatrix::from_fn(k, d, |_, _| {
        let z: f64 = StandardNormal.sample(rng);
        spec.extra_factor_scale * z
    });
    let mut m = DMatrix::from_fn(d, d, |i, j| loadings[i] * loadings[j]) + a.transpose() * &a;
    for i in 0..d {
        let common = m[(i, i)];
        m[(i, i)] = common.max(1.0 - spec.ridge) + spec.ridge;
    }
    let sd: Vec<f64> = (0..d).map(|i| m[(i, i)].sqrt()).collect();
    DMatrix::from_fn(d, d, |i, j| {
        if i == j {
            1.0
        } else {
            m[(i, j)] / (sd[i] * sd[j])
        }
    })
}

/// Draws a two-component Student-t mixture of dimension `d`; deterministic per seed.
pub fn synth_dgp(d: usize, seed: u64, spec: &DgpSpec) -> Result<StudentTMixture> {
    if d < 2 {
        return Err(RbError::Precondition(format!(
            "synthetic DGP needs d >= 2, got {d}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = rng.random_range(spec.weight_range.0..=spec.weight_range.1);

    let base_vol = spec.scale_level.sqrt();
    let calm_vol: Vec<f64> = (0..d)
        .map(|_| base_vol * rng.random_range(spec.vol_spread.0..=spec.vol_spread.1))
        .collect();
    let stress_vol: Vec<f64> = calm_vol
        .iter()
        .map(|v| v * rng.random_range(spec.stress_vol_multiplier.0..=spec.stress_vol_multiplier.1))
        .collect();

    let calm_corr = correlation_matrix(&mut rng, d, spec.calm_correlation, spec);
    let stress_corr = correlation_matrix(&mut rng, d, spec.stress_correlation, spec);
    let scale = |vol: &[f64], corr: &DMatrix<f64>| {
        DMatrix::from_fn(d, d, |i, j| vol[i] * corr[(i, j)] * vol[j])
    };

    let loc = spec.location_scale;
    let mu_calm = DVector::from_fn(d, |_, _| loc * rng.random_range(0.0..=2.0));
    let mu_stress = DVector::from_fn(d, |_, _| -loc * rng.random_range(0.5..=2.5));

    StudentTMixture::new(
        vec![p, 1.0 - p],
        vec![mu_calm, mu_stress],
        vec![
            scale(&calm_vol, &calm_corr),
            scale(&stress_vol, &stress_corr),
        ],
        vec![spec.nu.0, spec.nu.1],
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_per_seed() {
        let spec = DgpSpec::default();
        let a = synth_dgp(6, 42, &spec).unwrap();
        let b = synth_dgp(6, 42, &spec).unwrap();
        for (ca, cb) in a.components().iter().zip(b.components()) {
            assert_eq!(ca.weight.to_bits(), cb.weight.to_bits());
            assert_eq!(ca.location, cb.location);
            assert_eq!(ca.scale, cb.scale);
        }
        let c = synth_dgp(6, 43, &spec).unwrap();
        assert_ne!(a.components()[0].location, c.components()[0].location);
    }

    #[test]
    fn realistic_magnitudes() {
        let m = synth_dgp(10, 1, &DgpSpec::default()).unwrap();
        let w = m.weights();
        assert!(w[0] >= 0.6 && w[0] <= 0.8);
        assert_eq!(m.dofs(), vec![4.0, 2.5]);
        let calm = &m.components()[0];
        assert!(calm.location.iter().all(|v| v.abs() <= 2e-3 + 1e-15));
        for i in 0..10 {
            assert!(calm.scale[(i, i)] > 1e-5 && calm.scale[(i, i)] < 1e-3);
        }
    }

    #[test]
    fn rejects_scalar_universe() {
        assert!(synth_dgp(1, 0, &DgpSpec::default()).is_err());
    }
}
