mod common;

use common::*;
use nalgebra::DVector;
use rand::Rng;
use riskbudget::models::StudentTMixture;
use riskbudget::risk::{
    empirical_es, empirical_var_method7, es_tmix, spectral_grid, var_tmix, LossObjective,
    RiskMeasureSpec,
};
use riskbudget::RawAllocation;

fn ru_value(losses: &[f64], zeta: f64, alpha: f64) -> f64 {
    zeta + losses.iter().map(|l| (l - zeta).max(0.0)).sum::<f64>()
        / (losses.len() as f64 * (1.0 - alpha))
}

pub fn discrete_quantile_and_tail_mean() {
    let losses: Vec<f64> = (1..=10).map(f64::from).collect();
    assert!((empirical_var_method7(&losses, 0.8).unwrap() - 8.2).abs() < 1e-12);
    assert!((empirical_es(&losses, 0.8).unwrap() - 9.5).abs() < 1e-12);
}

pub fn discrete_ru_minimum_has_flat_band() {
    let losses: Vec<f64> = (1..=10).map(f64::from).collect();
    let grid: Vec<f64> = (0..=11_000).map(|i| i as f64 * 1e-3).collect();
    let values: Vec<f64> = grid.iter().map(|&z| ru_value(&losses, z, 0.8)).collect();
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    assert!((min - 9.5).abs() < 1e-12);
    let band: Vec<f64> = grid
        .iter()
        .zip(&values)
        .filter(|(_, v)| (*v - min).abs() < 1e-9)
        .map(|(z, _)| *z)
        .collect();
    assert!((band[0] - 8.0).abs() < 1e-9 && (band[band.len() - 1] - 9.0).abs() < 1e-9);

    let objective = LossObjective::from_spec(&RiskMeasureSpec::es(0.8)).unwrap();
    let (zeta, value) = objective.minimize_zeta(&losses).unwrap();
    assert!((value - 9.5).abs() < 1e-12);
    assert!((8.0..=9.0).contains(&zeta[0]));
}

pub fn ru_quadrature_matches_closed_form_for_single_t() {
    let mut r = rng(11);
    for _ in 0..20 {
        let d = 3;
        let mu = DVector::from_fn(d, |_, _| r.random_range(-0.2..0.2));
        let sigma = random_spd(d, &mut r);
        let model =
            StudentTMixture::new(vec![1.0], vec![mu.clone()], vec![sigma.clone()], vec![4.0])
                .unwrap();
        let y = random_positive(d, &mut r, 0.5, 1.5);
        let alpha = r.random_range(0.9..0.995);

        let yv = DVector::from_column_slice(&y);
        let m = -yv.dot(&mu);
        let s = (yv.transpose() * &sigma * &yv)[(0, 0)].sqrt();
        // RU: zeta + s E[(T - u)_+] / (1 - alpha) with u = (zeta - m) / s; stationary where sf(u) = 1 - alpha.
        let u_star = bisect(|u| (1.0 - alpha) - t4_sf(u), 0.0, 50.0, 1e-13);
        let zeta = m + s * u_star;
        let minimum = zeta + s * t4_stop_loss(u_star) / (1.0 - alpha);
        // The stationary point is the minimum: nearby values are larger.
        for dz in [-1e-3, 1e-3] {
            let z = zeta + dz;
            let u = (z - m) / s;
            assert!(z + s * t4_stop_loss(u) / (1.0 - alpha) > minimum);
        }

        let raw = RawAllocation::new(y).unwrap();
        let es = es_tmix(&model, &raw, alpha).unwrap();
        let var = var_tmix(&model, &raw, alpha).unwrap();
        assert!(
            (es - minimum).abs() < 1e-6,
            "ES {es} vs RU minimum {minimum}"
        );
        assert!(
            (var - zeta).abs() < 1e-6,
            "VaR {var} vs RU minimiser {zeta}"
        );
    }
}

/// The minimum over a vector of thresholds separates by level; each level's
/// minimum is found by scanning the candidate thresholds at the sample points.
pub fn spectral_minimum_matches_per_node_scan() {
    let mut r = rng(5);
    for subtract_mean in [false, true] {
        let spec = RiskMeasureSpec::Spectral {
            c: 0.2,
            nodes: 8,
            subtract_mean,
        };
        let grid = spectral_grid(&spec).unwrap();
        let losses: Vec<f64> = (0..400)
            .map(|_| r.random_range(-1.0..1.0f64).powi(3) * 2.0)
            .collect();
        let mean = losses.iter().sum::<f64>() / losses.len() as f64;
        let scan: f64 = grid
            .levels()
            .iter()
            .zip(grid.coeff())
            .map(|(&s, &c)| {
                c * losses
                    .iter()
                    .map(|&z| ru_value(&losses, z, s))
                    .fold(f64::INFINITY, f64::min)
            })
            .sum::<f64>()
            - if subtract_mean { mean } else { 0.0 };
        let objective = LossObjective::from_spec(&spec).unwrap();
        let (_, value) = objective.minimize_zeta(&losses).unwrap();
        assert!((value - scan).abs() < 1e-12, "{value} vs scan {scan}");
    }
}

#[cfg(test)]
mod tests {
    #[test]
    fn discrete_quantile_and_tail_mean() {
        super::discrete_quantile_and_tail_mean();
    }

    #[test]
    fn discrete_ru_minimum_has_flat_band() {
        super::discrete_ru_minimum_has_flat_band();
    }

    #[test]
    fn ru_quadrature_matches_closed_form_for_single_t() {
        super::ru_quadrature_matches_closed_form_for_single_t();
    }

    #[test]
    fn spectral_minimum_matches_per_node_scan() {
        super::spectral_minimum_matches_per_node_scan();
    }
}
