//! Sample-based risk estimators.

use crate::error::{RbError, Result};

fn check_losses(losses: &[f64]) -> Result<()> {
    if losses.is_empty() {
        return Err(RbError::Precondition("empty loss sample".into()));
    }
    if losses.iter().any(|l| !l.is_finite()) {
        return Err(RbError::Precondition("non-finite loss in sample".into()));
    }
    Ok(())
}

/// The `k`-th smallest value (0-based) of `values`, reordering the slice.
pub(crate) fn order_statistic(values: &mut [f64], k: usize) -> f64 {
    let (_, v, _) = values.select_nth_unstable_by(k, f64::total_cmp);
    *v
}

/// Index (0-based) of the order statistic minimising the sample
/// Rockafellar-Uryasev function at level `alpha`: `ceil(n alpha) - 1`.
pub(crate) fn ru_order_index(n: usize, alpha: f64) -> usize {
    let k = (n as f64 * alpha).ceil() as usize;
    k.clamp(1, n) - 1
}

/// Linear-interpolation quantile, `h = (n - 1) alpha + 1` with 1-based order statistics.
pub fn empirical_var_method7(losses: &[f64], alpha: f64) -> Result<f64> {
    check_losses(losses)?;
    if !(0.0..=1.0).contains(&alpha) {
        return Err(RbError::Precondition(format!(
            "quantile level {alpha} outside [0,1]"
        )));
    }
    let n = losses.len();
    let h = (n - 1) as f64 * alpha + 1.0;
    let lo = (h.floor() as usize).clamp(1, n);
    let frac = h - lo as f64;
    let mut work = losses.to_vec();
    let x_lo = order_statistic(&mut work, lo - 1);
    if lo == n || frac == 0.0 {
        return Ok(x_lo);
    }
    // After selection everything right of `lo - 1` is >= x_lo; the next order statistic is their minimum.
    let x_hi = work[lo..].iter().copied().fold(f64::INFINITY, f64::min);
    Ok(x_lo + frac * (x_hi - x_lo))
}

/// Mean of the losses at or above the method-7 quantile.
pub fn empirical_es(losses: &[f64], alpha: f64) -> Result<f64> {
    let q = empirical_var_method7(losses, alpha)?;
    let (sum, count) = losses
        .iter()
        .filter(|&&l| l >= q)
        .fold((0.0, 0usize), |(s, c), &l| (s + l, c + 1));
    if count == 0 {
        return Err(RbError::Numeric(format!("empty tail above quantile {q}")));
    }
    Ok(sum / count as f64)
}

pub fn sample_mean(losses: &[f64]) -> f64 {
    losses.iter().sum::<f64>() / losses.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_to_ten() -> Vec<f64> {
        (1..=10).map(f64::from).collect()
    }

    #[test]
    fn method7_examples() {
        let x = one_to_ten();
        assert!((empirical_var_method7(&x, 0.8).unwrap() - 8.2).abs() < 1e-12);
        assert_eq!(empirical_var_method7(&x, 0.0).unwrap(), 1.0);
        assert_eq!(empirical_var_method7(&x, 1.0).unwrap(), 10.0);
        let c = vec![3.5; 7];
        for a in [0.0, 0.3, 0.99, 1.0] {
            assert_eq!(empirical_var_method7(&c, a).unwrap(), 3.5);
        }
    }

    #[test]
    fn method7_matches_full_sort() {
        let x = vec![0.3, -1.2, 4.4, 2.0, 2.0, 9.1, -0.5, 7.7, 1.1];
        let mut sorted = x.clone();
        sorted.sort_by(f64::total_cmp);
        for a in [0.05, 0.25, 0.5, 0.61, 0.9] {
            let h = (x.len() - 1) as f64 * a;
            let i = h.floor() as usize;
            let expected =
                sorted[i] + (h - i as f64) * (sorted[(i + 1).min(x.len() - 1)] - sorted[i]);
            assert!((empirical_var_method7(&x, a).unwrap() - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn es_examples() {
        let x = one_to_ten();
        assert!((empirical_es(&x, 0.8).unwrap() - 9.5).abs() < 1e-12);
        assert!((empirical_es(&x, 0.0).unwrap() - 5.5).abs() < 1e-12);
        assert_eq!(empirical_es(&[2.0; 5], 0.9).unwrap(), 2.0);
    }

    #[test]
    fn rejects_empty() {
        assert!(empirical_var_method7(&[], 0.5).is_err());
        assert!(empirical_es(&[], 0.5).is_err());
        assert!(empirical_var_method7(&[1.0], 1.5).is_err());
    }

    #[test]
    fn ru_index() {
        assert_eq!(ru_order_index(10, 0.8), 7);
        assert_eq!(ru_order_index(10, 0.0), 0);
        assert_eq!(ru_order_index(10, 1.0), 9);
        assert_eq!(ru_order_index(10, 0.55), 5);
    }
}
