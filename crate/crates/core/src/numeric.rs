//! Small scalar numerics shared by the risk evaluators and solvers.

use crate::error::{RbError, Result};

/// Central-difference gradient with a per-coordinate step `h`.
pub fn central_gradient<F>(f: F, x: &[f64], h: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let xi = x[i];
            probe[i] = xi + h;
            let up = f(&probe);
            probe[i] = xi - h;
            let down = f(&probe);
            probe[i] = xi;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Widens `[lo, hi]` around its centre until `f` changes sign (f increasing assumed).
pub fn expand_bracket<F>(
    f: &F,
    mut lo: f64,
    mut hi: f64,
    max_doublings: usize,
) -> Result<(f64, f64)>
where
    F: Fn(f64) -> f64,
{
    for _ in 0..=max_doublings {
        let (flo, fhi) = (f(lo), f(hi));
        if flo <= 0.0 && fhi >= 0.0 {
            return Ok((lo, hi));
        }
        let width = hi - lo;
        if flo > 0.0 {
            lo -= width;
        }
        if fhi < 0.0 {
            hi += width;
        }
    }
    Err(RbError::Numeric(format!(
        "root bracket not found after {max_doublings} doublings"
    )))
}

/// Root of an increasing function on a sign-changing bracket, using secant
/// steps (Illinois variant) safeguarded by bisection. Stops when
/// `|f(x)| < ftol` or the bracket collapses to a few ulps.
pub fn increasing_root<F>(f: &F, mut lo: f64, mut hi: f64, ftol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let mut flo = f(lo);
    let mut fhi = f(hi);
    if flo > 0.0 || fhi < 0.0 {
        return Err(RbError::Numeric("bracket does not enclose a root".into()));
    }
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    // side of the last secant update, for the Illinois down-weighting
    let mut last_side = 0i8;
    for _ in 0..400 {
        let width = hi - lo;
        let mut x = lo - flo * width / (fhi - flo);
        let lo_margin = lo + 0.01 * width;
        let hi_margin = hi - 0.01 * width;
        if !x.is_finite() || x <= lo_margin || x >= hi_margin {
            x = 0.5 * (lo + hi);
        }
        let fx = f(x);
        if fx.abs() < ftol {
            return Ok(x);
        }
        if fx < 0.0 {
            lo = x;
            flo = fx;
            if last_side == -1 {
                fhi *= 0.5;
            }
            last_side = -1;
        } else {
            hi = x;
            fhi = fx;
            if last_side == 1 {
                flo *= 0.5;
            }
            last_side = 1;
        }
        if hi - lo <= 4.0 * f64::EPSILON * lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE) {
            return Ok(0.5 * (lo + hi));
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Mean and (n-1) standard deviation; zero deviation for fewer than two points.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// SplitMix64 finaliser; used to derive independent child seeds.
pub fn mix_seed(parts: &[u64]) -> u64 {
    let mut state = 0x9E37_79B9_7F4A_7C15u64;
    for &p in parts {
        state ^= p;
        state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        state = z ^ (z >> 31);
    }
    state
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn root_of_cubic() {
        let f = |x: f64| x * x * x - 2.0;
        let r = increasing_root(&f, 0.0, 3.0, 1e-14).unwrap();
        assert!((r - 2f64.cbrt()).abs() < 1e-12);
    }

    #[test]
    fn bracket_expands_to_far_root() {
        let f = |x: f64| x - 1e6;
        let (lo, hi) = expand_bracket(&f, -1.0, 1.0, 100).unwrap();
        assert!(lo <= 1e6 && hi >= 1e6);
    }

    #[test]
    fn gradients_of_quadratic() {
        let f = |x: &[f64]| x[0] * x[0] + 3.0 * x[1];
        let g = central_gradient(f, &[2.0, 1.0], 1e-5);
        assert!((g[0] - 4.0).abs() < 1e-8 && (g[1] - 3.0).abs() < 1e-8);
    }

    #[test]
    fn seeds_differ() {
        assert_ne!(mix_seed(&[1, 10, 0]), mix_seed(&[1, 10, 1]));
        assert_eq!(mix_seed(&[7, 3]), mix_seed(&[7, 3]));
    }

    #[test]
    fn single_value_has_zero_std() {
        assert_eq!(mean_std(&[3.0]), (3.0, 0.0));
    }
}
