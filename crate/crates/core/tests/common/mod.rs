#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use riskbudget::models::{ReturnModel, StudentTMixture};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Density of the standard Student-t with 4 degrees of freedom.
pub fn t4_pdf(u: f64) -> f64 {
    0.375 * (1.0 + u * u / 4.0).powf(-2.5)
}

#[allow(clippy::too_many_arguments)]
fn simpson(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
        return left + right + (left + right - whole) / 15.0;
    }
    simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// Adaptive Simpson quadrature on `[a, b]`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let (fa, fb) = (f(a), f(b));
    let fm = f(0.5 * (a + b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson(&f, a, b, fa, fm, fb, whole, tol, 50)
}

/// `int_{u0}^inf g(u) du` through `u = u0 + t / (1 - t)`.
pub fn integrate_upper(g: impl Fn(f64) -> f64, u0: f64, tol: f64) -> f64 {
    let h = |t: f64| {
        if t >= 1.0 {
            return 0.0;
        }
        let u = u0 + t / (1.0 - t);
        g(u) / ((1.0 - t) * (1.0 - t))
    };
    integrate(h, 0.0, 1.0, tol)
}

/// Survival function of t_4 by quadrature of the density.
pub fn t4_sf(u0: f64) -> f64 {
    integrate_upper(t4_pdf, u0, 1e-15)
}

/// `E[(T - u0)_+]` for `T ~ t_4` by quadrature.
pub fn t4_stop_loss(u0: f64) -> f64 {
    integrate_upper(|u| (u - u0) * t4_pdf(u), u0, 1e-15)
}

/// Root of an increasing function by bisection.
pub fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    assert!(f(lo) < 0.0 && f(hi) > 0.0);
    while hi - lo > tol {
        let m = 0.5 * (lo + hi);
        if f(m) < 0.0 {
            lo = m;
        } else {
            hi = m;
        }
    }
    0.5 * (lo + hi)
}

/// Random symmetric positive definite matrix with unit-order eigenvalues.
pub fn random_spd(d: usize, r: &mut ChaCha8Rng) -> DMatrix<f64> {
    let a = DMatrix::from_fn(d, d, |_, _| r.random_range(-1.0..1.0));
    &a * a.transpose() / d as f64 + DMatrix::identity(d, d) * 0.2
}

pub fn random_positive(d: usize, r: &mut ChaCha8Rng, lo: f64, hi: f64) -> Vec<f64> {
    (0..d).map(|_| r.random_range(lo..hi)).collect()
}

/// Two-component Student-t mixture with unit-order parameters.
pub fn random_tmix(d: usize, r: &mut ChaCha8Rng) -> StudentTMixture {
    let p = r.random_range(0.5..0.9);
    let mu = (0..2)
        .map(|_| DVector::from_fn(d, |_, _| r.random_range(-0.3..0.3)))
        .collect();
    let scale = (0..2).map(|_| random_spd(d, r)).collect();
    StudentTMixture::new(vec![p, 1.0 - p], mu, scale, vec![4.0, 3.0]).unwrap()
}

pub fn random_model(d: usize, r: &mut ChaCha8Rng) -> ReturnModel {
    random_tmix(d, r).into()
}

pub fn central_diff(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|i| {
            p[i] = x[i] + h;
            let up = f(&p);
            p[i] = x[i] - h;
            let down = f(&p);
            p[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}
