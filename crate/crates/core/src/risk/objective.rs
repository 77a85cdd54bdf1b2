//! Stochastic objectives `E[h(L, zeta)] - sum_i b_i ln y_i` over the loss `L = -y'X`,
//! whose minimum over `zeta` is `g(R(y))` up to the barrier.

use serde::{Deserialize, Serialize};

use super::empirical::{order_statistic, ru_order_index, sample_mean};
use super::spec::RiskMeasureSpec;
use super::spectral::{spectral_grid, SpectralGrid};
use crate::allocation::Budgets;
use crate::error::{RbError, Result};
use crate::models::{portfolio_losses, RowSource};

/// Auxiliary minimisation variables, in loss units: one per ES level
/// (spectral measures) or a single location for the other families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZetaState {
    pub zeta: Vec<f64>,
}

impl ZetaState {
    pub fn new(zeta: Vec<f64>) -> Result<Self> {
        if zeta.iter().any(|z| !z.is_finite()) {
            return Err(RbError::Numeric("non-finite zeta".into()));
        }
        Ok(Self { zeta })
    }

    pub fn scalar(zeta: f64) -> Self {
        Self { zeta: vec![zeta] }
    }

    pub fn len(&self) -> usize {
        self.zeta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.zeta.is_empty()
    }
}

/// Per-observation integrand `h(L, zeta)` of a measure's stochastic form.
#[derive(Debug, Clone, PartialEq)]
pub enum LossObjective {
    /// `sum_k coeff_k [zeta_k + (L - zeta_k)_+ / (1 - s_k)] + mean_weight * L`
    Tail {
        levels: Vec<f64>,
        coeff: Vec<f64>,
        mean_weight: f64,
    },
    /// `a^p (L - zeta)_+^p + b^p (zeta - L)_+^p + mean_weight * L`
    Deviation {
        a: f64,
        b: f64,
        p: f64,
        mean_weight: f64,
    },
}

impl LossObjective {
    pub fn from_spec(spec: &RiskMeasureSpec) -> Result<Self> {
        spec.validate()?;
        Ok(match *spec {
            RiskMeasureSpec::Volatility => Self::Deviation {
                a: 1.0,
                b: 1.0,
                p: 2.0,
                mean_weight: 0.0,
            },
            RiskMeasureSpec::ExpectedShortfall { alpha } => Self::Tail {
                levels: vec![alpha],
                coeff: vec![1.0],
                mean_weight: 0.0,
            },
            RiskMeasureSpec::EsMeanMixture { beta, delta, alpha } => Self::Tail {
                levels: vec![alpha],
                coeff: vec![beta],
                mean_weight: delta,
            },
            RiskMeasureSpec::Spectral { subtract_mean, .. } => {
                Self::spectral(&spectral_grid(spec)?, subtract_mean)
            }
            RiskMeasureSpec::Deviation { a, b, p } => Self::Deviation {
                a,
                b,
                p,
                mean_weight: 0.0,
            },
            RiskMeasureSpec::DeviationPlusMean { a, b, p, delta } => Self::Deviation {
                a,
                b,
                p,
                mean_weight: delta,
            },
        })
    }

    pub fn spectral(grid: &SpectralGrid, subtract_mean: bool) -> Self {
        Self::Tail {
            levels: grid.levels().to_vec(),
            coeff: grid.coeff().to_vec(),
            mean_weight: if subtract_mean { -1.0 } else { 0.0 },
        }
    }

    pub fn zeta_len(&self) -> usize {
        match self {
            Self::Tail { levels, .. } => levels.len(),
            Self::Deviation { .. } => 1,
        }
    }

    /// `q` in `g(x) = x^q`.
    pub fn exponent(&self) -> f64 {
        match self {
            Self::Tail { .. } => 1.0,
            Self::Deviation { p, .. } => *p,
        }
    }

    fn check_zeta(&self, zeta: &[f64]) -> Result<()> {
        if zeta.len() != self.zeta_len() {
            return Err(RbError::DimensionMismatch {
                expected: self.zeta_len(),
                found: zeta.len(),
            });
        }
        Ok(())
    }

    /// `mean_j h(L_j, zeta)`.
    pub fn value(&self, losses: &[f64], zeta: &[f64]) -> f64 {
        self.accumulate(losses, zeta, None, None)
    }

    /// `mean_j h(L_j, zeta)`, writing `dh/dL_j` into `dl` and `mean_j dh/dzeta` into `dz`.
    pub fn value_and_grad(
        &self,
        losses: &[f64],
        zeta: &[f64],
        dl: &mut [f64],
        dz: &mut [f64],
    ) -> f64 {
        self.accumulate(losses, zeta, Some(dl), Some(dz))
    }

    fn accumulate(
        &self,
        losses: &[f64],
        zeta: &[f64],
        mut dl: Option<&mut [f64]>,
        mut dz: Option<&mut [f64]>,
    ) -> f64 {
        let n = losses.len() as f64;
        if let Some(dz) = dz.as_deref_mut() {
            dz.iter_mut().for_each(|v| *v = 0.0);
        }
        let mut total = 0.0;
        match self {
            Self::Tail {
                levels,
                coeff,
                mean_weight,
            } => {
                let inv: Vec<f64> = levels.iter().map(|s| 1.0 / (1.0 - s)).collect();
                let base: f64 = coeff.iter().zip(zeta).map(|(c, z)| c * z).sum();
                let mut hits = vec![0usize; levels.len()];
                for (j, &l) in losses.iter().enumerate() {
                    let mut h = base + mean_weight * l;
                    let mut slope = *mean_weight;
                    for k in 0..levels.len() {
                        if l > zeta[k] {
                            h += coeff[k] * (l - zeta[k]) * inv[k];
                            slope += coeff[k] * inv[k];
                            hits[k] += 1;
                        }
                    }
                    total += h;
                    if let Some(dl) = dl.as_deref_mut() {
                        dl[j] = slope;
                    }
                }
                if let Some(dz) = dz {
                    for k in 0..levels.len() {
                        dz[k] = coeff[k] * (1.0 - hits[k] as f64 / n * inv[k]);
                    }
                }
            }
            Self::Deviation {
                a,
                b,
                p,
                mean_weight,
            } => {
                let (ap, bp) = (a.powf(*p), b.powf(*p));
                let z0 = zeta[0];
                let mut dz_sum = 0.0;
                for (j, &l) in losses.iter().enumerate() {
                    let u = l - z0;
                    let (h, slope) = if u > 0.0 {
                        let (v, d) = power_and_slope(u, *p);
                        (ap * v, ap * d)
                    } else if u < 0.0 {
                        let (v, d) = power_and_slope(-u, *p);
                        (bp * v, -bp * d)
                    } else {
                        (0.0, 0.0)
                    };
                    total += h + mean_weight * l;
                    dz_sum -= slope;
                    if let Some(dl) = dl.as_deref_mut() {
                        dl[j] = slope + mean_weight;
                    }
                }
                if let Some(dz) = dz {
                    dz[0] = dz_sum / n;
                }
            }
        }
        total / n
    }

    /// Exact minimiser over `zeta` of the sample mean of `h`, and the minimum.
    ///
    /// Tail terms are minimised at the `ceil(n s_k)`-th order statistic; `p = 1`
    /// deviations at the `a / (a + b)` order statistic, symmetric `p = 2` at the
    /// mean, and everything else by bisection on the derivative over the loss range.
    pub fn minimize_zeta(&self, losses: &[f64]) -> Result<(Vec<f64>, f64)> {
        if losses.is_empty() {
            return Err(RbError::Precondition("empty loss sample".into()));
        }
        let n = losses.len();
        let zeta = match self {
            Self::Tail { levels, .. } => {
                let mut work = losses.to_vec();
                if levels.len() > 2 {
                    work.sort_unstable_by(f64::total_cmp);
                    levels.iter().map(|&s| work[ru_order_index(n, s)]).collect()
                } else {
                    levels
                        .iter()
                        .map(|&s| order_statistic(&mut work, ru_order_index(n, s)))
                        .collect()
                }
            }
            &Self::Deviation { a, b, p, .. } => {
                if p == 1.0 {
                    let mut work = losses.to_vec();
                    vec![order_statistic(&mut work, ru_order_index(n, a / (a + b)))]
                } else if p == 2.0 && a == b {
                    vec![sample_mean(losses)]
                } else {
                    let lo = losses.iter().copied().fold(f64::INFINITY, f64::min);
                    let hi = losses.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    if hi - lo <= 0.0 {
                        vec![lo]
                    } else {
                        // The derivative in zeta is increasing; bisect it to machine precision.
                        let slope = |z: f64| {
                            let (mut up, mut down) = (0.0, 0.0);
                            for &l in losses {
                                if l > z {
                                    up += (l - z).powf(p - 1.0);
                                } else if l < z {
                                    down += (z - l).powf(p - 1.0);
                                }
                            }
                            b.powf(p) * down - a.powf(p) * up
                        };
                        let (mut lo, mut hi) = (lo, hi);
                        loop {
                            let mid = 0.5 * (lo + hi);
                            if mid <= lo || mid >= hi {
                                break;
                            }
                            if slope(mid) < 0.0 {
                                lo = mid;
                            } else {
                                hi = mid;
                            }
                        }
                        vec![if self.value(losses, &[lo]) <= self.value(losses, &[hi]) {
                            lo
                        } else {
                            hi
                        }]
                    }
                }
            }
        };
        let value = self.value(losses, &zeta);
        Ok((zeta, value))
    }

    /// Maps a minimised integrand value `g(R)` back to the risk `R`.
    pub fn risk_from_value(&self, value: f64) -> Result<f64> {
        let q = self.exponent();
        if q == 1.0 {
            return Ok(value);
        }
        if value < 0.0 {
            return Err(RbError::Numeric(format!(
                "negative power-{q} deviation {value}"
            )));
        }
        Ok(value.powf(1.0 / q))
    }
}

#[inline]
fn power_and_slope(u: f64, p: f64) -> (f64, f64) {
    if p == 1.0 {
        (u, 1.0)
    } else if p == 2.0 {
        (u * u, 2.0 * u)
    } else {
        let v = u.powf(p - 1.0);
        (v * u, p * v)
    }
}

fn check_dims<S: RowSource + ?Sized>(budgets: &Budgets, y: &[f64], batch: &S) -> Result<()> {
    if y.len() != budgets.dim() {
        return Err(RbError::DimensionMismatch {
            expected: budgets.dim(),
            found: y.len(),
        });
    }
    if batch.dim() != y.len() {
        return Err(RbError::DimensionMismatch {
            expected: y.len(),
            found: batch.dim(),
        });
    }
    if batch.is_empty() {
        return Err(RbError::Precondition("empty batch".into()));
    }
    if y.iter().any(|v| !(*v > 0.0)) {
        return Err(RbError::InvalidAllocation(
            "allocation must be strictly positive".into(),
        ));
    }
    Ok(())
}

/// `mean_j h(-y'x_j, zeta) - sum_i b_i ln y_i` over a batch.
pub fn stochastic_objective<S: RowSource + ?Sized>(
    objective: &LossObjective,
    budgets: &Budgets,
    y: &[f64],
    zeta: &ZetaState,
    batch: &S,
) -> Result<f64> {
    check_dims(budgets, y, batch)?;
    objective.check_zeta(&zeta.zeta)?;
    let losses = portfolio_losses(batch, y);
    Ok(objective.value(&losses, &zeta.zeta) + budgets.log_barrier(y))
}

/// Subgradient of [`stochastic_objective`] with respect to `(y, zeta)`.
///
/// Hinge ties `L = zeta` count as inactive.
pub fn stochastic_subgradient<S: RowSource + ?Sized>(
    objective: &LossObjective,
    budgets: &Budgets,
    y: &[f64],
    zeta: &ZetaState,
    batch: &S,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_dims(budgets, y, batch)?;
    objective.check_zeta(&zeta.zeta)?;
    let losses = portfolio_losses(batch, y);
    let mut dl = vec![0.0; losses.len()];
    let mut dz = vec![0.0; objective.zeta_len()];
    objective.value_and_grad(&losses, &zeta.zeta, &mut dl, &mut dz);
    let n = losses.len() as f64;
    let mut gy = vec![0.0; y.len()];
    for (j, w) in dl.iter().enumerate() {
        for (g, x) in gy.iter_mut().zip(batch.row(j)) {
            *g -= w * x;
        }
    }
    for ((g, b), yi) in gy.iter_mut().zip(budgets.as_slice()).zip(y) {
        *g = *g / n - b / yi;
    }
    Ok((gy, dz))
}

fn tail_objective(spec: &RiskMeasureSpec) -> Result<LossObjective> {
    match spec {
        RiskMeasureSpec::ExpectedShortfall { .. } | RiskMeasureSpec::EsMeanMixture { .. } => {
            LossObjective::from_spec(spec)
        }
        other => Err(RbError::InvalidSpec(format!(
            "{} has no Rockafellar-Uryasev form",
            other.label()
        ))),
    }
}

fn deviation_objective_of(spec: &RiskMeasureSpec) -> Result<LossObjective> {
    match spec {
        RiskMeasureSpec::Deviation { .. } | RiskMeasureSpec::DeviationPlusMean { .. } => {
            LossObjective::from_spec(spec)
        }
        other => Err(RbError::InvalidSpec(format!(
            "{} is not a deviation measure",
            other.label()
        ))),
    }
}

fn spectral_objective_of(spec: &RiskMeasureSpec, grid: &SpectralGrid) -> Result<LossObjective> {
    match *spec {
        RiskMeasureSpec::Spectral { subtract_mean, .. } => {
            Ok(LossObjective::spectral(grid, subtract_mean))
        }
        ref other => Err(RbError::InvalidSpec(format!(
            "{} is not a spectral measure",
            other.label()
        ))),
    }
}

/// Rockafellar-Uryasev objective for ES and `beta ES + delta E` specs.
pub fn ru_objective<S: RowSource + ?Sized>(
    spec: &RiskMeasureSpec,
    budgets: &Budgets,
    y: &[f64],
    zeta: &ZetaState,
    batch: &S,
) -> Result<f64> {
    stochastic_objective(&tail_objective(spec)?, budgets, y, zeta, batch)
}

pub fn ru_subgradient<S: RowSource + ?Sized>(
    spec: &RiskMeasureSpec,
    budgets: &Budgets,
    y: &[f64],
    zeta: &ZetaState,
    batch: &S,
) -> Result<(Vec<f64>, Vec<f64>)> {
    stochastic_subgradient(&tail_objective(spec)?, budgets, y, zeta, batch)
}

/// Discretised spectral objective with one `zeta` per grid level.
pub fn spectral_objective<S: RowSource + ?Sized>(
    spec: &RiskMeasureSpec,
    grid: &SpectralGrid,
    budgets: &Budgets,
    y: &[f64],
    zeta: &ZetaState,
    batch: &S,
) -> Result<f64> {
    stochastic_objective(&spectral_objective_of(spec, grid)?, budgets, y, zeta, batch)
}

pub fn spectral_subgradient<S: RowSource + ?Sized>(
    spec: &RiskMeasureSpec,
    grid: &SpectralGrid,
    budgets: &Budgets,
    y: &[f64],
    zeta: &ZetaState,
    batch: &S,
) -> Result<(Vec<f64>, Vec<f64>)> {
    stochastic_subgradient(&spectral_objective_of(spec, grid)?, budgets, y, zeta, batch)
}

/// `mean psi_{a,b}(L - zeta)^p` (plus the mean term) minus the barrier.
pub fn deviation_objective<S: RowSource + ?Sized>(
    spec: &RiskMeasureSpec,
    budgets: &Budgets,
    y: &[f64],
    zeta: &ZetaState,
    batch: &S,
) -> Result<f64> {
    stochastic_objective(&deviation_objective_of(spec)?, budgets, y, zeta, batch)
}

pub fn deviation_subgradient<S: RowSource + ?Sized>(
    spec: &RiskMeasureSpec,
    budgets: &Budgets,
    y: &[f64],
    zeta: &ZetaState,
    batch: &S,
) -> Result<(Vec<f64>, Vec<f64>)> {
    stochastic_subgradient(&deviation_objective_of(spec)?, budgets, y, zeta, batch)
}
