use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::kernel::Kernel;
use super::loss::{LossDistribution, LossPart};
use crate::error::{RbError, Result};

const WEIGHT_SUM_TOL: f64 = 1e-12;
const SYMMETRY_TOL: f64 = 1e-12;

/// One elliptical component: `location + chol(scale) * W` with `W` spherical of the given kernel.
#[derive(Debug, Clone)]
pub struct MixtureComponent {
    pub weight: f64,
    pub location: DVector<f64>,
    pub scale: DMatrix<f64>,
    pub kernel: Kernel,
    chol: DMatrix<f64>,
    log_det: f64,
}

impl MixtureComponent {
    pub(crate) fn new(
        weight: f64,
        location: DVector<f64>,
        scale: DMatrix<f64>,
        kernel: Kernel,
    ) -> Result<Self> {
        let d = location.len();
        if scale.nrows() != d || scale.ncols() != d {
            return Err(RbError::InvalidModel(format!(
                "scale matrix is {}x{}, expected {d}x{d}",
                scale.nrows(),
                scale.ncols()
            )));
        }
        if location.iter().chain(scale.iter()).any(|v| !v.is_finite()) {
            return Err(RbError::InvalidModel("non-finite parameter".into()));
        }
        let magnitude = scale.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for i in 0..d {
            for j in 0..i {
                if (scale[(i, j)] - scale[(j, i)]).abs() > SYMMETRY_TOL * magnitude {
                    return Err(RbError::InvalidModel(format!(
                        "scale matrix not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        let chol = Cholesky::new(scale.clone())
            .ok_or_else(|| RbError::InvalidModel("scale matrix is not positive definite".into()))?
            .unpack();
        let log_det = 2.0 * chol.diagonal().iter().map(|v| v.ln()).sum::<f64>();
        Ok(Self {
            weight,
            location,
            scale,
            kernel,
            chol,
            log_det,
        })
    }

    /// Lower Cholesky factor of the scale matrix.
    pub fn chol(&self) -> &DMatrix<f64> {
        &self.chol
    }

    /// Squared Mahalanobis distance `(x - mu)' scale^{-1} (x - mu)`.
    pub fn mahalanobis(&self, x: &[f64]) -> f64 {
        let d = x.len();
        let mut z = vec![0.0; d];
        for i in 0..d {
            let mut acc = x[i] - self.location[i];
            for j in 0..i {
                acc -= self.chol[(i, j)] * z[j];
            }
            z[i] = acc / self.chol[(i, i)];
        }
        z.iter().map(|v| v * v).sum()
    }

    /// Log-density of the multivariate component at `x` (without the mixture weight).
    pub fn log_density(&self, x: &[f64]) -> f64 {
        let d = x.len() as f64;
        let delta = self.mahalanobis(x);
        match self.kernel {
            Kernel::Normal => -0.5 * (d * (2.0 * std::f64::consts::PI).ln() + self.log_det + delta),
            Kernel::StudentT { dof, .. } => {
                use statrs::function::gamma::ln_gamma;
                ln_gamma(0.5 * (dof + d))
                    - ln_gamma(0.5 * dof)
                    - 0.5 * d * (dof * std::f64::consts::PI).ln()
                    - 0.5 * self.log_det
                    - 0.5 * (dof + d) * (delta / dof).ln_1p()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    StudentT,
    Gaussian,
}

/// Finite mixture of elliptical components sharing one family.
#[derive(Debug, Clone)]
pub struct Mixture {
    family: Family,
    components: Vec<MixtureComponent>,
}

impl Mixture {
    fn new(
        family: Family,
        p: Vec<f64>,
        mu: Vec<DVector<f64>>,
        scale: Vec<DMatrix<f64>>,
        kernels: Vec<Kernel>,
    ) -> Result<Self> {
        let n = p.len();
        if n == 0 {
            return Err(RbError::InvalidModel("mixture has no components".into()));
        }
        if mu.len() != n || scale.len() != n || kernels.len() != n {
            return Err(RbError::InvalidModel(format!(
                "component count mismatch: {n} weights, {} locations, {} scales, {} kernels",
                mu.len(),
                scale.len(),
                kernels.len()
            )));
        }
        if p.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(RbError::InvalidModel(
                "mixture weights must be positive".into(),
            ));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(RbError::InvalidModel(format!(
                "mixture weights sum to {total}, expected 1"
            )));
        }
        let d = mu[0].len();
        if d == 0 || mu.iter().any(|m| m.len() != d) {
            return Err(RbError::InvalidModel(
                "inconsistent location dimensions".into(),
            ));
        }
        let components = p
            .into_iter()
            .zip(mu)
            .zip(scale)
            .zip(kernels)
            .map(|(((w, m), s), k)| MixtureComponent::new(w, m, s, k))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { family, components })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn dim(&self) -> usize {
        self.components[0].location.len()
    }

    pub fn components(&self) -> &[MixtureComponent] {
        &self.components
    }

    pub fn weights(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.weight).collect()
    }

    pub fn mean(&self) -> DVector<f64> {
        self.components
            .iter()
            .fold(DVector::zeros(self.dim()), |acc, c| {
                acc + &c.location * c.weight
            })
    }

    /// Covariance of the mixture; errors when some component has infinite variance.
    pub fn covariance(&self) -> Result<DMatrix<f64>> {
        let d = self.dim();
        let mean = self.mean();
        let mut cov = DMatrix::zeros(d, d);
        for c in &self.components {
            let v = c.kernel.variance();
            if !v.is_finite() {
                return Err(RbError::InvalidModel(
                    "covariance undefined: a component has degrees of freedom <= 2".into(),
                ));
            }
            cov += (&c.scale * v + &c.location * c.location.transpose()) * c.weight;
        }
        cov -= &mean * mean.transpose();
        Ok(cov)
    }

    /// Log of the mixture density at `x`.
    pub fn log_density(&self, x: &[f64]) -> f64 {
        let terms: Vec<f64> = self
            .components
            .iter()
            .map(|c| c.weight.ln() + c.log_density(x))
            .collect();
        log_sum_exp(&terms)
    }

    /// Law of the scalar loss `-y'X`.
    pub fn loss_distribution(&self, y: &[f64]) -> LossDistribution {
        let yv = DVector::from_column_slice(y);
        let parts = self
            .components
            .iter()
            .map(|c| LossPart {
                weight: c.weight,
                location: -yv.dot(&c.location),
                scale: (yv.dot(&(&c.scale * &yv))).sqrt(),
                kernel: c.kernel,
            })
            .collect();
        LossDistribution::new(parts)
    }

    /// Same mixture with component labels permuted.
    pub fn permuted(&self, order: &[usize]) -> Self {
        Self {
            family: self.family,
            components: order.iter().map(|&i| self.components[i].clone()).collect(),
        }
    }
}

pub(crate) fn log_sum_exp(terms: &[f64]) -> f64 {
    let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

/// Mixture of multivariate Student-t distributions `t(mu_i, Lambda_i, nu_i)`.
#[derive(Debug, Clone)]
pub struct StudentTMixture(Mixture);

impl StudentTMixture {
    pub fn new(
        p: Vec<f64>,
        mu: Vec<DVector<f64>>,
        scale: Vec<DMatrix<f64>>,
        nu: Vec<f64>,
    ) -> Result<Self> {
        let kernels = nu
            .iter()
            .map(|&v| Kernel::student_t(v))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self(Mixture::new(Family::StudentT, p, mu, scale, kernels)?))
    }

    pub fn dofs(&self) -> Vec<f64> {
        self.0
            .components
            .iter()
            .map(|c| c.kernel.dof().expect("student-t component"))
            .collect()
    }

    pub fn mixture(&self) -> &Mixture {
        &self.0
    }

    pub fn permuted(&self, order: &[usize]) -> Self {
        Self(self.0.permuted(order))
    }
}

/// Mixture of multivariate Gaussians `N(mu_i, Sigma_i)`.
#[derive(Debug, Clone)]
pub struct GaussianMixture(Mixture);

impl GaussianMixture {
    pub fn new(p: Vec<f64>, mu: Vec<DVector<f64>>, sigma: Vec<DMatrix<f64>>) -> Result<Self> {
        let kernels = vec![Kernel::Normal; p.len()];
        Ok(Self(Mixture::new(Family::Gaussian, p, mu, sigma, kernels)?))
    }

    pub fn mixture(&self) -> &Mixture {
        &self.0
    }

    pub fn permuted(&self, order: &[usize]) -> Self {
        Self(self.0.permuted(order))
    }
}

impl std::ops::Deref for StudentTMixture {
    type Target = Mixture;
    fn deref(&self) -> &Mixture {
        &self.0
    }
}

impl std::ops::Deref for GaussianMixture {
    type Target = Mixture;
    fn deref(&self) -> &Mixture {
        &self.0
    }
}

/// Either parametric return model.
#[derive(Debug, Clone)]
pub enum ReturnModel {
    StudentT(StudentTMixture),
    Gaussian(GaussianMixture),
}

impl ReturnModel {
    pub fn mixture(&self) -> &Mixture {
        match self {
            ReturnModel::StudentT(m) => m.mixture(),
            ReturnModel::Gaussian(m) => m.mixture(),
        }
    }

    pub fn dim(&self) -> usize {
        self.mixture().dim()
    }

    /// Short identifier recorded in sample provenance.
    pub fn id(&self) -> String {
        let tag = match self {
            ReturnModel::StudentT(_) => "tmix",
            ReturnModel::Gaussian(_) => "gmix",
        };
        format!(
            "{tag}(N={},d={})",
            self.mixture().components().len(),
            self.dim()
        )
    }
}

impl From<StudentTMixture> for ReturnModel {
    fn from(m: StudentTMixture) -> Self {
        ReturnModel::StudentT(m)
    }
}

impl From<GaussianMixture> for ReturnModel {
    fn from(m: GaussianMixture) -> Self {
        ReturnModel::Gaussian(m)
    }
}

/// On-disk JSON form, matrices row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    #[serde(rename = "type")]
    pub kind: String,
    pub p: Vec<f64>,
    pub mu: Vec<Vec<f64>>,
    pub scale: Vec<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<Vec<f64>>,
}

fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(RbError::InvalidModel("scale matrix is not square".into()));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

impl TryFrom<ModelFile> for ReturnModel {
    type Error = RbError;

    fn try_from(f: ModelFile) -> Result<Self> {
        let mu = f.mu.iter().map(|m| DVector::from_column_slice(m)).collect();
        let scale = f
            .scale
            .iter()
            .map(|rows| matrix_from_rows(rows))
            .collect::<Result<Vec<_>>>()?;
        match f.kind.as_str() {
            "tmix" => {
                let nu =
                    f.nu.ok_or_else(|| RbError::InvalidModel("tmix model requires `nu`".into()))?;
                Ok(StudentTMixture::new(f.p, mu, scale, nu)?.into())
            }
            "gmix" => Ok(GaussianMixture::new(f.p, mu, scale)?.into()),
            other => Err(RbError::InvalidModel(format!(
                "unknown model type `{other}` (expected tmix or gmix)"
            ))),
        }
    }
}

impl From<&ReturnModel> for ModelFile {
    fn from(m: &ReturnModel) -> Self {
        let mix = m.mixture();
        let (kind, nu) = match m {
            ReturnModel::StudentT(t) => ("tmix", Some(t.dofs())),
            ReturnModel::Gaussian(_) => ("gmix", None),
        };
        ModelFile {
            kind: kind.into(),
            p: mix.weights(),
            mu: mix
                .components()
                .iter()
                .map(|c| c.location.iter().cloned().collect())
                .collect(),
            scale: mix
                .components()
                .iter()
                .map(|c| matrix_to_rows(&c.scale))
                .collect(),
            nu,
        }
    }
}

impl ReturnModel {
    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text).map_err(|e| {
            RbError::Parse(format!(
                "model JSON, line {} column {}: {e}",
                e.line(),
                e.column()
            ))
        })?;
        file.try_into()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ModelFile::from(self))?)
    }
}
