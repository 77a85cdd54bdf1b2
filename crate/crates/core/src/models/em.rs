//! Expectation-maximisation for Student-t (fixed degrees of freedom) and Gaussian mixtures.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kernel::Kernel;
use super::mixture::{log_sum_exp, GaussianMixture, MixtureComponent, StudentTMixture};
use super::sample::{ReturnSample, RowSource};
use crate::error::{RbError, Result};

/// Fixed row chunk for partial sums, so reductions do not depend on thread count.
const CHUNK: usize = 8192;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmConfig {
    /// Stop once the relative log-likelihood change falls below this.
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub kmeans_iters: usize,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 500,
            seed: 0,
            kmeans_iters: 10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EmFit<M> {
    pub model: M,
    /// Total log-likelihood after each E-step.
    pub loglik_trace: Vec<f64>,
    pub converged: bool,
}

struct Params {
    p: Vec<f64>,
    mu: Vec<DVector<f64>>,
    scale: Vec<DMatrix<f64>>,
}

pub fn em_fit_tmix(
    sample: &ReturnSample,
    n_components: usize,
    dof: &[f64],
    config: &EmConfig,
) -> Result<EmFit<StudentTMixture>> {
    if dof.len() != n_components {
        return Err(RbError::Precondition(format!(
            "{} degrees of freedom given for {n_components} components",
            dof.len()
        )));
    }
    let kernels = dof
        .iter()
        .map(|&v| Kernel::student_t(v))
        .collect::<Result<Vec<_>>>()?;
    let (params, trace, converged) = run_em(sample, &kernels, config)?;
    let model = StudentTMixture::new(params.p, params.mu, params.scale, dof.to_vec())
        .map_err(|e| RbError::Fit(e.to_string()))?;
    Ok(EmFit {
        model,
        loglik_trace: trace,
        converged,
    })
}

pub fn em_fit_gmix(
    sample: &ReturnSample,
    n_components: usize,
    config: &EmConfig,
) -> Result<EmFit<GaussianMixture>> {
    let kernels = vec![Kernel::Normal; n_components];
    let (params, trace, converged) = run_em(sample, &kernels, config)?;
    let model = GaussianMixture::new(params.p, params.mu, params.scale)
        .map_err(|e| RbError::Fit(e.to_string()))?;
    Ok(EmFit {
        model,
        loglik_trace: trace,
        converged,
    })
}

fn run_em(
    sample: &ReturnSample,
    kernels: &[Kernel],
    config: &EmConfig,
) -> Result<(Params, Vec<f64>, bool)> {
    let (n, d, k) = (sample.len(), sample.dim(), kernels.len());
    if k == 0 {
        return Err(RbError::Precondition("need at least one component".into()));
    }
    if n <= d * k {
        return Err(RbError::Precondition(format!(
            "EM needs n > d*N, got n={n}, d={d}, N={k}"
        )));
    }
    let labels = kmeans_labels(sample, k, config)?;
    let mut resp = vec![0.0; n * k];
    for (i, &l) in labels.iter().enumerate() {
        resp[i * k + l] = 1.0;
    }
    let ones = vec![1.0; n * k];
    let mut params = m_step(sample, &resp, &ones, k)?;

    let mut trace = Vec::new();
    let mut converged = false;
    let mut weights = vec![0.0; n * k];
    for _ in 0..config.max_iter {
        let comps = build_components(&params, kernels)?;
        let ll = e_step(sample, &comps, &mut resp, &mut weights);
        if !ll.is_finite() {
            return Err(RbError::Fit("log-likelihood is not finite".into()));
        }
        let stop = trace
            .last()
            .is_some_and(|&prev: &f64| (ll - prev).abs() <= config.tol * prev.abs());
        trace.push(ll);
        if stop {
            converged = true;
            break;
        }
        params = m_step(sample, &resp, &weights, k)?;
    }
    Ok((params, trace, converged))
}

fn build_components(params: &Params, kernels: &[Kernel]) -> Result<Vec<MixtureComponent>> {
    params
        .p
        .iter()
        .zip(&params.mu)
        .zip(&params.scale)
        .zip(kernels)
        .map(|(((&w, mu), s), &kernel)| {
            MixtureComponent::new(w, mu.clone(), s.clone(), kernel).or_else(|_| {
                let d = s.nrows();
                let ridge = 1e-10 * s.trace() / d as f64;
                let regularised = s + DMatrix::identity(d, d) * ridge;
                MixtureComponent::new(w, mu.clone(), regularised, kernel).map_err(|_| {
                    RbError::Fit("scatter matrix singular even after ridge regularisation".into())
                })
            })
        })
        .collect()
}

/// Fills responsibilities and the Student-t precision weights; returns the log-likelihood.
fn e_step(
    sample: &ReturnSample,
    comps: &[MixtureComponent],
    resp: &mut [f64],
    weights: &mut [f64],
) -> f64 {
    let k = comps.len();
    let d = sample.dim() as f64;
    let partials: Vec<f64> = resp
        .par_chunks_mut(CHUNK * k)
        .zip(weights.par_chunks_mut(CHUNK * k))
        .enumerate()
        .map(|(c, (r_chunk, w_chunk))| {
            let mut ll = 0.0;
            let mut lp = vec![0.0; k];
            for (local, (r, w)) in r_chunk
                .chunks_exact_mut(k)
                .zip(w_chunk.chunks_exact_mut(k))
                .enumerate()
            {
                let x = sample.row(c * CHUNK + local);
                for (j, comp) in comps.iter().enumerate() {
                    lp[j] = comp.weight.ln() + comp.log_density(x);
                    w[j] = match comp.kernel {
                        Kernel::Normal => 1.0,
                        Kernel::StudentT { dof, .. } => (dof + d) / (dof + comp.mahalanobis(x)),
                    };
                }
                let lse = log_sum_exp(&lp);
                for j in 0..k {
                    r[j] = (lp[j] - lse).exp();
                }
                ll += lse;
            }
            ll
        })
        .collect();
    partials.iter().sum()
}

/// Per-chunk sums of tau, tau*u and tau*u*x for each component.
type FirstSums = (Vec<f64>, Vec<f64>, Vec<Vec<f64>>);

fn m_step(sample: &ReturnSample, resp: &[f64], weights: &[f64], k: usize) -> Result<Params> {
    let (n, d) = (sample.len(), sample.dim());
    let n_chunks = n.div_ceil(CHUNK);

    // first pass: sum tau, sum tau*u, sum tau*u*x
    let firsts: Vec<FirstSums> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut s0 = vec![0.0; k];
            let mut s1 = vec![0.0; k];
            let mut sx = vec![vec![0.0; d]; k];
            for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
                let x = sample.row(i);
                for j in 0..k {
                    let t = resp[i * k + j];
                    let tu = t * weights[i * k + j];
                    s0[j] += t;
                    s1[j] += tu;
                    for (a, v) in sx[j].iter_mut().zip(x) {
                        *a += tu * v;
                    }
                }
            }
            (s0, s1, sx)
        })
        .collect();
    let mut s0 = vec![0.0; k];
    let mut s1 = vec![0.0; k];
    let mut sx = vec![vec![0.0; d]; k];
    for (a, b, c) in &firsts {
        for j in 0..k {
            s0[j] += a[j];
            s1[j] += b[j];
            for (acc, v) in sx[j].iter_mut().zip(&c[j]) {
                *acc += v;
            }
        }
    }
    if let Some(j) = s0.iter().position(|&s| s < (d as f64 + 1.0)) {
        return Err(RbError::Fit(format!(
            "component {j} collapsed (effective size {:.3})",
            s0[j]
        )));
    }
    let mu: Vec<DVector<f64>> = (0..k)
        .map(|j| DVector::from_iterator(d, sx[j].iter().map(|v| v / s1[j])))
        .collect();

    // second pass: weighted scatter around the new locations
    let scatters: Vec<Vec<DMatrix<f64>>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![DMatrix::<f64>::zeros(d, d); k];
            let mut dev = vec![0.0; d];
            for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
                let x = sample.row(i);
                for j in 0..k {
                    let tu = resp[i * k + j] * weights[i * k + j];
                    for (dv, (xv, m)) in dev.iter_mut().zip(x.iter().zip(mu[j].iter())) {
                        *dv = xv - m;
                    }
                    for a in 0..d {
                        let f = tu * dev[a];
                        for b in 0..=a {
                            acc[j][(a, b)] += f * dev[b];
                        }
                    }
                }
            }
            acc
        })
        .collect();
    let mut scale = vec![DMatrix::<f64>::zeros(d, d); k];
    for part in &scatters {
        for j in 0..k {
            scale[j] += &part[j];
        }
    }
    for j in 0..k {
        for a in 0..d {
            for b in 0..=a {
                let v = scale[j][(a, b)] / s0[j];
                scale[j][(a, b)] = v;
                scale[j][(b, a)] = v;
            }
        }
    }
    let total: f64 = s0.iter().sum();
    let p = s0.iter().map(|s| s / total).collect();
    Ok(Params { p, mu, scale })
}

/// k-means++ seeding plus a few Lloyd sweeps on column-standardised data.
fn kmeans_labels(sample: &ReturnSample, k: usize, config: &EmConfig) -> Result<Vec<usize>> {
    let (n, d) = (sample.len(), sample.dim());
    let mean = sample.mean();
    let mut sd = vec![0.0; d];
    for r in sample.rows() {
        for j in 0..d {
            sd[j] += (r[j] - mean[j]).powi(2);
        }
    }
    for s in sd.iter_mut() {
        *s = (*s / n as f64).sqrt().max(f64::MIN_POSITIVE);
    }
    let z: Vec<f64> = sample
        .rows()
        .flat_map(|r| (0..d).map(|j| (r[j] - mean[j]) / sd[j]).collect::<Vec<_>>())
        .collect();
    let point = |i: usize| &z[i * d..(i + 1) * d];
    let dist2 = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut centers: Vec<Vec<f64>> = vec![point(rng.random_range(0..n)).to_vec()];
    let mut nearest: Vec<f64> = (0..n).map(|i| dist2(point(i), &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = nearest.iter().sum();
        let idx = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in nearest.iter().enumerate() {
                if target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centers.push(point(idx).to_vec());
        let c = centers.last().unwrap();
        for (i, nd) in nearest.iter_mut().enumerate() {
            *nd = nd.min(dist2(point(i), c));
        }
    }

    let assign = |centers: &[Vec<f64>]| -> Vec<usize> {
        (0..n)
            .into_par_iter()
            .with_min_len(4096)
            .map(|i| {
                let p = point(i);
                (0..k)
                    .min_by(|&a, &b| dist2(p, &centers[a]).total_cmp(&dist2(p, &centers[b])))
                    .unwrap()
            })
            .collect()
    };
    let mut labels = assign(&centers);
    for _ in 0..config.kmeans_iters {
        let mut sums = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        for (i, &l) in labels.iter().enumerate() {
            counts[l] += 1;
            for (s, v) in sums[l].iter_mut().zip(point(i)) {
                *s += v;
            }
        }
        for j in 0..k {
            if counts[j] > 0 {
                centers[j] = sums[j].iter().map(|s| s / counts[j] as f64).collect();
            }
        }
        let next = assign(&centers);
        if next == labels {
            break;
        }
        labels = next;
    }
    Ok(labels)
}
