use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kernel::Kernel;
use super::mixture::{GaussianMixture, Mixture, ReturnModel, StudentTMixture};
use crate::error::{RbError, Result};

/// Rows per independent random substream; fixes the stream layout so that
/// parallel and serial generation agree bit-for-bit.
const ROWS_PER_STREAM: usize = 1024;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub model: String,
}

/// Anything that exposes return rows of a common dimension.
pub trait RowSource: Sync {
    fn dim(&self) -> usize;
    fn len(&self) -> usize;
    fn row(&self, i: usize) -> &[f64];

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// `n x d` matrix of asset returns, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnSample {
    data: Vec<f64>,
    n: usize,
    d: usize,
    pub provenance: Option<Provenance>,
}

impl ReturnSample {
    pub fn new(data: Vec<f64>, n: usize, d: usize) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(RbError::Precondition(
                "sample must have n >= 1 and d >= 1".into(),
            ));
        }
        if data.len() != n * d {
            return Err(RbError::DimensionMismatch {
                expected: n * d,
                found: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(RbError::Precondition(format!(
                "non-finite return at row {}, column {}",
                pos / d,
                pos % d
            )));
        }
        Ok(Self {
            data,
            n,
            d,
            provenance: None,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != d) {
            return Err(RbError::Precondition("ragged sample rows".into()));
        }
        Self::new(rows.concat(), rows.len(), d)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.d)
    }

    /// Column means.
    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.d];
        for r in self.rows() {
            for (a, v) in m.iter_mut().zip(r) {
                *a += v;
            }
        }
        m.iter_mut().for_each(|a| *a /= self.n as f64);
        m
    }

    /// Returns multiplied by `lambda`.
    pub fn scaled(&self, lambda: f64) -> Self {
        Self {
            data: self.data.iter().map(|v| v * lambda).collect(),
            n: self.n,
            d: self.d,
            provenance: self.provenance.clone(),
        }
    }

    /// First `n` rows.
    pub fn head(&self, n: usize) -> Self {
        let n = n.min(self.n);
        Self {
            data: self.data[..n * self.d].to_vec(),
            n,
            d: self.d,
            provenance: self.provenance.clone(),
        }
    }

    /// Portfolio losses `-y'x_j` for every row.
    pub fn losses(&self, y: &[f64]) -> Vec<f64> {
        portfolio_losses(self, y)
    }

    /// Writes CSV, one row per observation, optionally with `r1..rd` header.
    pub fn write_csv<W: std::io::Write>(&self, writer: W, header: bool) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .has_headers(false)
            .from_writer(writer);
        if header {
            w.write_record((1..=self.d).map(|i| format!("r{i}")))?;
        }
        for r in self.rows() {
            w.write_record(r.iter().map(|v| format!("{v:e}")))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(reader: R, header: bool) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new()
            .has_headers(header)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut data = Vec::new();
        let mut d = None;
        let mut n = 0;
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            if *d.get_or_insert(rec.len()) != rec.len() {
                return Err(RbError::Parse(format!(
                    "sample row {} has {} columns",
                    line + 1,
                    rec.len()
                )));
            }
            for field in rec.iter() {
                data.push(field.parse::<f64>().map_err(|e| {
                    RbError::Parse(format!("sample row {}: `{field}`: {e}", line + 1))
                })?);
            }
            n += 1;
        }
        Self::new(data, n, d.unwrap_or(0))
    }
}

impl RowSource for ReturnSample {
    fn dim(&self) -> usize {
        self.d
    }
    fn len(&self) -> usize {
        self.n
    }
    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }
}

/// Index subset of another source, e.g. a mini-batch.
pub struct Subset<'a, S: RowSource + ?Sized> {
    pub source: &'a S,
    pub indices: &'a [usize],
}

impl<S: RowSource + ?Sized> RowSource for Subset<'_, S> {
    fn dim(&self) -> usize {
        self.source.dim()
    }
    fn len(&self) -> usize {
        self.indices.len()
    }
    fn row(&self, i: usize) -> &[f64] {
        self.source.row(self.indices[i])
    }
}

pub fn portfolio_losses<S: RowSource + ?Sized>(source: &S, y: &[f64]) -> Vec<f64> {
    (0..source.len())
        .into_par_iter()
        .with_min_len(4096)
        .map(|j| -source.row(j).iter().zip(y).map(|(x, w)| x * w).sum::<f64>())
        .collect()
}

fn draw_mixture(mix: &Mixture, n: usize, seed: u64) -> Vec<f64> {
    let d = mix.dim();
    let comps = mix.components();
    let mut cumulative: Vec<f64> = comps
        .iter()
        .scan(0.0, |acc, c| {
            *acc += c.weight;
            Some(*acc)
        })
        .collect();
    *cumulative.last_mut().expect("non-empty mixture") = 1.0;
    let chi2: Vec<Option<ChiSquared<f64>>> = comps
        .iter()
        .map(|c| match c.kernel {
            Kernel::Normal => None,
            Kernel::StudentT { dof, .. } => Some(ChiSquared::new(dof).expect("dof > 1")),
        })
        .collect();

    let mut data = vec![0.0; n * d];
    data.par_chunks_mut(ROWS_PER_STREAM * d)
        .enumerate()
        .for_each(|(stream, block)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(stream as u64);
            let mut z = vec![0.0; d];
            for row in block.chunks_exact_mut(d) {
                let u: f64 = rng.random();
                let k = cumulative
                    .iter()
                    .position(|&c| u < c)
                    .unwrap_or(comps.len() - 1);
                let comp = &comps[k];
                for zi in z.iter_mut() {
                    *zi = StandardNormal.sample(&mut rng);
                }
                let radial = match &chi2[k] {
                    Some(dist) => {
                        let w: f64 = dist.sample(&mut rng);
                        (comp.kernel.dof().unwrap() / w).sqrt()
                    }
                    None => 1.0,
                };
                let l = comp.chol();
                for i in 0..d {
                    let mut acc = 0.0;
                    for j in 0..=i {
                        acc += l[(i, j)] * z[j];
                    }
                    row[i] = comp.location[i] + radial * acc;
                }
            }
        });
    data
}

fn sample_mixture(mix: &Mixture, n: usize, seed: u64, model_id: String) -> Result<ReturnSample> {
    if n == 0 {
        return Err(RbError::Precondition("sample size must be >= 1".into()));
    }
    let data = draw_mixture(mix, n, seed);
    let mut s = ReturnSample::new(data, n, mix.dim())?;
    s.provenance = Some(Provenance {
        seed,
        model: model_id,
    });
    Ok(s)
}

/// `n` i.i.d. draws from a Student-t mixture; a pure function of `(model, n, seed)`.
pub fn sample_tmix(model: &StudentTMixture, n: usize, seed: u64) -> Result<ReturnSample> {
    sample_mixture(
        model.mixture(),
        n,
        seed,
        ReturnModel::StudentT(model.clone()).id(),
    )
}

/// `n` i.i.d. draws from a Gaussian mixture.
pub fn sample_gmix(model: &GaussianMixture, n: usize, seed: u64) -> Result<ReturnSample> {
    sample_mixture(
        model.mixture(),
        n,
        seed,
        ReturnModel::Gaussian(model.clone()).id(),
    )
}

pub fn sample_model(model: &ReturnModel, n: usize, seed: u64) -> Result<ReturnSample> {
    sample_mixture(model.mixture(), n, seed, model.id())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    #[test]
    fn parallel_equals_serial_layout() {
        let m = StudentTMixture::new(
            vec![0.4, 0.6],
            vec![
                DVector::from_vec(vec![0.1, 0.0]),
                DVector::from_vec(vec![0.0, -0.2]),
            ],
            vec![DMatrix::identity(2, 2), DMatrix::identity(2, 2) * 0.5],
            vec![4.0, 2.5],
        )
        .unwrap();
        let a = sample_tmix(&m, 5000, 11).unwrap();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let b = pool.install(|| sample_tmix(&m, 5000, 11).unwrap());
        assert_eq!(a, b);
        // a shorter draw is a prefix of the longer one
        let c = sample_tmix(&m, 1500, 11).unwrap();
        assert_eq!(c.as_slice(), &a.as_slice()[..1500 * 2]);
        assert_ne!(
            sample_tmix(&m, 100, 12).unwrap().as_slice(),
            &a.as_slice()[..200]
        );
    }

    #[test]
    fn csv_round_trip() {
        let s = ReturnSample::from_rows(&[vec![0.1, -2.5e-3], vec![1e-7, 3.0]]).unwrap();
        for header in [false, true] {
            let mut buf = Vec::new();
            s.write_csv(&mut buf, header).unwrap();
            let back = ReturnSample::read_csv(buf.as_slice(), header).unwrap();
            assert_eq!(back.as_slice(), s.as_slice());
        }
        assert!(ReturnSample::read_csv("1,2\n3\n".as_bytes(), false).is_err());
        assert!(ReturnSample::read_csv("1,x\n".as_bytes(), false).is_err());
    }

    #[test]
    fn rejects_non_finite() {
        assert!(ReturnSample::new(vec![1.0, f64::NAN], 1, 2).is_err());
        assert!(ReturnSample::new(vec![], 0, 2).is_err());
    }
}
