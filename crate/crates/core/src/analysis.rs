//! Latent-dimension analysis: PCA curves, autoencoder reconstruction
//! sweeps, the kink rule, and the expected number of tries.

use std::fmt;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::localopt::TrainingSet;
use crate::nn::{train_autoencoder, Normalization, TrainConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// Column `k` (row-major `n x n`) is the `k`-th principal direction.
    pub components: Vec<f64>,
    /// Descending, clamped at zero.
    pub eigenvalues: Vec<f64>,
}

impl PcaModel {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn component(&self, k: usize) -> Vec<f64> {
        let n = self.dim();
        (0..n).map(|i| self.components[i * n + k]).collect()
    }

    /// Projects onto the top `m` directions and maps back.
    pub fn reconstruct(&self, x: &[f64], m: usize) -> Vec<f64> {
        let n = self.dim();
        let centered: Vec<f64> = x.iter().zip(&self.mean).map(|(a, b)| a - b).collect();
        let mut out = self.mean.clone();
        for k in 0..m.min(n) {
            let coef: f64 = (0..n).map(|i| self.components[i * n + k] * centered[i]).sum();
            for (i, o) in out.iter_mut().enumerate() {
                *o += coef * self.components[i * n + k];
            }
        }
        out
    }
}

/// Eigen-decomposition of a symmetric row-major `n x n` matrix by cyclic
/// Jacobi rotations. Returns eigenvalues (unsorted) and eigenvectors as
/// columns.
pub fn symmetric_eigen(matrix: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut a = matrix.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let total: f64 = a.iter().map(|x| x * x).sum();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j] * a[i * n + j])
            .sum();
        if off <= 1e-30 * total.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[i * n + i]).collect(), v)
}

/// PCA of the rows of `samples` (`count x n`, row-major) using the sample
/// covariance with divisor `count - 1`.
pub fn pca_fit(samples: &[f64], n: usize) -> Result<PcaModel> {
    if n == 0 || samples.len() % n != 0 {
        return Err(Error::Shape("sample matrix length is not a multiple of n".into()));
    }
    let count = samples.len() / n;
    if count < 2 {
        return Err(Error::invalid("PCA needs at least two samples"));
    }
    let mut mean = vec![0.0; n];
    for row in samples.chunks(n) {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= count as f64);
    let mut cov = vec![0.0; n * n];
    let mut centered = vec![0.0; n];
    for row in samples.chunks(n) {
        for (c, (v, m)) in centered.iter_mut().zip(row.iter().zip(&mean)) {
            *c = v - m;
        }
        for i in 0..n {
            let ci = centered[i];
            for j in i..n {
                cov[i * n + j] += ci * centered[j];
            }
        }
    }
    for i in 0..n {
        for j in i..n {
            let v = cov[i * n + j] / (count - 1) as f64;
            cov[i * n + j] = v;
            cov[j * n + i] = v;
        }
    }
    if cov.iter().all(|&v| v == 0.0) {
        return Err(Error::DegenerateData("all samples are identical".into()));
    }
    let (vals, vecs) = symmetric_eigen(&cov, n);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]));
    let mut components = vec![0.0; n * n];
    let mut eigenvalues = Vec::with_capacity(n);
    for (k, &src) in order.iter().enumerate() {
        let col: Vec<f64> = (0..n).map(|i| vecs[i * n + src]).collect();
        let pivot = col.iter().copied().fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for (i, c) in col.iter().enumerate() {
            components[i * n + k] = sign * c;
        }
        eigenvalues.push(vals[src].max(0.0));
    }
    Ok(PcaModel {
        mean,
        components,
        eigenvalues,
    })
}

/// Mean squared projection error (over samples and coordinates) and the
/// explained-variance ratio of the top `m` components.
pub fn pca_metrics(model: &PcaModel, samples: &[f64], m: usize) -> Result<(f64, f64)> {
    let n = model.dim();
    if m == 0 || m > n {
        return Err(Error::invalid(format!("m must lie in 1..={n}, got {m}")));
    }
    if samples.is_empty() || samples.len() % n != 0 {
        return Err(Error::Shape("sample matrix length is not a multiple of n".into()));
    }
    let count = samples.len() / n;
    let err: f64 = samples
        .chunks(n)
        .map(|x| model.reconstruct(x, m).iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
        .sum();
    let total: f64 = model.eigenvalues.iter().sum();
    let ratio = if total > 0.0 {
        (model.eigenvalues[..m].iter().sum::<f64>() / total).min(1.0)
    } else {
        1.0
    };
    Ok((err / (count * n) as f64, ratio))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CurveSource {
    #[serde(rename = "PCA")]
    Pca,
    #[serde(rename = "AE")]
    Autoencoder,
}

impl fmt::Display for CurveSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CurveSource::Pca => "PCA",
            CurveSource::Autoencoder => "AE",
        })
    }
}

/// Which samples a curve was computed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dataset {
    /// Uniform start points.
    #[serde(rename = "X_0")]
    Initial,
    /// Locally optimized samples.
    #[serde(rename = "X_lambda")]
    Optimized,
}

impl fmt::Display for Dataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Dataset::Initial => "X_0",
            Dataset::Optimized => "X_lambda",
        })
    }
}

/// Reconstruction loss against latent dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct DimCurve {
    pub source: CurveSource,
    pub dataset: Dataset,
    pub m_values: Vec<usize>,
    pub losses: Vec<f64>,
    /// Explained-variance ratios; PCA only.
    pub variance_ratios: Option<Vec<f64>>,
}

impl DimCurve {
    pub fn loss_at(&self, m: usize) -> Option<f64> {
        self.m_values.iter().position(|&k| k == m).map(|i| self.losses[i])
    }

    /// Smallest `m` whose loss is at most `target`.
    pub fn smallest_m_below(&self, target: f64) -> Option<usize> {
        self.m_values.iter().zip(&self.losses).find(|(_, &l)| l <= target).map(|(&m, _)| m)
    }

    pub fn csv_header() -> &'static str {
        "source,dataset,m,loss,variance_ratio\n"
    }

    /// Data rows without the header, so several curves can share a file.
    pub fn csv_rows(&self) -> String {
        let mut out = String::new();
        for (i, (m, loss)) in self.m_values.iter().zip(&self.losses).enumerate() {
            let ratio = self.variance_ratios.as_ref().map(|r| r[i].to_string()).unwrap_or_default();
            let _ = writeln!(out, "{},{},{m},{loss},{ratio}", self.source, self.dataset);
        }
        out
    }

    pub fn write_csv(curves: &[&DimCurve], path: &Path) -> Result<()> {
        let mut text = Self::csv_header().to_string();
        for c in curves {
            text.push_str(&c.csv_rows());
        }
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// PCA curve for every `m` in `m_list`.
pub fn pca_curve(samples: &[f64], n: usize, m_list: &[usize], dataset: Dataset) -> Result<DimCurve> {
    let model = pca_fit(samples, n)?;
    let mut losses = Vec::with_capacity(m_list.len());
    let mut ratios = Vec::with_capacity(m_list.len());
    for &m in m_list {
        let (l, r) = pca_metrics(&model, samples, m)?;
        losses.push(l);
        ratios.push(r);
    }
    Ok(DimCurve {
        source: CurveSource::Pca,
        dataset,
        m_values: m_list.to_vec(),
        losses,
        variance_ratios: Some(ratios),
    })
}

/// Trains one autoencoder per latent dimension on the same data and seed
/// and records each final reconstruction loss (internal coordinates).
pub fn reconstruction_sweep(trainset: &TrainingSet, norm: &Normalization, m_list: &[usize], cfg: &TrainConfig) -> Result<DimCurve> {
    if m_list.is_empty() {
        return Err(Error::invalid("empty latent-dimension list"));
    }
    if m_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("latent dimensions must be strictly ascending"));
    }
    let losses = m_list
        .par_iter()
        .map(|&m| {
            train_autoencoder(trainset, norm.clone(), m, cfg)
                .map(|b| b.summary.final_loss)
                .map_err(|e| Error::Sweep {
                    m,
                    source: Box::new(e),
                })
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(DimCurve {
        source: CurveSource::Autoencoder,
        dataset: Dataset::Optimized,
        m_values: m_list.to_vec(),
        losses,
        variance_ratios: None,
    })
}

/// Smallest `m` whose loss is below `tau` and after which the loss no
/// longer drops by more than the factor `rho`.
pub fn estimate_intrinsic_dim(curve: &DimCurve, tau: f64, rho: f64) -> Option<usize> {
    let l = &curve.losses;
    (0..l.len())
        .find(|&i| l[i] < tau && (i + 1 == l.len() || l[i + 1] / l[i] > rho))
        .map(|i| curve.m_values[i])
}

/// Mean number of independent tries until the first success.
pub fn expected_tries(p: f64) -> Result<f64> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::invalid(format!("success probability must lie in (0, 1], got {p}")));
    }
    Ok(1.0 / p)
}
