//! The planted-manifold benchmark.
//!
//! `num_minima` points are drawn in an `M`-dimensional cube and mapped into
//! `[-1, 1]^n` by a fixed nonlinear embedding (zero-pad, rotate, `tanh`,
//! rescale, bend). The first point is the global minimum with value 0; every
//! other point is a local minimum with value `c0_i` in `[1, 2]`.

use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng;
use crate::textio::TextDoc;

pub const C1_MANIFOLD_DIM: usize = 5;
pub const C1_DEFAULT_MINIMA: usize = 1000;
pub const C1_DEFAULT_RADIUS: f64 = 0.5;
/// Squared distances below this are treated as coinciding with a minimum.
pub const SINGULAR_EPS: f64 = 1e-12;

const MAX_DRAWS: usize = 200;
const SEED_VALUE: f64 = 0.1;
const FILE_KIND: &str = "c1-instance";

#[derive(Debug, Clone, PartialEq)]
pub struct C1Instance {
    n: usize,
    manifold_dim: usize,
    num_minima: usize,
    radius: f64,
    seed: u64,
    /// `num_minima x manifold_dim`, row-major.
    zeta: Vec<f64>,
    /// `n x n`, row-major.
    rotation: Vec<f64>,
    /// `num_minima x n`, row-major. Row 0 is the global minimum.
    minima: Vec<f64>,
    /// Weights of minima `1..num_minima`.
    c0: Vec<f64>,
}

/// Builds a seeded instance, re-drawing the latent seeds until the global
/// basin of radius `radius` contains no other minimum.
pub fn build_c1_instance(
    seed: u64,
    n: usize,
    manifold_dim: usize,
    num_minima: usize,
    radius: f64,
) -> Result<C1Instance> {
    if manifold_dim == 0 || manifold_dim > n {
        return Err(Error::invalid(format!(
            "manifold dimension must be in 1..={n}, got {manifold_dim}"
        )));
    }
    if num_minima < 2 {
        return Err(Error::invalid("c1 needs at least two minima"));
    }
    if !(radius > 0.0) {
        return Err(Error::invalid("basin radius must be positive"));
    }

    let mut rng = rng::rng(seed);
    let rotation = random_rotation(n, &mut rng);

    for _ in 0..MAX_DRAWS {
        let mut zeta = Vec::with_capacity(num_minima * manifold_dim);
        zeta.extend(std::iter::repeat_n(SEED_VALUE, manifold_dim));
        for _ in manifold_dim..num_minima * manifold_dim {
            zeta.push(rng.random_range(-1.0..=1.0));
        }
        let c0: Vec<f64> = (1..num_minima).map(|_| rng.random_range(1.0..=2.0)).collect();
        let minima = embed(&zeta, manifold_dim, &rotation, n);

        let x1 = &minima[..n];
        let separated = (1..num_minima).all(|i| sq_dist(x1, &minima[i * n..(i + 1) * n]) > radius * radius);
        if separated {
            return Ok(C1Instance {
                n,
                manifold_dim,
                num_minima,
                radius,
                seed,
                zeta,
                rotation,
                minima,
                c0,
            });
        }
    }
    Err(Error::BasinSeparation {
        num_minima,
        radius,
        attempts: MAX_DRAWS,
    })
}

/// Orthonormalized Gaussian matrix with determinant +1.
fn random_rotation(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    // Work on columns; stored column-major here and transposed at the end.
    let mut cols: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
        .collect();
    for j in 0..n {
        // Two passes of modified Gram-Schmidt keep orthogonality near machine precision.
        for _ in 0..2 {
            for k in 0..j {
                let (done, rest) = cols.split_at_mut(j);
                let d = dot(&rest[0], &done[k]);
                for (a, b) in rest[0].iter_mut().zip(&done[k]) {
                    *a -= d * b;
                }
            }
        }
        let norm = dot(&cols[j], &cols[j]).sqrt();
        cols[j].iter_mut().for_each(|v| *v /= norm);
    }
    let mut w = vec![0.0; n * n];
    for (j, col) in cols.iter().enumerate() {
        for (i, v) in col.iter().enumerate() {
            w[i * n + j] = *v;
        }
    }
    if determinant(&w, n) < 0.0 {
        for i in 0..n {
            w[i * n] = -w[i * n];
        }
    }
    w
}

/// Embedding of latent seeds into the search box.
fn embed(zeta: &[f64], manifold_dim: usize, rotation: &[f64], n: usize) -> Vec<f64> {
    let k = zeta.len() / manifold_dim;
    let mut x = vec![0.0; k * n];
    for i in 0..k {
        let z = &zeta[i * manifold_dim..(i + 1) * manifold_dim];
        for j in 0..n {
            // Only the first M columns see nonzero padded input.
            let row = &rotation[j * n..j * n + manifold_dim];
            x[i * n + j] = dot(row, z).tanh();
        }
    }
    for j in 0..n {
        let max = (0..k).map(|i| x[i * n + j].abs()).fold(0.0, f64::max);
        for i in 0..k {
            let x3 = if max > 0.0 { 0.9 * x[i * n + j] / max } else { 0.0 };
            x[i * n + j] = x3 + 0.1 * (1.0 - x3 * x3);
        }
    }
    x
}

pub(crate) fn determinant(a: &[f64], n: usize) -> f64 {
    let mut m = a.to_vec();
    let mut det = 1.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&r, &s| m[r * n + col].abs().total_cmp(&m[s * n + col].abs()))
            .unwrap_or(col);
        if m[pivot * n + col] == 0.0 {
            return 0.0;
        }
        if pivot != col {
            for c in 0..n {
                m.swap(pivot * n + c, col * n + c);
            }
            det = -det;
        }
        let p = m[col * n + col];
        det *= p;
        for r in col + 1..n {
            let f = m[r * n + col] / p;
            if f != 0.0 {
                for c in col..n {
                    m[r * n + c] -= f * m[col * n + c];
                }
            }
        }
    }
    det
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl C1Instance {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn manifold_dim(&self) -> usize {
        self.manifold_dim
    }

    pub fn num_minima(&self) -> usize {
        self.num_minima
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn zeta_row(&self, i: usize) -> &[f64] {
        &self.zeta[i * self.manifold_dim..(i + 1) * self.manifold_dim]
    }

    pub fn rotation(&self) -> &[f64] {
        &self.rotation
    }

    pub fn minimum(&self, i: usize) -> &[f64] {
        &self.minima[i * self.n..(i + 1) * self.n]
    }

    pub fn minima(&self) -> &[f64] {
        &self.minima
    }

    /// Weight of minimum `i` (`i >= 1`); minimum 0 has none.
    pub fn weight(&self, i: usize) -> f64 {
        assert!(i >= 1, "the global minimum has no weight");
        self.c0[i - 1]
    }

    pub fn weights(&self) -> &[f64] {
        &self.c0
    }

    pub fn global_minimum(&self) -> &[f64] {
        self.minimum(0)
    }

    fn local_sq_dists(&self, x: &[f64]) -> Vec<f64> {
        (1..self.num_minima)
            .map(|i| sq_dist(x, self.minimum(i)))
            .collect()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let d2 = self.local_sq_dists(x);
        let (k, f1) = argmin(&d2);
        let d1 = sq_dist(x, self.global_minimum());
        let f3 = (d1 / (self.radius * self.radius)).min(1.0);
        if f1 < SINGULAR_EPS {
            return self.c0[k] * f3;
        }
        let f2 = self.blend(&d2);
        (5.0 * f1 + f2) * f3
    }

    /// `(K + sum c0_i / d_i^2) / (sum 1 / d_i^2)` over the local minima.
    fn blend(&self, d2: &[f64]) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for (d, c) in d2.iter().zip(&self.c0) {
            let inv = 1.0 / d;
            num += 1.0 + c * inv;
            den += inv;
        }
        num / den
    }

    pub fn eval_with_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let n = self.n;
        let d2 = self.local_sq_dists(x);
        let (k, f1) = argmin(&d2);
        let x1 = self.global_minimum();
        let d1 = sq_dist(x, x1);
        let r2 = self.radius * self.radius;
        let inside = d1 < r2;
        let f3 = if inside { d1 / r2 } else { 1.0 };

        if f1 < SINGULAR_EPS {
            // At a local minimum the bracket is stationary with value c0_k.
            let c = self.c0[k];
            for j in 0..n {
                grad[j] = if inside { c * 2.0 * (x[j] - x1[j]) / r2 } else { 0.0 };
            }
            return c * f3;
        }

        let f2 = self.blend(&d2);
        let den: f64 = d2.iter().map(|d| 1.0 / d).sum();
        // grad f2 = sum_i w_i (x - x_i),  w_i = -2 (c0_i - f2) / (B d_i^4)
        let mut wsum = 0.0;
        let mut acc = vec![0.0; n];
        for (i, (d, c)) in d2.iter().zip(&self.c0).enumerate() {
            let w = -2.0 * (c - f2) / (den * d * d);
            wsum += w;
            let xi = self.minimum(i + 1);
            for (a, v) in acc.iter_mut().zip(xi) {
                *a += w * v;
            }
        }
        let xk = self.minimum(k + 1);
        let bracket = 5.0 * f1 + f2;
        for j in 0..n {
            let g_f2 = wsum * x[j] - acc[j];
            let g_f1 = 2.0 * (x[j] - xk[j]);
            let g_f3 = if inside { 2.0 * (x[j] - x1[j]) / r2 } else { 0.0 };
            grad[j] = f3 * (5.0 * g_f1 + g_f2) + bracket * g_f3;
        }
        bracket * f3
    }

    pub fn to_doc(&self) -> TextDoc {
        let mut doc = TextDoc::new(FILE_KIND, 1);
        doc.set("n", self.n)
            .set("M", self.manifold_dim)
            .set("num_minima", self.num_minima)
            .set("R", self.radius)
            .set("seed", self.seed);
        doc.push_matrix("zeta", self.num_minima, self.manifold_dim, self.zeta.clone());
        doc.push_matrix("rotation", self.n, self.n, self.rotation.clone());
        doc.push_matrix("minima", self.num_minima, self.n, self.minima.clone());
        doc.push_matrix("c0", 1, self.num_minima - 1, self.c0.clone());
        doc
    }

    pub fn from_doc(doc: &TextDoc) -> Result<Self> {
        let n: usize = doc.get("n")?;
        let manifold_dim: usize = doc.get("M")?;
        let num_minima: usize = doc.get("num_minima")?;
        let radius: f64 = doc.get("R")?;
        let seed: u64 = doc.get("seed")?;
        let take = |name: &str, rows: usize, cols: usize| -> Result<Vec<f64>> {
            let m = doc.matrix(name)?;
            if m.rows != rows || m.cols != cols {
                return Err(Error::Shape(format!(
                    "{name}: expected {rows}x{cols}, found {}x{}",
                    m.rows, m.cols
                )));
            }
            Ok(m.data.clone())
        };
        Ok(C1Instance {
            n,
            manifold_dim,
            num_minima,
            radius,
            seed,
            zeta: take("zeta", num_minima, manifold_dim)?,
            rotation: take("rotation", n, n)?,
            minima: take("minima", num_minima, n)?,
            c0: take("c0", 1, num_minima - 1)?,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_doc().write(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_doc(&TextDoc::read(path, FILE_KIND)?)
    }
}

/// Index and value of the smallest entry; the lowest index wins ties.
fn argmin(v: &[f64]) -> (usize, f64) {
    let mut best = (0, v[0]);
    for (i, &d) in v.iter().enumerate().skip(1) {
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}
