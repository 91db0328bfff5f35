//! Autoencoder losses and their gradients.
//!
//! All functions work in the network's internal coordinates. Batch losses
//! are means over samples (and, for reconstruction, over coordinates too).

use ndarray::{Array2, ArrayView2, Zip};
use rand::Rng;

use super::network::{DenseNetwork, NetworkGradients};

/// Bounds applied to discriminator outputs before taking logarithms.
pub const LOG_CLAMP: f64 = 1e-7;

#[inline]
fn clamp_prob(d: f64) -> f64 {
    d.clamp(LOG_CLAMP, 1.0 - LOG_CLAMP)
}

#[inline]
fn in_clamp(d: f64) -> bool {
    (LOG_CLAMP..=1.0 - LOG_CLAMP).contains(&d)
}

/// `0.1 + 0.8 (c - cmin) / (cmax - cmin)`, or 0.5 everywhere when the
/// range is empty.
pub fn scaled_costs(costs: &[f64], cmin: f64, cmax: f64) -> Vec<f64> {
    let span = cmax - cmin;
    costs
        .iter()
        .map(|&c| {
            if span > 0.0 {
                0.1 + 0.8 * (c - cmin) / span
            } else {
                0.5
            }
        })
        .collect()
}

pub(crate) struct HeadGrad {
    pub loss: f64,
    pub grads: Option<NetworkGradients>,
    /// Gradient with respect to the latent batch.
    pub dz: Array2<f64>,
}

/// Weighted mean squared error of `dec(z)` against `x`.
pub(crate) fn recon_head(dec: &DenseNetwork, z: ArrayView2<f64>, x: ArrayView2<f64>, weights: Option<&[f64]>) -> HeadGrad {
    let cache = dec.forward_batch(z);
    let (b, n) = x.dim();
    let denom = (b * n) as f64;
    let mut diff = cache.output() - &x;
    let mut loss = 0.0;
    match weights {
        Some(w) => {
            for mut row in diff.rows_mut() {
                for (d, wj) in row.iter_mut().zip(w) {
                    loss += wj * *d * *d;
                    *d *= 2.0 * wj / denom;
                }
            }
        }
        None => {
            for d in diff.iter_mut() {
                loss += *d * *d;
                *d *= 2.0 / denom;
            }
        }
    }
    let (grads, dz) = dec.backward(&cache, diff.view());
    HeadGrad {
        loss: loss / denom,
        grads: Some(grads),
        dz,
    }
}

/// `beta * mean (target - sur(z))^2`.
pub(crate) fn surrogate_head(sur: &DenseNetwork, z: ArrayView2<f64>, targets: &[f64], beta: f64) -> HeadGrad {
    let cache = sur.forward_batch(z);
    let b = z.nrows() as f64;
    let mut up = cache.output().clone();
    let mut loss = 0.0;
    for (u, t) in up.iter_mut().zip(targets) {
        let e = *u - t;
        loss += e * e;
        *u = 2.0 * beta * e / b;
    }
    let (grads, dz) = sur.backward(&cache, up.view());
    HeadGrad {
        loss: beta * loss / b,
        grads: Some(grads),
        dz,
    }
}

/// Encoder-side adversarial loss `mean -ln(1 - dis(z))`; only the latent
/// gradient is returned since the discriminator is not updated by it.
pub(crate) fn fool_head(dis: &DenseNetwork, z: ArrayView2<f64>) -> HeadGrad {
    let cache = dis.forward_batch(z);
    let b = z.nrows() as f64;
    let mut up = cache.output().clone();
    let mut loss = 0.0;
    for u in up.iter_mut() {
        let d = *u;
        loss -= (1.0 - clamp_prob(d)).ln();
        *u = if in_clamp(d) { 1.0 / ((1.0 - d) * b) } else { 0.0 };
    }
    let (_, dz) = dis.backward(&cache, up.view());
    HeadGrad {
        loss: loss / b,
        grads: None,
        dz,
    }
}

/// Discriminator loss `-1/2 mean(ln dis(z_enc) + ln(1 - dis(z_prior)))`.
pub(crate) fn critic_head(dis: &DenseNetwork, z_enc: ArrayView2<f64>, prior: ArrayView2<f64>) -> (f64, NetworkGradients) {
    let b = z_enc.nrows() as f64;
    let bp = prior.nrows() as f64;
    let enc_cache = dis.forward_batch(z_enc);
    let pri_cache = dis.forward_batch(prior);
    let mut loss = 0.0;
    let mut up_enc = enc_cache.output().clone();
    for u in up_enc.iter_mut() {
        let d = *u;
        loss -= 0.5 * clamp_prob(d).ln() / b;
        *u = if in_clamp(d) { -0.5 / (d * b) } else { 0.0 };
    }
    let mut up_pri = pri_cache.output().clone();
    for u in up_pri.iter_mut() {
        let d = *u;
        loss -= 0.5 * (1.0 - clamp_prob(d)).ln() / bp;
        *u = if in_clamp(d) { 0.5 / ((1.0 - d) * bp) } else { 0.0 };
    }
    let (mut g, _) = dis.backward(&enc_cache, up_enc.view());
    let (g2, _) = dis.backward(&pri_cache, up_pri.view());
    g.add_assign(&g2);
    (loss, g)
}

/// Reconstruction loss and gradients for encoder and decoder.
pub fn reconstruction_loss_gradients(
    enc: &DenseNetwork,
    dec: &DenseNetwork,
    x: ArrayView2<f64>,
    weights: Option<&[f64]>,
) -> (f64, NetworkGradients, NetworkGradients) {
    let enc_cache = enc.forward_batch(x);
    let head = recon_head(dec, enc_cache.output().view(), x, weights);
    let (enc_g, _) = enc.backward(&enc_cache, head.dz.view());
    (head.loss, enc_g, head.grads.expect("decoder gradients"))
}

/// Surrogate loss and gradients for encoder and surrogate.
pub fn surrogate_loss_gradients(
    enc: &DenseNetwork,
    sur: &DenseNetwork,
    x: ArrayView2<f64>,
    targets: &[f64],
    beta: f64,
) -> (f64, NetworkGradients, NetworkGradients) {
    let enc_cache = enc.forward_batch(x);
    let head = surrogate_head(sur, enc_cache.output().view(), targets, beta);
    let (enc_g, _) = enc.backward(&enc_cache, head.dz.view());
    (head.loss, enc_g, head.grads.expect("surrogate gradients"))
}

/// Both adversarial losses for a fixed prior batch:
/// `(L_D1, dL_D1/d discriminator, L_D2, dL_D2/d encoder)`.
pub fn discriminator_loss_gradients(
    enc: &DenseNetwork,
    dis: &DenseNetwork,
    x: ArrayView2<f64>,
    prior: ArrayView2<f64>,
) -> (f64, NetworkGradients, f64, NetworkGradients) {
    let enc_cache = enc.forward_batch(x);
    let z = enc_cache.output().view();
    let (ld1, dis_g) = critic_head(dis, z, prior);
    let fool = fool_head(dis, z);
    let (enc_g, _) = enc.backward(&enc_cache, fool.dz.view());
    (ld1, dis_g, fool.loss, enc_g)
}

/// `(L_D1, L_D2)` with a prior batch drawn uniformly from the unit cube.
pub fn discriminator_losses(enc: &DenseNetwork, dis: &DenseNetwork, x: ArrayView2<f64>, rng: &mut impl Rng) -> (f64, f64) {
    let prior = uniform_prior(x.nrows(), enc.output_dim(), rng);
    let (ld1, _, ld2, _) = discriminator_loss_gradients(enc, dis, x, prior.view());
    (ld1, ld2)
}

pub(crate) fn uniform_prior(rows: usize, m: usize, rng: &mut impl Rng) -> Array2<f64> {
    Array2::from_shape_fn((rows, m), |_| rng.random::<f64>())
}

pub(crate) fn add_into(dst: &mut Array2<f64>, src: &Array2<f64>) {
    Zip::from(dst).and(src).for_each(|a, &b| *a += b);
}
