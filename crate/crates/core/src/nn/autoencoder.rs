//! Autoencoder bundle, training loop and layer-wise pretraining.

use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::losses::{add_into, critic_head, fool_head, recon_head, scaled_costs, surrogate_head, uniform_prior};
use super::network::{build_network, DenseNetwork, NetworkAdam};
use super::Activation;
use crate::adam::AdamConfig;
use crate::bench::Problem;
use crate::error::{Error, Result};
use crate::localopt::TrainingSet;
use crate::rng;

/// Affine map between the problem box and `[-1, 1]^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalization {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Normalization {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.iter().zip(&upper).any(|(l, u)| !(l < u)) {
            return Err(Error::invalid("normalization needs lower < upper per coordinate"));
        }
        Ok(Normalization { lower, upper })
    }

    pub fn for_problem(problem: &Problem) -> Self {
        Normalization {
            lower: problem.lower().to_vec(),
            upper: problem.upper().to_vec(),
        }
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn to_internal(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(v, (lo, hi))| 2.0 * (v - lo) / (hi - lo) - 1.0)
            .collect()
    }

    /// Inverse map; values in `(-1, 1)` land strictly inside the box even
    /// when rounding would hit a face.
    pub fn from_internal(&self, y: &[f64]) -> Vec<f64> {
        y.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(v, (lo, hi))| {
                let x = lo + (v + 1.0) * 0.5 * (hi - lo);
                if x >= *hi {
                    hi.next_down()
                } else if x <= *lo {
                    lo.next_up()
                } else {
                    x
                }
            })
            .collect()
    }

    pub fn batch_to_internal(&self, rows: &[f64]) -> Array2<f64> {
        let n = self.dim();
        let count = rows.len() / n;
        let mut out = Array2::zeros((count, n));
        for (i, mut row) in out.rows_mut().into_iter().enumerate() {
            let x = &rows[i * n..(i + 1) * n];
            for (j, o) in row.iter_mut().enumerate() {
                *o = 2.0 * (x[j] - self.lower[j]) / (self.upper[j] - self.lower[j]) - 1.0;
            }
        }
        out
    }
}

/// Layer widths and activations of the benchmark encoder and decoder:
/// `n -> n -> n -> m` and `m -> n -> n -> n`.
pub fn benchmark_architecture(n: usize, m: usize) -> ((Vec<usize>, Vec<Activation>), (Vec<usize>, Vec<Activation>)) {
    use Activation::*;
    (
        (vec![n, n, n, m], vec![TanhLeakyRelu, TanhLeakyRelu, Sigmoid]),
        (vec![m, n, n, n], vec![TanhLeakyRelu, TanhLeakyRelu, Tanh]),
    )
}

/// Discriminator and surrogate heads: `m -> 50 x 5 -> 1`.
pub fn head_architecture(m: usize) -> (Vec<usize>, Vec<Activation>) {
    let mut dims = vec![m];
    dims.extend([50; 5]);
    dims.push(1);
    let mut acts = vec![Activation::Tanh; 5];
    acts.push(Activation::Sigmoid);
    (dims, acts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batches_per_epoch: usize,
    pub adam: AdamConfig,
    /// Train an adversarial discriminator on the latent codes.
    pub discriminator: bool,
    /// Probability of applying each adversarial loss in a batch.
    pub p_dis: f64,
    /// Train a surrogate head on scaled costs.
    pub surrogate: bool,
    pub beta_s: f64,
    /// Per-coordinate reconstruction weights; all ones when absent.
    pub sample_weights: Option<Vec<f64>>,
    pub pretrain_epochs: usize,
    pub n_pre: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            batches_per_epoch: 20,
            adam: AdamConfig::default(),
            discriminator: false,
            p_dis: 0.3,
            surrogate: false,
            beta_s: 0.25,
            sample_weights: None,
            pretrain_epochs: 0,
            n_pre: 1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p_dis) {
            return Err(Error::invalid("p_dis must lie in [0, 1]"));
        }
        if !(self.beta_s >= 0.0) {
            return Err(Error::invalid("beta_s must be non-negative"));
        }
        if self.batches_per_epoch == 0 {
            return Err(Error::invalid("need at least one batch per epoch"));
        }
        if self.n_pre == 0 {
            return Err(Error::invalid("n_pre must be at least 1"));
        }
        self.adam.validate()
    }
}

/// What training produced, kept with the weights.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingSummary {
    pub seed: u64,
    pub epochs: usize,
    pub batches_per_epoch: usize,
    /// Mean reconstruction loss of every epoch (measured before each update).
    pub epoch_losses: Vec<f64>,
    /// Reconstruction loss of the finished model over the whole training set.
    pub final_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AutoencoderBundle {
    pub encoder: DenseNetwork,
    pub decoder: DenseNetwork,
    pub discriminator: Option<DenseNetwork>,
    pub surrogate: Option<DenseNetwork>,
    pub norm: Normalization,
    pub summary: TrainingSummary,
}

impl AutoencoderBundle {
    /// Untrained benchmark-shaped bundle.
    pub fn new(norm: Normalization, m: usize, cfg: &TrainConfig) -> Result<Self> {
        if m == 0 {
            return Err(Error::invalid("latent dimension must be at least 1"));
        }
        let n = norm.dim();
        let ((ed, ea), (dd, da)) = benchmark_architecture(n, m);
        let (hd, ha) = head_architecture(m);
        let encoder = build_network(&ed, &ea, rng::derive_seed(cfg.seed, "init/encoder"))?;
        let decoder = build_network(&dd, &da, rng::derive_seed(cfg.seed, "init/decoder"))?;
        let discriminator = if cfg.discriminator {
            Some(build_network(&hd, &ha, rng::derive_seed(cfg.seed, "init/discriminator"))?)
        } else {
            None
        };
        let surrogate = if cfg.surrogate {
            Some(build_network(&hd, &ha, rng::derive_seed(cfg.seed, "init/surrogate"))?)
        } else {
            None
        };
        Self::from_parts(encoder, decoder, discriminator, surrogate, norm)
    }

    pub fn from_parts(
        encoder: DenseNetwork,
        decoder: DenseNetwork,
        discriminator: Option<DenseNetwork>,
        surrogate: Option<DenseNetwork>,
        norm: Normalization,
    ) -> Result<Self> {
        let m = encoder.output_dim();
        if decoder.input_dim() != m || encoder.input_dim() != norm.dim() || decoder.output_dim() != norm.dim() {
            return Err(Error::Shape("encoder, decoder and normalization disagree".into()));
        }
        for head in discriminator.iter().chain(surrogate.iter()) {
            if head.input_dim() != m || head.output_dim() != 1 {
                return Err(Error::Shape("heads must map the latent space to one value".into()));
            }
        }
        Ok(AutoencoderBundle {
            encoder,
            decoder,
            discriminator,
            surrogate,
            norm,
            summary: TrainingSummary::default(),
        })
    }

    pub fn latent_dim(&self) -> usize {
        self.encoder.output_dim()
    }

    pub fn dim(&self) -> usize {
        self.norm.dim()
    }

    pub fn encode(&self, x: &[f64]) -> Vec<f64> {
        self.encoder.predict(&self.norm.to_internal(x))
    }

    /// Decoded point, strictly inside the problem box.
    pub fn decode(&self, z: &[f64]) -> Vec<f64> {
        self.norm.from_internal(&self.decoder.predict(z))
    }

    pub fn reconstruct(&self, x: &[f64]) -> Vec<f64> {
        self.decode(&self.encode(x))
    }

    /// Weighted reconstruction loss over `rows` (problem coordinates,
    /// row-major), measured in internal coordinates.
    pub fn reconstruction_loss(&self, rows: &[f64], weights: Option<&[f64]>) -> f64 {
        let x = self.norm.batch_to_internal(rows);
        internal_recon_loss(&self.encoder, &self.decoder, x.view(), weights)
    }

    /// `(L_D1, L_D2)` on a batch of problem-space rows.
    pub fn discriminator_losses(&self, rows: &[f64], rng: &mut impl Rng) -> Result<(f64, f64)> {
        let dis = self
            .discriminator
            .as_ref()
            .ok_or_else(|| Error::invalid("bundle has no discriminator"))?;
        let x = self.norm.batch_to_internal(rows);
        Ok(super::losses::discriminator_losses(&self.encoder, dis, x.view(), rng))
    }

    /// Surrogate loss of a batch given its costs and the training-set range.
    pub fn surrogate_loss(&self, rows: &[f64], costs: &[f64], cmin: f64, cmax: f64, beta_s: f64) -> Result<f64> {
        let sur = self
            .surrogate
            .as_ref()
            .ok_or_else(|| Error::invalid("bundle has no surrogate"))?;
        let x = self.norm.batch_to_internal(rows);
        let targets = scaled_costs(costs, cmin, cmax);
        let (loss, _, _) = super::losses::surrogate_loss_gradients(&self.encoder, sur, x.view(), &targets, beta_s);
        Ok(loss)
    }
}

fn internal_recon_loss(enc: &DenseNetwork, dec: &DenseNetwork, x: ArrayView2<f64>, weights: Option<&[f64]>) -> f64 {
    let xh = dec.predict_batch(enc.predict_batch(x).view());
    let (b, n) = x.dim();
    let mut s = 0.0;
    for (row_h, row) in xh.rows().into_iter().zip(x.rows()) {
        for (j, (a, v)) in row_h.iter().zip(row.iter()).enumerate() {
            let w = weights.map_or(1.0, |w| w[j]);
            s += w * (a - v) * (a - v);
        }
    }
    s / (b * n) as f64
}

/// Splits `count` items into `parts` contiguous chunks, larger chunks first.
fn chunk_sizes(count: usize, parts: usize) -> Vec<usize> {
    (0..parts)
        .map(|i| count / parts + usize::from(i < count % parts))
        .collect()
}

/// Layer ranges `(encoder, decoder)` of every pretraining pair, outermost
/// first.
pub fn encoder_pairs(bundle: &AutoencoderBundle, n_pre: usize) -> Result<Vec<(std::ops::Range<usize>, std::ops::Range<usize>)>> {
    let le = bundle.encoder.layers().len();
    let ld = bundle.decoder.layers().len();
    if n_pre == 0 || n_pre > le {
        return Err(Error::invalid(format!("cannot split {le} encoder layers into {n_pre} parts")));
    }
    if le != ld {
        return Err(Error::Shape("pretraining needs mirrored encoder and decoder depths".into()));
    }
    let sizes = chunk_sizes(le, n_pre);
    let edims = bundle.encoder.layer_dims();
    let ddims = bundle.decoder.layer_dims();
    let mut pairs = Vec::with_capacity(n_pre);
    let mut start = 0;
    for s in sizes {
        let enc = start..start + s;
        // The decoder pair mirrors the encoder pair from the output side.
        let dec = ld - start - s..ld - start;
        if edims[enc.start] != ddims[dec.end] || edims[enc.end] != ddims[dec.start] {
            return Err(Error::Shape(format!(
                "pretraining pair {}: encoder {}->{} does not mirror decoder {}->{}",
                pairs.len() + 1,
                edims[enc.start],
                edims[enc.end],
                ddims[dec.start],
                ddims[dec.end]
            )));
        }
        pairs.push((enc, dec));
        start += s;
    }
    Ok(pairs)
}

struct Heads<'a> {
    targets: Option<&'a [f64]>,
    beta_s: f64,
    p_dis: f64,
}

/// The shared optimization loop. Encoder and decoder always train on the
/// reconstruction loss; heads contribute when present in `bundle` and
/// enabled in `heads`.
fn fit(
    encoder: &mut DenseNetwork,
    decoder: &mut DenseNetwork,
    mut discriminator: Option<&mut DenseNetwork>,
    mut surrogate: Option<&mut DenseNetwork>,
    data: &Array2<f64>,
    weights: Option<&[f64]>,
    heads: Heads<'_>,
    epochs: usize,
    cfg: &TrainConfig,
) -> Result<Vec<f64>> {
    let count = data.nrows();
    let mut shuffle = rng::rng(rng::derive_seed(cfg.seed, "shuffle"));
    let mut coins = rng::rng(rng::derive_seed(cfg.seed, "adversarial"));
    let mut enc_opt = NetworkAdam::new(encoder);
    let mut dec_opt = NetworkAdam::new(decoder);
    let mut dis_opt = discriminator.as_deref().map(NetworkAdam::new);
    let mut sur_opt = surrogate.as_deref().map(NetworkAdam::new);
    let sizes = chunk_sizes(count, cfg.batches_per_epoch.min(count));
    let mut order: Vec<usize> = (0..count).collect();
    let mut history = Vec::with_capacity(epochs);

    for epoch in 0..epochs {
        order.shuffle(&mut shuffle);
        let mut epoch_loss = 0.0;
        let mut offset = 0;
        for (batch, &size) in sizes.iter().enumerate() {
            let idx = &order[offset..offset + size];
            offset += size;
            let x = data.select(ndarray::Axis(0), idx);

            let enc_cache = encoder.forward_batch(x.view());
            let z = enc_cache.output().view();
            let rec = recon_head(decoder, z, x.view(), weights);
            if !rec.loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch });
            }
            epoch_loss += rec.loss * size as f64;
            let mut dz = rec.dz;

            let mut sur_grads = None;
            if let (Some(sur), Some(targets)) = (surrogate.as_deref(), heads.targets) {
                let t: Vec<f64> = idx.iter().map(|&i| targets[i]).collect();
                let head = surrogate_head(sur, z, &t, heads.beta_s);
                if !head.loss.is_finite() {
                    return Err(Error::NonFiniteLoss { epoch, batch });
                }
                add_into(&mut dz, &head.dz);
                sur_grads = head.grads;
            }

            let mut dis_grads = None;
            if let Some(dis) = discriminator.as_deref() {
                let apply_critic = coins.random::<f64>() < heads.p_dis;
                let apply_fool = coins.random::<f64>() < heads.p_dis;
                if apply_critic {
                    let prior = uniform_prior(size, z.ncols(), &mut coins);
                    let (loss, g) = critic_head(dis, z, prior.view());
                    if !loss.is_finite() {
                        return Err(Error::NonFiniteLoss { epoch, batch });
                    }
                    dis_grads = Some(g);
                }
                if apply_fool {
                    let head = fool_head(dis, z);
                    add_into(&mut dz, &head.dz);
                }
            }

            let (enc_grads, _) = encoder.backward(&enc_cache, dz.view());
            enc_opt.step(&cfg.adam, encoder, &enc_grads);
            dec_opt.step(&cfg.adam, decoder, rec.grads.as_ref().expect("decoder gradients"));
            if let (Some(g), Some(sur), Some(opt)) = (sur_grads, surrogate.as_deref_mut(), sur_opt.as_mut()) {
                opt.step(&cfg.adam, sur, &g);
            }
            if let (Some(g), Some(dis), Some(opt)) = (dis_grads, discriminator.as_deref_mut(), dis_opt.as_mut()) {
                opt.step(&cfg.adam, dis, &g);
            }
        }
        history.push(epoch_loss / count as f64);
    }
    if !encoder.is_finite() || !decoder.is_finite() {
        return Err(Error::NonFiniteLoss {
            epoch: epochs,
            batch: 0,
        });
    }
    Ok(history)
}

/// Trains pair `stage` (1-based, outermost first) to reconstruct the output
/// of the already-trained outer encoder pairs. Every other layer is left
/// untouched. Returns the per-epoch loss.
pub fn pretrain_stage(
    bundle: &mut AutoencoderBundle,
    data: &Array2<f64>,
    stage: usize,
    cfg: &TrainConfig,
) -> Result<Vec<f64>> {
    let pairs = encoder_pairs(bundle, cfg.n_pre)?;
    let (enc_range, dec_range) = pairs
        .get(stage.wrapping_sub(1))
        .cloned()
        .ok_or_else(|| Error::invalid(format!("stage {stage} out of range 1..={}", cfg.n_pre)))?;
    let target = if enc_range.start == 0 {
        data.clone()
    } else {
        bundle.encoder.slice(0..enc_range.start).predict_batch(data.view())
    };
    let mut enc = bundle.encoder.slice(enc_range.clone());
    let mut dec = bundle.decoder.slice(dec_range.clone());
    let weights = if stage == 1 { cfg.sample_weights.as_deref() } else { None };
    let heads = Heads {
        targets: None,
        beta_s: 0.0,
        p_dis: 0.0,
    };
    let history = fit(&mut enc, &mut dec, None, None, &target, weights, heads, cfg.pretrain_epochs, cfg)?;
    bundle.encoder.splice(enc_range.start, &enc);
    bundle.decoder.splice(dec_range.start, &dec);
    Ok(history)
}

/// Layer-wise pretraining of all `n_pre` pairs, outside in.
pub fn pretrain(bundle: &AutoencoderBundle, trainset: &TrainingSet, cfg: &TrainConfig) -> Result<AutoencoderBundle> {
    cfg.validate()?;
    let data = bundle.norm.batch_to_internal(&trainset.samples);
    let mut out = bundle.clone();
    for stage in 1..=cfg.n_pre {
        pretrain_stage(&mut out, &data, stage, cfg)?;
    }
    Ok(out)
}

/// Builds, optionally pretrains, and trains an autoencoder on the samples
/// of `trainset`, normalized by `norm`.
pub fn train_autoencoder(trainset: &TrainingSet, norm: Normalization, m: usize, cfg: &TrainConfig) -> Result<AutoencoderBundle> {
    cfg.validate()?;
    if trainset.is_empty() {
        return Err(Error::invalid("empty training set"));
    }
    if norm.dim() != trainset.n {
        return Err(Error::Shape("normalization and training set dimensions differ".into()));
    }
    if let Some(w) = &cfg.sample_weights {
        if w.len() != trainset.n {
            return Err(Error::Shape("sample weights must have one entry per coordinate".into()));
        }
    }
    let mut bundle = AutoencoderBundle::new(norm, m, cfg)?;
    let data = bundle.norm.batch_to_internal(&trainset.samples);

    if cfg.pretrain_epochs > 0 {
        for stage in 1..=cfg.n_pre {
            pretrain_stage(&mut bundle, &data, stage, cfg)?;
        }
    }

    let targets = if bundle.surrogate.is_some() {
        let cmin = trainset.costs.iter().copied().fold(f64::INFINITY, f64::min);
        let cmax = trainset.costs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Some(scaled_costs(&trainset.costs, cmin, cmax))
    } else {
        None
    };
    let heads = Heads {
        targets: targets.as_deref(),
        beta_s: cfg.beta_s,
        p_dis: cfg.p_dis,
    };
    let AutoencoderBundle {
        encoder,
        decoder,
        discriminator,
        surrogate,
        ..
    } = &mut bundle;
    let history = fit(
        encoder,
        decoder,
        discriminator.as_mut(),
        surrogate.as_mut(),
        &data,
        cfg.sample_weights.as_deref(),
        heads,
        cfg.epochs,
        cfg,
    )?;
    let final_loss = internal_recon_loss(&bundle.encoder, &bundle.decoder, data.view(), cfg.sample_weights.as_deref());
    bundle.summary = TrainingSummary {
        seed: cfg.seed,
        epochs: cfg.epochs,
        batches_per_epoch: cfg.batches_per_epoch,
        epoch_losses: history,
        final_loss,
    };
    Ok(bundle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::ProblemId;

    /// Points on a segment in R^10, inside [-1, 1]^10.
    fn segment_set(count: usize) -> TrainingSet {
        let n = 10;
        let dir: Vec<f64> = (0..n).map(|j| ((j as f64) * 0.7).sin() * 0.5).collect();
        let base: Vec<f64> = (0..n).map(|j| 0.1 * ((j as f64) * 1.3).cos()).collect();
        let mut samples = Vec::with_capacity(count * n);
        for i in 0..count {
            let t = -1.0 + 2.0 * (i as f64 + 0.5) / count as f64;
            samples.extend((0..n).map(|j| base[j] + t * dir[j]));
        }
        TrainingSet {
            problem: ProblemId::C1,
            n,
            lambda: 0,
            seed: 0,
            initial: samples.clone(),
            costs: (0..count).map(|i| i as f64).collect(),
            samples,
            eval_count: count as u64,
        }
    }

    fn unit_norm(n: usize) -> Normalization {
        Normalization::new(vec![-1.0; n], vec![1.0; n]).unwrap()
    }

    #[test]
    fn normalization_round_trip_and_strict_interior() {
        let norm = Normalization::new(vec![-500.0, -50.0], vec![500.0, 50.0]).unwrap();
        let x = [123.25, -49.0];
        let back = norm.from_internal(&norm.to_internal(&x));
        assert!((back[0] - x[0]).abs() < 1e-12 && (back[1] - x[1]).abs() < 1e-12);
        let edge = norm.from_internal(&[1.0, -1.0]);
        assert!(edge[0] < 500.0 && edge[1] > -50.0);
    }

    #[test]
    fn segment_is_learned_with_one_latent() {
        let set = segment_set(200);
        let cfg = TrainConfig {
            epochs: 200,
            batches_per_epoch: 10,
            seed: 3,
            ..TrainConfig::default()
        };
        let bundle = train_autoencoder(&set, unit_norm(10), 1, &cfg).unwrap();
        assert!(bundle.summary.final_loss < 1e-3, "loss {}", bundle.summary.final_loss);
        assert!(bundle.summary.final_loss <= bundle.summary.epoch_losses[0]);
        let x = set.sample(57);
        let xr = bundle.reconstruct(x);
        // Per-coordinate error of a converged model.
        let worst = x.iter().zip(&xr).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(worst < 0.05, "worst coordinate error {worst}");
    }

    #[test]
    fn inactive_heads_leave_the_trajectory_unchanged() {
        let set = segment_set(60);
        let base = TrainConfig {
            epochs: 5,
            batches_per_epoch: 4,
            seed: 9,
            ..TrainConfig::default()
        };
        let plain = train_autoencoder(&set, unit_norm(10), 2, &base).unwrap();
        let with_idle_dis = TrainConfig {
            discriminator: true,
            p_dis: 0.0,
            ..base.clone()
        };
        let other = train_autoencoder(&set, unit_norm(10), 2, &with_idle_dis).unwrap();
        assert_eq!(plain.encoder, other.encoder);
        assert_eq!(plain.decoder, other.decoder);
    }

    #[test]
    fn heads_train_without_error() {
        let set = segment_set(60);
        let cfg = TrainConfig {
            epochs: 3,
            batches_per_epoch: 3,
            discriminator: true,
            p_dis: 1.0,
            surrogate: true,
            beta_s: 0.25,
            seed: 1,
            ..TrainConfig::default()
        };
        let bundle = train_autoencoder(&set, unit_norm(10), 2, &cfg).unwrap();
        let rows = &set.samples[..10 * 8];
        let (l1, l2) = bundle.discriminator_losses(rows, &mut rng::rng(0)).unwrap();
        assert!(l1.is_finite() && l2.is_finite());
        assert!(bundle.surrogate_loss(rows, &set.costs[..8], 0.0, 59.0, 0.25).unwrap() >= 0.0);
    }

    #[test]
    fn deterministic_per_seed() {
        let set = segment_set(40);
        let cfg = TrainConfig {
            epochs: 3,
            batches_per_epoch: 4,
            seed: 21,
            ..TrainConfig::default()
        };
        let a = train_autoencoder(&set, unit_norm(10), 2, &cfg).unwrap();
        let b = train_autoencoder(&set, unit_norm(10), 2, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn encode_and_decode_ranges() {
        let norm = Normalization::new(vec![-500.0; 6], vec![500.0; 6]).unwrap();
        let bundle = AutoencoderBundle::new(norm, 3, &TrainConfig::default()).unwrap();
        let mut r = rng::rng(2);
        for _ in 0..10_000 {
            let z: Vec<f64> = (0..3).map(|_| r.random::<f64>()).collect();
            let x = bundle.decode(&z);
            assert!(x.iter().all(|v| *v > -500.0 && *v < 500.0));
        }
        for _ in 0..1000 {
            let x: Vec<f64> = (0..6).map(|_| r.random_range(-500.0..500.0)).collect();
            assert!(bundle.encode(&x).iter().all(|v| *v > 0.0 && *v < 1.0));
        }
    }

    #[test]
    fn single_stage_pretraining_equals_plain_training() {
        let set = segment_set(50);
        let plain_cfg = TrainConfig {
            epochs: 4,
            batches_per_epoch: 5,
            seed: 13,
            ..TrainConfig::default()
        };
        let pre_cfg = TrainConfig {
            epochs: 0,
            pretrain_epochs: 4,
            n_pre: 1,
            ..plain_cfg.clone()
        };
        let a = train_autoencoder(&set, unit_norm(10), 2, &plain_cfg).unwrap();
        let b = train_autoencoder(&set, unit_norm(10), 2, &pre_cfg).unwrap();
        assert_eq!(a.encoder, b.encoder);
        assert_eq!(a.decoder, b.decoder);
    }

    #[test]
    fn pretraining_updates_only_the_active_pair() {
        let set = segment_set(40);
        let cfg = TrainConfig {
            pretrain_epochs: 3,
            batches_per_epoch: 4,
            n_pre: 3,
            seed: 5,
            ..TrainConfig::default()
        };
        let bundle = AutoencoderBundle::new(unit_norm(10), 2, &cfg).unwrap();
        let data = bundle.norm.batch_to_internal(&set.samples);
        let mut staged = bundle.clone();
        pretrain_stage(&mut staged, &data, 2, &cfg).unwrap();
        for l in [0, 2] {
            assert_eq!(staged.encoder.layers()[l], bundle.encoder.layers()[l]);
            assert_eq!(staged.decoder.layers()[l], bundle.decoder.layers()[l]);
        }
        assert_ne!(staged.encoder.layers()[1], bundle.encoder.layers()[1]);
        assert_ne!(staged.decoder.layers()[1], bundle.decoder.layers()[1]);
    }

    #[test]
    fn pretraining_stage_loss_decreases_on_linear_data() {
        let set = segment_set(100);
        let cfg = TrainConfig {
            pretrain_epochs: 60,
            batches_per_epoch: 5,
            n_pre: 2,
            seed: 8,
            ..TrainConfig::default()
        };
        let bundle = AutoencoderBundle::new(unit_norm(10), 1, &cfg).unwrap();
        let data = bundle.norm.batch_to_internal(&set.samples);
        let mut staged = bundle.clone();
        for stage in 1..=2 {
            let h = pretrain_stage(&mut staged, &data, stage, &cfg).unwrap();
            let avg = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
            let windows: Vec<f64> = h.chunks(10).map(avg).collect();
            for w in windows.windows(2) {
                assert!(w[1] <= w[0], "stage {stage}: {windows:?}");
            }
        }
    }

    #[test]
    fn mismatched_split_is_rejected() {
        let enc = build_network(&[10, 6, 2], &[Activation::Tanh, Activation::Sigmoid], 0).unwrap();
        let dec = build_network(&[2, 7, 10], &[Activation::Tanh, Activation::Tanh], 0).unwrap();
        let bundle = AutoencoderBundle::from_parts(enc, dec, None, None, unit_norm(10)).unwrap();
        assert!(encoder_pairs(&bundle, 2).is_err());
        assert!(encoder_pairs(&bundle, 1).is_ok());
    }
}
