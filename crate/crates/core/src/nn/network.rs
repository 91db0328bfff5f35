//! Fully connected feed-forward network with reverse-mode gradients.

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;

use super::Activation;
use crate::adam::{AdamConfig, AdamState};
use crate::error::{Error, Result};
use crate::rng;

/// `y = act(W x + b)` with `W` of shape `out x in`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn inputs(&self) -> usize {
        self.weights.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseNetwork {
    layers: Vec<DenseLayer>,
}

/// Zero biases, Glorot-uniform weights drawn from `seed`.
pub fn build_network(layer_dims: &[usize], activations: &[Activation], seed: u64) -> Result<DenseNetwork> {
    if layer_dims.len() < 2 {
        return Err(Error::invalid("a network needs at least an input and an output layer"));
    }
    if activations.len() != layer_dims.len() - 1 {
        return Err(Error::invalid(format!(
            "{} activations for {} connections",
            activations.len(),
            layer_dims.len() - 1
        )));
    }
    if let Some(pos) = layer_dims.iter().position(|&d| d == 0) {
        return Err(Error::invalid(format!("layer {pos} has zero width")));
    }
    let mut r = rng::rng(seed);
    let layers = layer_dims
        .windows(2)
        .zip(activations)
        .map(|(w, &activation)| {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let weights = Array2::from_shape_fn((fan_out, fan_in), |_| r.random_range(-limit..=limit));
            DenseLayer {
                weights,
                bias: Array1::zeros(fan_out),
                activation,
            }
        })
        .collect();
    Ok(DenseNetwork { layers })
}

/// Intermediate values of a batched forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input of every layer; `inputs[0]` is the network input.
    inputs: Vec<Array2<f64>>,
    /// Pre-activations of every layer.
    pre: Vec<Array2<f64>>,
    output: Array2<f64>,
}

impl ForwardCache {
    pub fn output(&self) -> &Array2<f64> {
        &self.output
    }

    pub fn into_output(self) -> Array2<f64> {
        self.output
    }

    /// Post-activation values of layer `l` (0 is the input).
    pub fn layer_values(&self, l: usize) -> &Array2<f64> {
        if l < self.inputs.len() {
            &self.inputs[l]
        } else {
            &self.output
        }
    }
}

/// Parameter gradients, one `(dW, db)` pair per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkGradients {
    pub layers: Vec<(Array2<f64>, Array1<f64>)>,
}

impl NetworkGradients {
    pub fn zeros_like(net: &DenseNetwork) -> Self {
        NetworkGradients {
            layers: net
                .layers
                .iter()
                .map(|l| (Array2::zeros(l.weights.raw_dim()), Array1::zeros(l.bias.len())))
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &NetworkGradients) {
        for ((w, b), (ow, ob)) in self.layers.iter_mut().zip(&other.layers) {
            *w += ow;
            *b += ob;
        }
    }

    /// Flattened in the same order as [`DenseNetwork::params`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in &self.layers {
            out.extend(w.iter());
            out.extend(b.iter());
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.layers
            .iter()
            .all(|(w, b)| w.iter().chain(b.iter()).all(|&v| v == 0.0))
    }
}

impl DenseNetwork {
    pub fn from_layers(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::invalid("network has no layers"));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].outputs() != pair[1].inputs() {
                return Err(Error::Shape(format!(
                    "layer {i} outputs {} values but layer {} expects {}",
                    pair[0].outputs(),
                    i + 1,
                    pair[1].inputs()
                )));
            }
        }
        for l in &layers {
            if l.bias.len() != l.outputs() {
                return Err(Error::Shape("bias length differs from layer width".into()));
            }
        }
        Ok(DenseNetwork { layers })
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs()
    }

    pub fn layer_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.input_dim()];
        dims.extend(self.layers.iter().map(DenseLayer::outputs));
        dims
    }

    pub fn activations(&self) -> Vec<Activation> {
        self.layers.iter().map(|l| l.activation).collect()
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            out.extend(l.weights.iter());
            out.extend(l.bias.iter());
        }
        out
    }

    pub fn set_params(&mut self, params: &[f64]) {
        assert_eq!(params.len(), self.num_params());
        let mut it = params.iter();
        for l in &mut self.layers {
            l.weights.iter_mut().for_each(|w| *w = *it.next().unwrap());
            l.bias.iter_mut().for_each(|b| *b = *it.next().unwrap());
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }

    /// Sub-network made of layers `range`.
    pub fn slice(&self, range: std::ops::Range<usize>) -> DenseNetwork {
        DenseNetwork {
            layers: self.layers[range].to_vec(),
        }
    }

    /// Overwrites layers starting at `offset` with those of `part`.
    pub fn splice(&mut self, offset: usize, part: &DenseNetwork) {
        for (i, l) in part.layers.iter().enumerate() {
            self.layers[offset + i] = l.clone();
        }
    }

    /// Forward pass over a batch (one sample per row), keeping what
    /// [`DenseNetwork::backward`] needs.
    pub fn forward_batch(&self, x: ArrayView2<f64>) -> ForwardCache {
        debug_assert_eq!(x.ncols(), self.input_dim());
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut current = x.to_owned();
        for l in &self.layers {
            let mut z = current.dot(&l.weights.t());
            z += &l.bias;
            let act = l.activation;
            let y = z.mapv(|v| act.apply(v));
            inputs.push(current);
            pre.push(z);
            current = y;
        }
        ForwardCache {
            inputs,
            pre,
            output: current,
        }
    }

    /// Forward pass without caching.
    pub fn predict_batch(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut current = x.to_owned();
        for l in &self.layers {
            let mut z = current.dot(&l.weights.t());
            z += &l.bias;
            let act = l.activation;
            z.mapv_inplace(|v| act.apply(v));
            current = z;
        }
        current
    }

    /// Single-sample forward pass.
    pub fn forward(&self, x: &[f64]) -> (Vec<f64>, ForwardCache) {
        let view = ArrayView2::from_shape((1, x.len()), x).expect("row vector");
        let cache = self.forward_batch(view);
        (cache.output.iter().copied().collect(), cache)
    }

    pub fn predict(&self, x: &[f64]) -> Vec<f64> {
        let mut current: Vec<f64> = x.to_vec();
        for l in &self.layers {
            let next: Vec<f64> = l
                .weights
                .rows()
                .into_iter()
                .zip(l.bias.iter())
                .map(|(row, b)| {
                    let z = row.iter().zip(&current).map(|(w, v)| w * v).sum::<f64>() + b;
                    l.activation.apply(z)
                })
                .collect();
            current = next;
        }
        current
    }

    /// Reverse pass: gradients of all parameters and of the input, given the
    /// gradient of a scalar loss with respect to the batch output.
    pub fn backward(&self, cache: &ForwardCache, upstream: ArrayView2<f64>) -> (NetworkGradients, Array2<f64>) {
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut delta = upstream.to_owned();
        for (i, l) in self.layers.iter().enumerate().rev() {
            let act = l.activation;
            Zip::from(&mut delta)
                .and(&cache.pre[i])
                .for_each(|d, &z| *d *= act.derivative(z));
            let dw = delta.t().dot(&cache.inputs[i]);
            let db = delta.sum_axis(Axis(0));
            let next = delta.dot(&l.weights);
            grads.push((dw, db));
            delta = next;
        }
        grads.reverse();
        (NetworkGradients { layers: grads }, delta)
    }
}

/// Per-parameter Adam state for a whole network.
#[derive(Debug, Clone)]
pub struct NetworkAdam {
    states: Vec<(AdamState, AdamState)>,
}

impl NetworkAdam {
    pub fn new(net: &DenseNetwork) -> Self {
        NetworkAdam {
            states: net
                .layers
                .iter()
                .map(|l| (AdamState::new(l.weights.len()), AdamState::new(l.bias.len())))
                .collect(),
        }
    }

    pub fn step(&mut self, cfg: &AdamConfig, net: &mut DenseNetwork, grads: &NetworkGradients) {
        for ((layer, (sw, sb)), (gw, gb)) in net.layers.iter_mut().zip(&mut self.states).zip(&grads.layers) {
            sw.step(
                cfg,
                layer.weights.as_slice_mut().expect("standard layout"),
                gw.as_standard_layout().as_slice().expect("standard layout"),
            );
            sb.step(
                cfg,
                layer.bias.as_slice_mut().expect("contiguous"),
                gb.as_slice().expect("contiguous"),
            );
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn random_net(dims: &[usize], acts: &[Activation], seed: u64) -> DenseNetwork {
        let mut net = build_network(dims, acts, seed).unwrap();
        // Nonzero biases so their gradients are exercised.
        let mut r = rng::rng(seed + 1000);
        for l in net.layers_mut() {
            l.bias.iter_mut().for_each(|b| *b = r.random_range(-0.5..0.5));
        }
        net
    }

    #[test]
    fn biases_start_at_zero_and_seed_is_deterministic() {
        let a = build_network(&[3, 3], &[Activation::Identity], 5).unwrap();
        assert!(a.layers()[0].bias.iter().all(|&b| b == 0.0));
        let b = build_network(&[3, 3], &[Activation::Identity], 5).unwrap();
        assert_eq!(a, b);
        let limit = (6.0f64 / 6.0).sqrt();
        assert!(a.layers()[0].weights.iter().all(|w| w.abs() <= limit));
    }

    #[test]
    fn benchmark_shape() {
        use Activation::*;
        let dims = [100, 100, 100, 5, 100, 100, 100];
        let acts = [TanhLeakyRelu, TanhLeakyRelu, Sigmoid, TanhLeakyRelu, TanhLeakyRelu, Tanh];
        let net = build_network(&dims, &acts, 1).unwrap();
        assert_eq!(net.layer_dims(), dims.to_vec());
        assert_eq!(net.layers()[2].weights.dim(), (5, 100));
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(build_network(&[3], &[], 0).is_err());
        assert!(build_network(&[3, 0, 2], &[Activation::Tanh, Activation::Tanh], 0).is_err());
        assert!(build_network(&[3, 2], &[Activation::Tanh, Activation::Tanh], 0).is_err());
    }

    #[test]
    fn identity_and_sigmoid_layers() {
        let mut net = build_network(&[3, 3], &[Activation::Identity], 0).unwrap();
        net.layers_mut()[0].weights = Array2::eye(3);
        let (y, _) = net.forward(&[0.3, -1.0, 2.0]);
        assert_eq!(y, vec![0.3, -1.0, 2.0]);

        let mut net = build_network(&[4, 2], &[Activation::Sigmoid], 0).unwrap();
        net.layers_mut()[0].weights.fill(0.0);
        let (y, _) = net.forward(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(y, vec![0.5, 0.5]);
    }

    #[test]
    fn forward_matches_hand_rolled_arithmetic() {
        use Activation::*;
        let net = random_net(&[4, 6, 3, 2], &[Tanh, TanhLeakyRelu, Sigmoid], 3);
        let x = [0.4, -0.7, 1.2, 0.05];
        // Independent loop-based evaluation.
        let mut v = x.to_vec();
        for l in net.layers() {
            let mut out = vec![0.0; l.outputs()];
            for (i, o) in out.iter_mut().enumerate() {
                let mut s = l.bias[i];
                for j in 0..l.inputs() {
                    s += l.weights[[i, j]] * v[j];
                }
                *o = l.activation.apply(s);
            }
            v = out;
        }
        let (y, _) = net.forward(&x);
        for (a, b) in y.iter().zip(&v) {
            assert!((a - b).abs() < 1e-12);
        }
        let p = net.predict(&x);
        for (a, b) in p.iter().zip(&v) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let net = random_net(&[3, 4, 2], &[Activation::Tanh, Activation::Sigmoid], 2);
        let x = array![[0.1, 0.2, 0.3], [-0.3, 0.0, 0.9]];
        let cache = net.forward_batch(x.view());
        let (g, dx) = net.backward(&cache, Array2::zeros((2, 2)).view());
        assert!(g.is_zero());
        assert!(dx.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn scalar_chain_rule() {
        // y = tanh(w2 * sigmoid(w1 x + b1) + b2), all widths 1.
        let mut net = build_network(&[1, 1, 1], &[Activation::Sigmoid, Activation::Tanh], 0).unwrap();
        let (w1, b1, w2, b2, x) = (0.7, -0.2, -1.3, 0.4, 0.9);
        net.set_params(&[w1, b1, w2, b2]);
        let (_, cache) = net.forward(&[x]);
        let (g, dx) = net.backward(&cache, array![[1.0]].view());
        let s = 1.0 / (1.0 + f64::exp(-(w1 * x + b1)));
        let t = (w2 * s + b2).tanh();
        let dt = 1.0 - t * t;
        let ds = s * (1.0 - s);
        let expected = [dt * w2 * ds * x, dt * w2 * ds, dt * s, dt];
        for (a, b) in g.flatten().iter().zip(expected) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!((dx[[0, 0]] - dt * w2 * ds * w1).abs() < 1e-14);
    }

    #[test]
    fn gradients_match_finite_differences() {
        use Activation::*;
        let mut net = random_net(&[5, 7, 4, 3], &[TanhLeakyRelu, Tanh, Sigmoid], 9);
        let mut r = rng::rng(4);
        let x = Array2::from_shape_fn((4, 5), |_| r.random_range(-1.0..1.0));
        let weights = Array2::from_shape_fn((4, 3), |_| r.random_range(-1.0..1.0));
        // Loss = sum(weights * output).
        let loss = |n: &DenseNetwork| (n.predict_batch(x.view()) * &weights).sum();
        let cache = net.forward_batch(x.view());
        let (g, _) = net.backward(&cache, weights.view());
        let analytic = g.flatten();
        let base = net.params();
        let h = 1e-6;
        let mut probes = 0;
        for k in 0..base.len() {
            let mut p = base.clone();
            p[k] += h;
            net.set_params(&p);
            let up = loss(&net);
            p[k] -= 2.0 * h;
            net.set_params(&p);
            let down = loss(&net);
            let fd = (up - down) / (2.0 * h);
            let scale = fd.abs().max(analytic[k].abs()).max(1e-3);
            assert!((fd - analytic[k]).abs() / scale < 1e-5, "param {k}: fd {fd} vs {}", analytic[k]);
            probes += 1;
        }
        net.set_params(&base);
        assert!(probes >= 50);
    }
}
