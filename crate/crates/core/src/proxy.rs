//! Fully connected proxy network in NTK parameterization.
//!
//! Layer `l` (1-based, `L` layers in total) computes
//!
//! ```text
//! z_l = W_l · a_{l-1} / sqrt(d_l) + beta · b_l
//! a_l = act(z_l)        for l < L
//! a_L = z_L             (affine output layer)
//! ```
//!
//! where `d_l` is the output width of layer `l` and `a_0` is the input feature.
//! Writing `W̃_l = [W_l, b_l]` and `ã_{l-1} = [a_{l-1} / sqrt(d_l); beta]` gives
//! `z_l = W̃_l ã_{l-1}`, which is the form the gradient kernels factor over.
//!
//! Flat parameter order (used by [`ProxyNetwork::params`] and
//! [`ProxyNetwork::param_jacobian`]): layers in order; within a layer, the
//! weight matrix in column-major order followed by the bias vector.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg::{dot, DenseMatrix};

/// Bias coefficient used when none is configured.
pub const DEFAULT_BETA: f64 = 0.1;
/// Hidden widths used when none are configured.
pub const DEFAULT_HIDDEN: [usize; 2] = [256, 256];

static NEXT_VERSION: AtomicU64 = AtomicU64::new(1);

fn next_version() -> u64 {
    NEXT_VERSION.fetch_add(1, Ordering::Relaxed)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
        }
    }

    /// Derivative; the ReLU subgradient at 0 is taken as 0.
    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }

    pub fn code(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Identity => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Activation::Relu),
            1 => Some(Activation::Identity),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProxyLayer {
    /// `d_l × d_{l-1}`.
    pub weight: DenseMatrix,
    /// Length `d_l`.
    pub bias: Vec<f64>,
}

impl ProxyLayer {
    pub fn new(weight: DenseMatrix, bias: Vec<f64>) -> Result<Self> {
        check_len(weight.rows(), bias.len())?;
        if let Some(pos) = bias.iter().position(|b| !b.is_finite()) {
            return Err(Error::NonFinite(pos));
        }
        Ok(Self { weight, bias })
    }

    pub fn width(&self) -> usize {
        self.weight.rows()
    }

    pub fn input_width(&self) -> usize {
        self.weight.cols()
    }

    /// The `1/sqrt(d_l)` rescale applied to this layer's input.
    pub fn scale(&self) -> f64 {
        1.0 / (self.width() as f64).sqrt()
    }

    fn num_params(&self) -> usize {
        self.weight.rows() * self.weight.cols() + self.bias.len()
    }
}

#[derive(Clone, Debug)]
pub struct ProxyNetwork {
    layers: Vec<ProxyLayer>,
    beta: f64,
    activation: Activation,
    version: u64,
}

impl PartialEq for ProxyNetwork {
    /// Parameter equality; the version tag is ignored.
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers
            && self.beta == other.beta
            && self.activation == other.activation
    }
}

/// Per-sample quantities the gradient kernels are built from.
#[derive(Clone, Debug)]
pub struct LayerTrace {
    /// Version of the network that produced the trace.
    pub version: u64,
    /// For each layer `l`, the augmented input `[a_{l-1} / sqrt(d_l); beta]`.
    pub augmented_inputs: Vec<Vec<f64>>,
    /// For each layer `l`, `∂ output / ∂ z_l` as a `d_L × d_l` matrix.
    pub output_jacobians: Vec<DenseMatrix>,
}

impl LayerTrace {
    pub fn num_layers(&self) -> usize {
        self.augmented_inputs.len()
    }
}

/// Activations and pre-activations of a batch, kept for backprop.
struct BatchForward {
    /// `acts[0]` is the input; `acts[l]` is `a_l` (column-major `d_l × n`).
    acts: Vec<Vec<f64>>,
    /// `pre[l-1]` is `z_l`.
    pre: Vec<Vec<f64>>,
}

impl ProxyNetwork {
    /// Assembles a network from explicit layers. Adjacent widths must chain.
    pub fn new(layers: Vec<ProxyLayer>, beta: f64, activation: Activation) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArgument(
                "proxy network needs at least one layer".into(),
            ));
        }
        if beta < 0.0 || !beta.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "beta must be finite and nonnegative, got {beta}"
            )));
        }
        for pair in layers.windows(2) {
            check_len(pair[0].width(), pair[1].input_width())?;
        }
        if layers.iter().any(|l| l.width() == 0) {
            return Err(Error::InvalidArgument(
                "layer widths must be positive".into(),
            ));
        }
        Ok(Self {
            layers,
            beta,
            activation,
            version: next_version(),
        })
    }

    /// Random initialization: every weight and bias drawn i.i.d. from N(0, 1).
    pub fn init(
        input_dim: usize,
        hidden: &[usize],
        output_dim: usize,
        beta: f64,
        activation: Activation,
        seed: u64,
    ) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut widths = Vec::with_capacity(hidden.len() + 2);
        widths.push(input_dim);
        widths.extend_from_slice(hidden);
        widths.push(output_dim);
        let mut layers = Vec::with_capacity(widths.len() - 1);
        for w in widths.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let data: Vec<f64> = (0..fan_in * fan_out)
                .map(|_| StandardNormal.sample(&mut rng))
                .collect();
            let bias: Vec<f64> = (0..fan_out)
                .map(|_| StandardNormal.sample(&mut rng))
                .collect();
            layers.push(ProxyLayer::new(
                DenseMatrix::new(fan_out, fan_in, data)?,
                bias,
            )?);
        }
        Self::new(layers, beta, activation)
    }

    pub fn layers(&self) -> &[ProxyLayer] {
        &self.layers
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    /// Changes whenever the parameters change.
    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_width()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].width()
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(ProxyLayer::num_params).sum()
    }

    /// Immutable shared view for parallel kernel assembly.
    pub fn snapshot(&self) -> ProxySnapshot {
        ProxySnapshot(Arc::new(self.clone()))
    }

    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for layer in &self.layers {
            out.extend_from_slice(layer.weight.data());
            out.extend_from_slice(&layer.bias);
        }
        out
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        check_len(self.num_params(), params.len())?;
        if let Some(pos) = params.iter().position(|p| !p.is_finite()) {
            return Err(Error::NonFinite(pos));
        }
        let mut offset = 0;
        for layer in &mut self.layers {
            let (rows, cols) = (layer.weight.rows(), layer.weight.cols());
            let nw = rows * cols;
            layer.weight = DenseMatrix::new(rows, cols, params[offset..offset + nw].to_vec())?;
            offset += nw;
            layer.bias.copy_from_slice(&params[offset..offset + rows]);
            offset += rows;
        }
        self.version = next_version();
        Ok(())
    }

    fn is_output(&self, l: usize) -> bool {
        l + 1 == self.layers.len()
    }

    /// Network output only.
    pub fn predict(&self, m: &[f64]) -> Result<Vec<f64>> {
        check_len(self.input_dim(), m.len())?;
        let mut a = m.to_vec();
        for (l, layer) in self.layers.iter().enumerate() {
            let z = self.pre_activation(layer, &a);
            a = if self.is_output(l) {
                z
            } else {
                z.into_iter().map(|v| self.activation.apply(v)).collect()
            };
        }
        Ok(a)
    }

    fn pre_activation(&self, layer: &ProxyLayer, input: &[f64]) -> Vec<f64> {
        let scale = layer.scale();
        let w = &layer.weight;
        let mut z: Vec<f64> = layer.bias.iter().map(|b| self.beta * b).collect();
        let mut acc = vec![0.0; w.rows()];
        for (j, &x) in input.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            for (acc_i, w_ij) in acc.iter_mut().zip(w.column(j)) {
                *acc_i += w_ij * x;
            }
        }
        for (zi, ai) in z.iter_mut().zip(acc) {
            *zi += scale * ai;
        }
        z
    }

    /// Forward pass recording everything the NTK factorization needs.
    pub fn forward(&self, m: &[f64]) -> Result<(Vec<f64>, LayerTrace)> {
        check_len(self.input_dim(), m.len())?;
        if let Some(pos) = m.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite(pos));
        }
        let nl = self.layers.len();
        let mut augmented = Vec::with_capacity(nl);
        let mut pre = Vec::with_capacity(nl);
        let mut a = m.to_vec();
        for (l, layer) in self.layers.iter().enumerate() {
            let scale = layer.scale();
            let mut aug: Vec<f64> = a.iter().map(|x| x * scale).collect();
            aug.push(self.beta);
            augmented.push(aug);
            let z = self.pre_activation(layer, &a);
            a = if self.is_output(l) {
                z.clone()
            } else {
                z.iter().map(|&v| self.activation.apply(v)).collect()
            };
            pre.push(z);
        }
        let output = a;

        // ∂out/∂z_L = I, then ∂out/∂z_l = ∂out/∂z_{l+1} · W_{l+1}/sqrt(d_{l+1}) · diag(act'(z_l)).
        let d_out = self.output_dim();
        let mut jacobians = vec![DenseMatrix::identity(d_out); nl];
        for l in (0..nl - 1).rev() {
            let next = &self.layers[l + 1];
            let upstream = &jacobians[l + 1];
            let scale = next.scale();
            let width = self.layers[l].width();
            let mut data = Vec::with_capacity(d_out * width);
            for j in 0..width {
                let gate = self.activation.derivative(pre[l][j]);
                let wcol = next.weight.column(j);
                for k in 0..d_out {
                    let v = if gate == 0.0 {
                        0.0
                    } else {
                        let mut s = 0.0;
                        for (r, w) in wcol.iter().enumerate() {
                            s += upstream.get(k, r) * w;
                        }
                        s * scale * gate
                    };
                    data.push(v);
                }
            }
            jacobians[l] = DenseMatrix::new(d_out, width, data)?;
        }
        Ok((
            output,
            LayerTrace {
                version: self.version,
                augmented_inputs: augmented,
                output_jacobians: jacobians,
            },
        ))
    }

    /// Full parameter Jacobian: a `num_params × d_L` matrix whose column `k`
    /// is `∇θ output_k`, in the flat parameter order.
    pub fn param_jacobian(&self, m: &[f64]) -> Result<DenseMatrix> {
        check_len(self.input_dim(), m.len())?;
        let fwd = self.batch_forward(m, 1);
        let d_out = self.output_dim();
        let mut data = Vec::with_capacity(self.num_params() * d_out);
        for k in 0..d_out {
            let mut seed = vec![0.0; d_out];
            seed[k] = 1.0;
            data.extend(self.backprop(&fwd, seed, 1));
        }
        DenseMatrix::new(self.num_params(), d_out, data)
    }

    fn batch_forward(&self, inputs: &[f64], n: usize) -> BatchForward {
        let mut acts = vec![inputs.to_vec()];
        let mut pre = Vec::with_capacity(self.layers.len());
        for (l, layer) in self.layers.iter().enumerate() {
            let d_in = layer.input_width();
            let prev = &acts[l];
            let mut z = Vec::with_capacity(layer.width() * n);
            for s in 0..n {
                z.extend(self.pre_activation(layer, &prev[s * d_in..(s + 1) * d_in]));
            }
            let a = if self.is_output(l) {
                z.clone()
            } else {
                z.iter().map(|&v| self.activation.apply(v)).collect()
            };
            pre.push(z);
            acts.push(a);
        }
        BatchForward { acts, pre }
    }

    /// Accumulates `Σ_s δ_s ⋅ ∂out_s/∂θ` given output-space seeds `delta` (`d_L × n`).
    fn backprop(&self, fwd: &BatchForward, mut delta: Vec<f64>, n: usize) -> Vec<f64> {
        let nl = self.layers.len();
        let mut grads: Vec<Vec<f64>> = vec![Vec::new(); nl];
        for l in (0..nl).rev() {
            let layer = &self.layers[l];
            let (d_l, d_in) = (layer.width(), layer.input_width());
            let scale = layer.scale();
            let input = &fwd.acts[l];
            let mut gw = vec![0.0; d_l * d_in];
            let mut gb = vec![0.0; d_l];
            for s in 0..n {
                let ds = &delta[s * d_l..(s + 1) * d_l];
                let xs = &input[s * d_in..(s + 1) * d_in];
                for (j, &x) in xs.iter().enumerate() {
                    if x == 0.0 {
                        continue;
                    }
                    let sx = scale * x;
                    for (g, d) in gw[j * d_l..(j + 1) * d_l].iter_mut().zip(ds) {
                        *g += d * sx;
                    }
                }
                for (g, d) in gb.iter_mut().zip(ds) {
                    *g += self.beta * d;
                }
            }
            gw.extend(gb);
            grads[l] = gw;
            if l > 0 {
                let z_prev = &fwd.pre[l - 1];
                let mut next = Vec::with_capacity(d_in * n);
                for s in 0..n {
                    let ds = &delta[s * d_l..(s + 1) * d_l];
                    for j in 0..d_in {
                        let gate = self.activation.derivative(z_prev[s * d_in + j]);
                        next.push(if gate == 0.0 {
                            0.0
                        } else {
                            scale * gate * dot(layer.weight.column(j), ds)
                        });
                    }
                }
                delta = next;
            }
        }
        grads.into_iter().flatten().collect()
    }

    /// Mean squared error over all samples and output coordinates, and its
    /// gradient in flat parameter order.
    pub fn mse_and_gradient(
        &self,
        inputs: &DenseMatrix,
        targets: &DenseMatrix,
    ) -> Result<(f64, Vec<f64>)> {
        self.check_training_shapes(inputs, targets)?;
        let n = inputs.cols();
        let d_out = self.output_dim();
        let fwd = self.batch_forward(inputs.data(), n);
        let out = &fwd.acts[self.layers.len()];
        let resid: Vec<f64> = out.iter().zip(targets.data()).map(|(o, t)| o - t).collect();
        let denom = (n * d_out) as f64;
        let loss = dot(&resid, &resid) / denom;
        let seeds: Vec<f64> = resid.iter().map(|r| 2.0 * r / denom).collect();
        let grad = self.backprop(&fwd, seeds, n);
        Ok((loss, grad))
    }

    /// Mean squared error over all samples and output coordinates.
    pub fn mse(&self, inputs: &DenseMatrix, targets: &DenseMatrix) -> Result<f64> {
        self.check_training_shapes(inputs, targets)?;
        let fwd = self.batch_forward(inputs.data(), inputs.cols());
        let out = &fwd.acts[self.layers.len()];
        let resid: Vec<f64> = out.iter().zip(targets.data()).map(|(o, t)| o - t).collect();
        Ok(dot(&resid, &resid) / (targets.data().len().max(1)) as f64)
    }

    fn check_training_shapes(&self, inputs: &DenseMatrix, targets: &DenseMatrix) -> Result<()> {
        check_len(self.input_dim(), inputs.rows())?;
        check_len(self.output_dim(), targets.rows())?;
        check_len(inputs.cols(), targets.cols())?;
        if inputs.cols() == 0 {
            return Err(Error::InvalidArgument("training set is empty".into()));
        }
        Ok(())
    }

    /// Full-batch gradient descent on the MSE. Returns the loss at the start
    /// of every epoch (`epochs` entries).
    pub fn train_mse(
        &mut self,
        inputs: &DenseMatrix,
        targets: &DenseMatrix,
        epochs: usize,
        lr: f64,
    ) -> Result<Vec<f64>> {
        if lr <= 0.0 || !lr.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be positive, got {lr}"
            )));
        }
        self.check_training_shapes(inputs, targets)?;
        let mut params = self.params();
        let mut curve = Vec::with_capacity(epochs);
        for epoch in 0..epochs {
            let (loss, grad) = self.mse_and_gradient(inputs, targets)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch });
            }
            curve.push(loss);
            for (p, g) in params.iter_mut().zip(&grad) {
                *p -= lr * g;
            }
            if params.iter().any(|p| !p.is_finite()) {
                return Err(Error::NonFiniteLoss { epoch });
            }
            self.set_params(&params)?;
        }
        Ok(curve)
    }
}

/// Frozen, shareable network state. Traces produced from the same snapshot
/// carry the same version tag.
#[derive(Clone, Debug)]
pub struct ProxySnapshot(Arc<ProxyNetwork>);

impl ProxySnapshot {
    pub fn version(&self) -> u64 {
        self.0.version
    }

    pub fn network(&self) -> &ProxyNetwork {
        &self.0
    }
}

impl std::ops::Deref for ProxySnapshot {
    type Target = ProxyNetwork;

    fn deref(&self) -> &ProxyNetwork {
        &self.0
    }
}

impl From<ProxyNetwork> for ProxySnapshot {
    fn from(net: ProxyNetwork) -> Self {
        ProxySnapshot(Arc::new(net))
    }
}
