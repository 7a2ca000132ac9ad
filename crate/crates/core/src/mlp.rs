//! Fully-connected networks with explicit reverse-mode gradients.
//!
//! A layer computes `post = act(W · x + b)` with `W` stored row-major as
//! `(out_dim, in_dim)`. Batches are row-major matrices, one sample per row.
//!
//! Besides the usual parameter gradients, [`Mlp::backward`] returns the
//! gradient with respect to the input batch; latent perturbation chains it
//! through generator and density regressor. [`Mlp::input_gradient_penalty`]
//! differentiates the norm of that input gradient with respect to the
//! parameters (a second-order pass) for WGAN-GP style critics.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, Matrix};
use crate::rng::Rng;

/// Rows per rayon task in batched forward passes.
const PAR_CHUNK_ROWS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    Identity,
    Tanh,
    Relu,
    LeakyRelu,
}

impl Activation {
    pub const LEAKY_SLOPE: f64 = 0.2;

    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
            Activation::LeakyRelu => {
                if x > 0.0 {
                    x
                } else {
                    Self::LEAKY_SLOPE * x
                }
            }
        }
    }

    /// Derivative at pre-activation `x`.
    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu => {
                if x > 0.0 {
                    1.0
                } else {
                    Self::LEAKY_SLOPE
                }
            }
        }
    }

    /// Second derivative at pre-activation `x` (zero almost everywhere for the piecewise-linear ones).
    #[inline]
    pub fn second_derivative(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => {
                let t = x.tanh();
                -2.0 * t * (1.0 - t * t)
            }
            _ => 0.0,
        }
    }

    pub fn code(self) -> u8 {
        match self {
            Activation::Identity => 0,
            Activation::Tanh => 1,
            Activation::Relu => 2,
            Activation::LeakyRelu => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Activation::Identity),
            1 => Some(Activation::Tanh),
            2 => Some(Activation::Relu),
            3 => Some(Activation::LeakyRelu),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    in_dim: usize,
    out_dim: usize,
    activation: Activation,
    /// Row-major `(out_dim, in_dim)`.
    weights: Vec<f32>,
    biases: Vec<f32>,
}

impl Layer {
    pub fn new(
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        weights: Vec<f32>,
        biases: Vec<f32>,
    ) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::InvalidConfig("layer dims must be > 0".into()));
        }
        if weights.len() != in_dim * out_dim {
            return Err(Error::shape("Layer weights", in_dim * out_dim, weights.len()));
        }
        if biases.len() != out_dim {
            return Err(Error::shape("Layer biases", out_dim, biases.len()));
        }
        Ok(Layer {
            in_dim,
            out_dim,
            activation,
            weights,
            biases,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }
    pub fn out_dim(&self) -> usize {
        self.out_dim
    }
    pub fn activation(&self) -> Activation {
        self.activation
    }
    pub fn weights(&self) -> &[f32] {
        &self.weights
    }
    pub fn biases(&self) -> &[f32] {
        &self.biases
    }
    pub fn weights_mut(&mut self) -> &mut [f32] {
        &mut self.weights
    }
    pub fn biases_mut(&mut self) -> &mut [f32] {
        &mut self.biases
    }

    #[inline]
    fn row_weights(&self, o: usize) -> &[f32] {
        &self.weights[o * self.in_dim..(o + 1) * self.in_dim]
    }

    /// `out = Wᵀ v`.
    fn transpose_mul(&self, v: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for (o, &vo) in v.iter().enumerate() {
            if vo != 0.0 {
                axpy(vo, self.row_weights(o), out);
            }
        }
    }

    /// Pre-activation for one input row, `f64` accumulation.
    fn pre_activation_row(&self, x: &[f32], out: &mut [f64]) {
        for (o, slot) in out.iter_mut().enumerate() {
            *slot = self.biases[o] as f64 + dot(self.row_weights(o), x);
        }
    }

    /// Returns (pre-activation, post-activation) matrices for a batch.
    fn forward(&self, x: &Matrix) -> (Matrix, Matrix) {
        let rows = x.rows();
        let mut pre = Matrix::zeros(rows, self.out_dim);
        let mut post = Matrix::zeros(rows, self.out_dim);
        let od = self.out_dim;
        pre.data_mut()
            .par_chunks_mut(od * PAR_CHUNK_ROWS)
            .zip(post.data_mut().par_chunks_mut(od * PAR_CHUNK_ROWS))
            .enumerate()
            .for_each(|(chunk, (pre_c, post_c))| {
                let mut buf = vec![0.0f64; od];
                for (r, (pr, po)) in pre_c.chunks_exact_mut(od).zip(post_c.chunks_exact_mut(od)).enumerate() {
                    let row = chunk * PAR_CHUNK_ROWS + r;
                    self.pre_activation_row(x.row(row), &mut buf);
                    for o in 0..od {
                        pr[o] = buf[o] as f32;
                        po[o] = self.activation.apply(buf[o]) as f32;
                    }
                }
            });
        (pre, post)
    }
}

/// Per-layer parameter gradients, shaped like the layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradient {
    pub weights: Vec<f32>,
    pub biases: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGradient>,
    /// Gradient with respect to the input batch (same shape as the input).
    pub input: Matrix,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp, batch_rows: usize) -> Self {
        Gradients {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGradient {
                    weights: vec![0.0; l.weights.len()],
                    biases: vec![0.0; l.biases.len()],
                })
                .collect(),
            input: Matrix::zeros(batch_rows, net.input_dim()),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.input.is_finite()
            && self
                .layers
                .iter()
                .all(|l| l.weights.iter().chain(&l.biases).all(|v| v.is_finite()))
    }

    /// `self += scale * other` on parameter gradients (input gradients untouched).
    pub fn add_scaled(&mut self, other: &Gradients, scale: f32) -> Result<()> {
        if self.layers.len() != other.layers.len() {
            return Err(Error::shape("Gradients::add_scaled", self.layers.len(), other.layers.len()));
        }
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            if a.weights.len() != b.weights.len() || a.biases.len() != b.biases.len() {
                return Err(Error::shape("Gradients::add_scaled", a.weights.len(), b.weights.len()));
            }
            for (x, y) in a.weights.iter_mut().zip(&b.weights) {
                *x += scale * y;
            }
            for (x, y) in a.biases.iter_mut().zip(&b.biases) {
                *x += scale * y;
            }
        }
        Ok(())
    }
}

/// Cached activations from a forward pass, consumed by [`Mlp::backward`].
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    input: Matrix,
    pre: Vec<Matrix>,
    post: Vec<Matrix>,
}

impl ForwardTrace {
    pub fn output(&self) -> &Matrix {
        self.post.last().unwrap_or(&self.input)
    }

    pub fn input(&self) -> &Matrix {
        &self.input
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Layer>,
}

impl Mlp {
    /// Randomly initialized network. `sizes` lists input, hidden and output
    /// widths; hidden layers use `hidden`, the last layer uses `output`.
    ///
    /// Weights are drawn from N(0, gain/in_dim) with gain 2 for (leaky) ReLU
    /// and 1 otherwise; biases start at zero.
    pub fn new(sizes: &[usize], hidden: Activation, output: Activation, rng: &mut Rng) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::InvalidConfig("an MLP needs at least input and output sizes".into()));
        }
        let mut layers = Vec::with_capacity(sizes.len() - 1);
        for (l, pair) in sizes.windows(2).enumerate() {
            let (i, o) = (pair[0], pair[1]);
            let act = if l == sizes.len() - 2 { output } else { hidden };
            let gain = match act {
                Activation::Relu | Activation::LeakyRelu => 2.0,
                _ => 1.0,
            };
            let std = (gain / i.max(1) as f64).sqrt();
            let weights = (0..i * o).map(|_| (rng.normal() * std) as f32).collect();
            layers.push(Layer::new(i, o, act, weights, vec![0.0; o])?);
        }
        Ok(Mlp { layers })
    }

    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidConfig("an MLP needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].out_dim != pair[1].in_dim {
                return Err(Error::shape("Mlp::from_layers", pair[0].out_dim, pair[1].in_dim));
            }
        }
        Ok(Mlp { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim
    }

    /// Input width followed by every layer's output width.
    pub fn layer_sizes(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(|l| l.out_dim))
            .collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    fn check_input(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.input_dim() {
            return Err(Error::shape("Mlp input", self.input_dim(), x.cols()));
        }
        Ok(())
    }

    /// Inference-only forward pass.
    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        self.check_input(x)?;
        let mut h = x.clone();
        for layer in &self.layers {
            h = layer.forward(&h).1;
        }
        h.ensure_finite("MLP output")?;
        Ok(h)
    }

    /// Forward pass that keeps every intermediate activation for [`Mlp::backward`].
    pub fn forward_trace(&self, x: &Matrix) -> Result<ForwardTrace> {
        self.check_input(x)?;
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut post: Vec<Matrix> = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let (p, q) = layer.forward(post.last().unwrap_or(x));
            pre.push(p);
            post.push(q);
        }
        let trace = ForwardTrace {
            input: x.clone(),
            pre,
            post,
        };
        trace.output().ensure_finite("MLP output")?;
        Ok(trace)
    }

    /// Backpropagates `loss_grad` (dL/d output, one row per sample) through a cached forward pass.
    ///
    /// Parameter gradients are summed over the batch; scale `loss_grad` for a mean loss.
    pub fn backward(&self, trace: &ForwardTrace, loss_grad: &Matrix) -> Result<Gradients> {
        if trace.pre.len() != self.layers.len()
            || trace
                .pre
                .iter()
                .zip(&self.layers)
                .any(|(p, l)| p.cols() != l.out_dim)
        {
            return Err(Error::shape(
                "Mlp::backward trace",
                format!("{:?}", self.layer_sizes()),
                "trace from a different network",
            ));
        }
        let rows = trace.input.rows();
        if loss_grad.rows() != rows || loss_grad.cols() != self.output_dim() {
            return Err(Error::shape(
                "Mlp::backward loss_grad",
                format!("{}x{}", rows, self.output_dim()),
                format!("{}x{}", loss_grad.rows(), loss_grad.cols()),
            ));
        }

        let mut layer_grads = vec![None; self.layers.len()];
        let mut upstream = loss_grad.clone();
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let x = if l == 0 { &trace.input } else { &trace.post[l - 1] };
            let pre = &trace.pre[l];
            let (od, id) = (layer.out_dim, layer.in_dim);

            // delta = upstream ⊙ act'(pre)
            let delta: Vec<f64> = upstream
                .data()
                .iter()
                .zip(pre.data())
                .map(|(&u, &p)| u as f64 * layer.activation.derivative(p as f64))
                .collect();

            let mut gw = vec![0.0f64; od * id];
            let mut gb = vec![0.0f64; od];
            for r in 0..rows {
                let xr = x.row(r);
                for o in 0..od {
                    let d = delta[r * od + o];
                    if d == 0.0 {
                        continue;
                    }
                    gb[o] += d;
                    axpy(d, xr, &mut gw[o * id..(o + 1) * id]);
                }
            }

            let mut down = Matrix::zeros(rows, id);
            let mut buf = vec![0.0f64; id];
            for r in 0..rows {
                layer.transpose_mul(&delta[r * od..(r + 1) * od], &mut buf);
                for (slot, &v) in down.row_mut(r).iter_mut().zip(&buf) {
                    *slot = v as f32;
                }
            }

            layer_grads[l] = Some(LayerGradient {
                weights: gw.into_iter().map(|v| v as f32).collect(),
                biases: gb.into_iter().map(|v| v as f32).collect(),
            });
            upstream = down;
        }

        let grads = Gradients {
            layers: layer_grads.into_iter().map(|g| g.expect("every layer visited")).collect(),
            input: upstream,
        };
        if !grads.is_finite() {
            return Err(Error::NonFinite("MLP gradients".into()));
        }
        Ok(grads)
    }

    /// Mean over rows of `(‖∇ₓ f(x)‖ − target)²` for a scalar-output network,
    /// together with its gradient with respect to every parameter.
    ///
    /// The returned `Gradients::input` is zero: the penalty is only ever
    /// differentiated with respect to the critic's own parameters.
    pub fn input_gradient_penalty(&self, x: &Matrix, target: f64) -> Result<(f64, Gradients)> {
        self.check_input(x)?;
        if self.output_dim() != 1 {
            return Err(Error::shape("input_gradient_penalty output", 1, self.output_dim()));
        }
        let rows = x.rows();
        if rows == 0 {
            return Ok((0.0, Gradients::zeros_like(self, 0)));
        }
        let nl = self.layers.len();
        let mut gw: Vec<Vec<f64>> = self.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect();
        let mut gb: Vec<Vec<f64>> = self.layers.iter().map(|l| vec![0.0; l.biases.len()]).collect();
        let mut penalty = 0.0;

        let mut g: Vec<Vec<f64>> = self.layers.iter().map(|l| vec![0.0; l.out_dim]).collect();
        let mut q: Vec<Vec<f64>> = self.layers.iter().map(|l| vec![0.0; l.in_dim]).collect();
        let mut abar: Vec<Vec<f64>> = self.layers.iter().map(|l| vec![0.0; l.out_dim]).collect();
        let mut h: Vec<Vec<f64>> = Vec::with_capacity(nl + 1);
        h.push(vec![0.0; self.input_dim()]);
        h.extend(self.layers.iter().map(|l| vec![0.0; l.out_dim]));
        let mut a: Vec<Vec<f64>> = self.layers.iter().map(|l| vec![0.0; l.out_dim]).collect();
        let widest = self.layer_sizes().into_iter().max().unwrap_or(0);
        let mut v = vec![0.0f64; widest];
        let mut gbar = vec![0.0f64; widest];
        let mut e = vec![0.0f64; widest];
        let mut back = vec![0.0f64; widest];

        for r in 0..rows {
            // forward: h[l] is the input of layer l, a[l] its pre-activation
            for (slot, &xi) in h[0].iter_mut().zip(x.row(r)) {
                *slot = xi as f64;
            }
            for (l, layer) in self.layers.iter().enumerate() {
                let (lo, hi) = h.split_at_mut(l + 1);
                let hin = &lo[l];
                for o in 0..layer.out_dim {
                    let pre = layer.biases[o] as f64 + dot(layer.row_weights(o), hin);
                    a[l][o] = pre;
                    hi[0][o] = layer.activation.apply(pre);
                }
            }

            // input-gradient chain: g[l] = df/da[l], q[l] = df/dh[l]
            g[nl - 1][0] = self.layers[nl - 1].activation.derivative(a[nl - 1][0]);
            for l in (0..nl).rev() {
                self.layers[l].transpose_mul(&g[l], &mut q[l]);
                if l > 0 {
                    let act = self.layers[l - 1].activation;
                    for i in 0..q[l].len() {
                        g[l - 1][i] = act.derivative(a[l - 1][i]) * q[l][i];
                    }
                }
            }

            let norm = q[0].iter().map(|v| v * v).sum::<f64>().sqrt();
            penalty += (norm - target).powi(2);
            let coef = if norm > 0.0 {
                2.0 * (norm - target) / norm
            } else if target == 0.0 {
                2.0
            } else {
                0.0
            };
            // v = dP/dq[l], walking up from the input
            let id0 = self.input_dim();
            for i in 0..id0 {
                v[i] = coef * q[0][i];
            }
            for l in 0..nl {
                let layer = &self.layers[l];
                let (od, id) = (layer.out_dim, layer.in_dim);
                // q[l] = W_lᵀ g[l]
                for o in 0..od {
                    axpy(g[l][o], &v[..id], &mut gw[l][o * id..(o + 1) * id]);
                    gbar[o] = dot(layer.row_weights(o), &v[..id]);
                }
                let act = layer.activation;
                if l + 1 < nl {
                    // g[l] = act'(a[l]) ⊙ q[l+1]
                    for o in 0..od {
                        abar[l][o] = act.second_derivative(a[l][o]) * q[l + 1][o] * gbar[o];
                        v[o] = act.derivative(a[l][o]) * gbar[o];
                    }
                } else {
                    // g[last] = act'(a[last])
                    for o in 0..od {
                        abar[l][o] = act.second_derivative(a[l][o]) * gbar[o];
                    }
                }
            }

            // backprop the pre-activation adjoints through the forward graph
            e[..abar[nl - 1].len()].copy_from_slice(&abar[nl - 1]);
            for l in (0..nl).rev() {
                let layer = &self.layers[l];
                let (od, id) = (layer.out_dim, layer.in_dim);
                for o in 0..od {
                    gb[l][o] += e[o];
                    axpy(e[o], &h[l], &mut gw[l][o * id..(o + 1) * id]);
                }
                if l > 0 {
                    let act = self.layers[l - 1].activation;
                    layer.transpose_mul(&e[..od], &mut back[..id]);
                    for i in 0..id {
                        e[i] = abar[l - 1][i] + act.derivative(a[l - 1][i]) * back[i];
                    }
                }
            }
        }

        let scale = 1.0 / rows as f64;
        let grads = Gradients {
            layers: gw
                .into_iter()
                .zip(gb)
                .map(|(w, b)| LayerGradient {
                    weights: w.into_iter().map(|v| (v * scale) as f32).collect(),
                    biases: b.into_iter().map(|v| (v * scale) as f32).collect(),
                })
                .collect(),
            input: Matrix::zeros(rows, self.input_dim()),
        };
        let penalty = penalty * scale;
        if !penalty.is_finite() || !grads.is_finite() {
            return Err(Error::NonFinite("gradient penalty".into()));
        }
        Ok((penalty, grads))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_net(w: f32, b: f32) -> Mlp {
        Mlp::from_layers(vec![Layer::new(1, 1, Activation::Identity, vec![w], vec![b]).unwrap()]).unwrap()
    }

    #[test]
    fn zero_weights_give_zero_output() {
        let mut net = Mlp::new(&[3, 5, 2], Activation::Tanh, Activation::Identity, &mut Rng::new(0)).unwrap();
        for l in net.layers_mut() {
            l.weights_mut().fill(0.0);
            l.biases_mut().fill(0.0);
        }
        let x = Matrix::new(2, 3, vec![1.0, -2.0, 3.0, 0.5, 0.5, 9.0]).unwrap();
        assert!(net.forward(&x).unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn scalar_forward_and_backward() {
        let net = scalar_net(2.0, 1.0);
        let x = Matrix::column(&[3.0]);
        let tr = net.forward_trace(&x).unwrap();
        assert_eq!(tr.output().data(), &[7.0]);
        let g = net.backward(&tr, &Matrix::column(&[1.0])).unwrap();
        assert_eq!(g.layers[0].weights, vec![3.0]);
        assert_eq!(g.layers[0].biases, vec![1.0]);
        assert_eq!(g.input.data(), &[2.0]);
    }

    #[test]
    fn shapes() {
        let net = Mlp::new(&[4, 8, 8, 1], Activation::LeakyRelu, Activation::Identity, &mut Rng::new(1)).unwrap();
        let mut rng = Rng::new(2);
        let x = Matrix::new(16, 4, (0..64).map(|_| rng.normal() as f32).collect()).unwrap();
        let y = net.forward(&x).unwrap();
        assert_eq!((y.rows(), y.cols()), (16, 1));
        assert!(y.is_finite());
        assert_eq!(net.parameter_count(), 4 * 8 + 8 + 8 * 8 + 8 + 8 + 1);
        assert_eq!(net.layer_sizes(), vec![4, 8, 8, 1]);
    }

    #[test]
    fn dimension_mismatch_is_typed() {
        let net = scalar_net(1.0, 0.0);
        let x = Matrix::zeros(2, 3);
        assert!(matches!(net.forward(&x), Err(Error::ShapeMismatch { .. })));
        let tr = net.forward_trace(&Matrix::column(&[1.0, 2.0])).unwrap();
        assert!(matches!(net.backward(&tr, &Matrix::zeros(3, 1)), Err(Error::ShapeMismatch { .. })));
        let other = Mlp::new(&[1, 4, 1], Activation::Tanh, Activation::Identity, &mut Rng::new(0)).unwrap();
        assert!(matches!(other.backward(&tr, &Matrix::zeros(2, 1)), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn zero_loss_grad_gives_zero_gradients() {
        let net = Mlp::new(&[2, 6, 3], Activation::Tanh, Activation::Tanh, &mut Rng::new(5)).unwrap();
        let x = Matrix::new(3, 2, vec![0.1, 0.2, -0.3, 0.4, 1.0, -1.0]).unwrap();
        let tr = net.forward_trace(&x).unwrap();
        let g = net.backward(&tr, &Matrix::zeros(3, 3)).unwrap();
        assert!(g.input.data().iter().all(|&v| v == 0.0));
        assert!(g.layers.iter().all(|l| l.weights.iter().chain(&l.biases).all(|&v| v == 0.0)));
    }

    #[test]
    fn non_finite_output_is_an_error() {
        let net = scalar_net(f32::MAX, 0.0);
        assert!(matches!(net.forward(&Matrix::column(&[f32::MAX])), Err(Error::NonFinite(_))));
    }

    #[test]
    fn activation_codes_round_trip() {
        for a in [Activation::Identity, Activation::Tanh, Activation::Relu, Activation::LeakyRelu] {
            assert_eq!(Activation::from_code(a.code()), Some(a));
        }
        assert_eq!(Activation::from_code(9), None);
    }

    #[test]
    fn penalty_of_linear_critic() {
        // f(x) = 3x0 + 4x1 → ‖∇f‖ = 5 everywhere, P = (5-1)² = 16, dP/dw = 2·4·w/5
        let net = Mlp::from_layers(vec![Layer::new(2, 1, Activation::Identity, vec![3.0, 4.0], vec![0.5]).unwrap()]).unwrap();
        let x = Matrix::new(2, 2, vec![1.0, 2.0, -3.0, 0.0]).unwrap();
        let (p, g) = net.input_gradient_penalty(&x, 1.0).unwrap();
        assert!((p - 16.0).abs() < 1e-9);
        assert!((g.layers[0].weights[0] - 4.8).abs() < 1e-5);
        assert!((g.layers[0].weights[1] - 6.4).abs() < 1e-5);
        assert_eq!(g.layers[0].biases[0], 0.0);
    }
}
