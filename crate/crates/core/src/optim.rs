//! SGD and Adam over [`Mlp`] parameters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mlp::{Gradients, Mlp};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum OptimizerKind {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl OptimizerKind {
    pub fn adam() -> Self {
        OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Moments for one layer, laid out like the layer's parameters.
#[derive(Debug, Clone, PartialEq)]
struct Moments {
    weights: Vec<f64>,
    biases: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    kind: OptimizerKind,
    learning_rate: f64,
    first: Vec<Moments>,
    second: Vec<Moments>,
    step_count: u64,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, learning_rate: f64, net: &Mlp) -> Result<Self> {
        if !(learning_rate > 0.0 && learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!("learning rate must be positive, got {learning_rate}")));
        }
        let zeros = || {
            net.layers()
                .iter()
                .map(|l| Moments {
                    weights: vec![0.0; l.weights().len()],
                    biases: vec![0.0; l.biases().len()],
                })
                .collect::<Vec<_>>()
        };
        let (first, second) = match kind {
            OptimizerKind::Sgd => (Vec::new(), Vec::new()),
            OptimizerKind::Adam { .. } => (zeros(), zeros()),
        };
        Ok(OptimizerState {
            kind,
            learning_rate,
            first,
            second,
            step_count: 0,
        })
    }

    pub fn sgd(learning_rate: f64, net: &Mlp) -> Result<Self> {
        Self::new(OptimizerKind::Sgd, learning_rate, net)
    }

    pub fn adam(learning_rate: f64, net: &Mlp) -> Result<Self> {
        Self::new(OptimizerKind::adam(), learning_rate, net)
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// Applies one descent step: parameters move against `grads`.
    pub fn step(&mut self, net: &mut Mlp, grads: &Gradients) -> Result<()> {
        if grads.layers.len() != net.layers().len() {
            return Err(Error::shape("optimizer step layers", net.layers().len(), grads.layers.len()));
        }
        for (l, g) in net.layers().iter().zip(&grads.layers) {
            if l.weights().len() != g.weights.len() || l.biases().len() != g.biases.len() {
                return Err(Error::shape("optimizer step parameters", l.weights().len(), g.weights.len()));
            }
        }
        if !grads
            .layers
            .iter()
            .all(|g| g.weights.iter().chain(&g.biases).all(|v| v.is_finite()))
        {
            return Err(Error::NonFinite("optimizer gradients".into()));
        }
        if let OptimizerKind::Adam { .. } = self.kind {
            if self.first.len() != net.layers().len() {
                return Err(Error::shape("optimizer state", self.first.len(), net.layers().len()));
            }
        }

        self.step_count += 1;
        let lr = self.learning_rate;
        match self.kind {
            OptimizerKind::Sgd => {
                for (layer, g) in net.layers_mut().iter_mut().zip(&grads.layers) {
                    sgd_update(layer.weights_mut(), &g.weights, lr);
                    sgd_update(layer.biases_mut(), &g.biases, lr);
                }
            }
            OptimizerKind::Adam { beta1, beta2, eps } => {
                let t = self.step_count as i32;
                let bc1 = 1.0 - beta1.powi(t);
                let bc2 = 1.0 - beta2.powi(t);
                let hp = AdamHyper { lr, beta1, beta2, eps, bc1, bc2 };
                for (((layer, g), m), v) in net
                    .layers_mut()
                    .iter_mut()
                    .zip(&grads.layers)
                    .zip(&mut self.first)
                    .zip(&mut self.second)
                {
                    adam_update(layer.weights_mut(), &g.weights, &mut m.weights, &mut v.weights, &hp);
                    adam_update(layer.biases_mut(), &g.biases, &mut m.biases, &mut v.biases, &hp);
                }
            }
        }
        Ok(())
    }
}

fn sgd_update(params: &mut [f32], grads: &[f32], lr: f64) {
    for (p, &g) in params.iter_mut().zip(grads) {
        *p = (*p as f64 - lr * g as f64) as f32;
    }
}

struct AdamHyper {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    bc1: f64,
    bc2: f64,
}

fn adam_update(params: &mut [f32], grads: &[f32], m: &mut [f64], v: &mut [f64], hp: &AdamHyper) {
    for i in 0..params.len() {
        let g = grads[i] as f64;
        m[i] = hp.beta1 * m[i] + (1.0 - hp.beta1) * g;
        v[i] = hp.beta2 * v[i] + (1.0 - hp.beta2) * g * g;
        let mhat = m[i] / hp.bc1;
        let vhat = v[i] / hp.bc2;
        params[i] = (params[i] as f64 - hp.lr * mhat / (vhat.sqrt() + hp.eps)) as f32;
    }
}
