//! Independent f64 reference implementations used as test oracles.
#![allow(dead_code)]

use densctl_core::mlp::{Activation, Mlp};
use densctl_core::Matrix;
use statrs::statistics::{Data, Median, OrderStatistics, RankTieBreaker};

/// Plain f64 copy of an MLP: `(in, out, act, weights row-major (out, in), biases)`.
#[derive(Clone, Debug)]
pub struct RefNet {
    pub layers: Vec<RefLayer>,
}

#[derive(Clone, Debug)]
pub struct RefLayer {
    pub inp: usize,
    pub out: usize,
    pub act: Activation,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

pub fn act(a: Activation, x: f64) -> f64 {
    match a {
        Activation::Identity => x,
        Activation::Tanh => x.tanh(),
        Activation::Relu => {
            if x > 0.0 {
                x
            } else {
                0.0
            }
        }
        Activation::LeakyRelu => {
            if x > 0.0 {
                x
            } else {
                0.2 * x
            }
        }
    }
}

pub fn dact(a: Activation, x: f64) -> f64 {
    match a {
        Activation::Identity => 1.0,
        Activation::Tanh => 1.0 - x.tanh().powi(2),
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
                0.2
            }
        }
    }
}

fn piecewise(a: Activation) -> bool {
    matches!(a, Activation::Relu | Activation::LeakyRelu)
}

impl RefNet {
    pub fn of(net: &Mlp) -> Self {
        RefNet {
            layers: net
                .layers()
                .iter()
                .map(|l| RefLayer {
                    inp: l.in_dim(),
                    out: l.out_dim(),
                    act: l.activation(),
                    w: l.weights().iter().map(|&v| v as f64).collect(),
                    b: l.biases().iter().map(|&v| v as f64).collect(),
                })
                .collect(),
        }
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// Parameter `p` in the flat order: layer by layer, weights then biases.
    pub fn param_mut(&mut self, mut p: usize) -> &mut f64 {
        for l in &mut self.layers {
            if p < l.w.len() {
                return &mut l.w[p];
            }
            p -= l.w.len();
            if p < l.b.len() {
                return &mut l.b[p];
            }
            p -= l.b.len();
        }
        panic!("parameter index out of range")
    }

    /// Forward pass of one row; also returns the sign pattern of every
    /// pre-activation feeding a piecewise-linear activation.
    pub fn forward_row(&self, x: &[f64]) -> (Vec<f64>, Vec<bool>) {
        let mut a = x.to_vec();
        let mut pattern = Vec::new();
        for l in &self.layers {
            let mut next = vec![0.0; l.out];
            for o in 0..l.out {
                let mut s = l.b[o];
                for i in 0..l.inp {
                    s += l.w[o * l.inp + i] * a[i];
                }
                if piecewise(l.act) {
                    pattern.push(s > 0.0);
                }
                next[o] = act(l.act, s);
            }
            a = next;
        }
        (a, pattern)
    }

    /// Gradient of the scalar output with respect to the input row.
    pub fn input_grad_row(&self, x: &[f64]) -> Vec<f64> {
        let mut acts = vec![x.to_vec()];
        let mut pres = Vec::new();
        for l in &self.layers {
            let a = acts.last().unwrap();
            let pre: Vec<f64> = (0..l.out)
                .map(|o| l.b[o] + (0..l.inp).map(|i| l.w[o * l.inp + i] * a[i]).sum::<f64>())
                .collect();
            acts.push(pre.iter().map(|&s| act(l.act, s)).collect());
            pres.push(pre);
        }
        assert_eq!(self.layers.last().unwrap().out, 1);
        let mut g = vec![1.0];
        for (l, pre) in self.layers.iter().zip(&pres).rev() {
            let d: Vec<f64> = (0..l.out).map(|o| g[o] * dact(l.act, pre[o])).collect();
            g = (0..l.inp).map(|i| (0..l.out).map(|o| l.w[o * l.inp + i] * d[o]).sum()).collect();
        }
        g
    }

    pub fn forward(&self, x: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<bool>) {
        let mut outs = Vec::with_capacity(x.len());
        let mut pattern = Vec::new();
        for r in x {
            let (o, p) = self.forward_row(r);
            outs.push(o);
            pattern.extend(p);
        }
        (outs, pattern)
    }
}

pub fn rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| m.row_f64(i)).collect()
}

/// Relative error with a floor proportional to the largest reference magnitude.
pub fn rel_err(analytic: f64, numeric: f64, scale: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-3 * scale).max(1e-12)
}

/// Brute-force k-NN pseudo density: exact duplicates collapsed, sort by
/// (distance, index), mean of the first `k`, `N d^-n / sum d^-n`.
pub fn brute_density(points: &[Vec<f32>], k: usize, n: u32) -> (Vec<f64>, Vec<f64>) {
    let mut uniq: Vec<Vec<f32>> = Vec::new();
    let mut rep = Vec::new();
    for p in points {
        match uniq.iter().position(|u| u.iter().zip(p).all(|(a, b)| a == b)) {
            Some(j) => rep.push(j),
            None => {
                rep.push(uniq.len());
                uniq.push(p.clone());
            }
        }
    }
    let ud: Vec<f64> = (0..uniq.len())
        .map(|i| {
            let mut ds: Vec<(f64, usize)> = (0..uniq.len())
                .filter(|&j| j != i)
                .map(|j| {
                    let s: f64 = uniq[i].iter().zip(&uniq[j]).map(|(&a, &b)| (a as f64 - b as f64).powi(2)).sum();
                    (s.sqrt(), j)
                })
                .collect();
            ds.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            ds[..k].iter().map(|d| d.0).sum::<f64>() / k as f64
        })
        .collect();
    let d: Vec<f64> = rep.iter().map(|&r| ud[r]).collect();
    let inv: Vec<f64> = d.iter().map(|&v| v.powi(-(n as i32))).collect();
    let total: f64 = inv.iter().sum();
    let rho = inv.iter().map(|v| d.len() as f64 * v / total).collect();
    (rho, d)
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let ra = Data::new(a.to_vec()).ranks(RankTieBreaker::Average);
    let rb = Data::new(b.to_vec()).ranks(RankTieBreaker::Average);
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

pub fn median(xs: &[f64]) -> f64 {
    Data::new(xs.to_vec()).median()
}
