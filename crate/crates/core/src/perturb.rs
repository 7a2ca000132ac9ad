//! Per-sample latent perturbation.
//!
//! Projected gradient steps on a latent offset `delta`, starting from zero,
//! with the pseudo density of the generated sample as the objective:
//!
//! ```text
//! delta <- clip(delta ± alpha * grad_delta rho(G(z + delta)), -eps, +eps)
//! ```
//!
//! `+` raises density (more typical, higher realism), `-` lowers it (more
//! unusual samples). The raw gradient is used, not its sign, so `alpha` is
//! scale-sensitive; `normalize_gradient` rescales it to unit L2 norm.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::DensityRegressor;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::mlp::Mlp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    Ascend,
    Descend,
}

impl std::str::FromStr for Direction {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ascend" => Ok(Direction::Ascend),
            "descend" => Ok(Direction::Descend),
            other => Err(Error::InvalidConfig(format!("direction must be ascend|descend, got {other}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PerturbConfig {
    pub steps: usize,
    pub step_size: f64,
    pub budget: f64,
    pub direction: Direction,
    pub normalize_gradient: bool,
}

impl Default for PerturbConfig {
    fn default() -> Self {
        Self::gan(Direction::Ascend)
    }
}

impl PerturbConfig {
    /// K=10, alpha=0.025, eps=0.1.
    pub fn gan(direction: Direction) -> Self {
        PerturbConfig {
            steps: 10,
            step_size: 0.025,
            budget: 0.1,
            direction,
            normalize_gradient: false,
        }
    }

    /// Noise-space settings for diffusion samplers: K=5, alpha=0.0025, eps=0.0125.
    pub fn diffusion(direction: Direction) -> Self {
        PerturbConfig {
            steps: 5,
            step_size: 0.0025,
            budget: 0.0125,
            direction,
            normalize_gradient: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::InvalidConfig("perturbation steps must be >= 1".into()));
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::InvalidConfig(format!("step size must be > 0, got {}", self.step_size)));
        }
        if !(self.budget >= 0.0 && self.budget.is_finite()) {
            return Err(Error::InvalidConfig(format!("budget must be >= 0, got {}", self.budget)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbResult {
    pub original_z: Vec<f32>,
    pub final_z: Vec<f32>,
    pub delta: Vec<f32>,
    pub density_before: f64,
    pub density_after: f64,
    /// Density at every iterate: `steps + 1` entries, first = before, last = after.
    pub density_trace: Vec<f64>,
    /// `‖delta‖∞` after each step.
    pub delta_norms: Vec<f32>,
}

/// Pseudo density of `G(z)` and its gradient with respect to `z`.
pub fn density_and_latent_gradient(gen: &Mlp, reg: &DensityRegressor, z: &[f32]) -> Result<(f64, Vec<f32>)> {
    let zm = Matrix::new(1, z.len(), z.to_vec())?;
    let gtrace = gen.forward_trace(&zm)?;
    let x = gtrace.output();
    if x.cols() != reg.input_dim() {
        return Err(Error::shape("generator output vs regressor input", reg.input_dim(), x.cols()));
    }
    let rtrace = reg.net.forward_trace(x)?;
    let rho = rtrace.output().get(0, 0) as f64;
    let dx = reg.net.backward(&rtrace, &Matrix::column(&[1.0]))?.input;
    let dz = gen.backward(&gtrace, &dx)?.input;
    Ok((rho, dz.into_data()))
}

/// Perturbs one latent vector.
pub fn perturb_latent(gen: &Mlp, reg: &DensityRegressor, z: &[f32], cfg: &PerturbConfig) -> Result<PerturbResult> {
    cfg.validate()?;
    if z.len() != gen.input_dim() {
        return Err(Error::shape("latent vector", gen.input_dim(), z.len()));
    }
    let eps = cfg.budget as f32;
    let sign = match cfg.direction {
        Direction::Ascend => 1.0f32,
        Direction::Descend => -1.0f32,
    };
    let mut delta = vec![0.0f32; z.len()];
    let mut trace = Vec::with_capacity(cfg.steps + 1);
    let mut norms = Vec::with_capacity(cfg.steps);

    if cfg.budget == 0.0 {
        let (rho, _) = density_and_latent_gradient(gen, reg, z)?;
        return Ok(PerturbResult {
            original_z: z.to_vec(),
            final_z: z.to_vec(),
            delta,
            density_before: rho,
            density_after: rho,
            density_trace: vec![rho; cfg.steps + 1],
            delta_norms: vec![0.0; cfg.steps],
        });
    }

    let shifted = |delta: &[f32]| -> Vec<f32> { z.iter().zip(delta).map(|(&a, &d)| a + d).collect() };
    for _ in 0..cfg.steps {
        let (rho, mut grad) = density_and_latent_gradient(gen, reg, &shifted(&delta))?;
        trace.push(rho);
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite(format!("latent gradient after densities {trace:?}")));
        }
        if cfg.normalize_gradient {
            let norm = grad.iter().map(|&g| (g as f64).powi(2)).sum::<f64>().sqrt();
            if norm > 0.0 {
                for g in &mut grad {
                    *g = (*g as f64 / norm) as f32;
                }
            }
        }
        let alpha = cfg.step_size as f32;
        for (d, g) in delta.iter_mut().zip(&grad) {
            *d = (*d + sign * alpha * g).clamp(-eps, eps);
        }
        norms.push(delta.iter().fold(0.0f32, |m, d| m.max(d.abs())));
    }
    let final_z = shifted(&delta);
    let (after, _) = density_and_latent_gradient(gen, reg, &final_z)?;
    trace.push(after);
    Ok(PerturbResult {
        original_z: z.to_vec(),
        final_z,
        delta,
        density_before: trace[0],
        density_after: after,
        density_trace: trace,
        delta_norms: norms,
    })
}

/// Perturbs every row of `zs` independently.
pub fn perturb_batch(gen: &Mlp, reg: &DensityRegressor, zs: &Matrix, cfg: &PerturbConfig) -> Result<Vec<PerturbResult>> {
    (0..zs.rows())
        .into_par_iter()
        .map(|i| perturb_latent(gen, reg, zs.row(i), cfg))
        .collect()
}
