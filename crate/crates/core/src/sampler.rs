//! Inference-time importance sampling, truncation, and acceptance analytics.
//!
//! Each attempt draws a latent `z`, generates `x = G(z)`, scores it with the
//! pseudo density `rho(x)` and draws `u ~ U(0, 1)`. With importance weight
//! `w` for samples above the threshold `tau`:
//!
//! * `w > 1`: accept if `rho > tau` or `u < 1/w`
//! * `w <= 1`: accept if `rho < tau` or `u < w`
//!
//! Both comparisons are strict, so `rho == tau` always falls through to the
//! random branch. Attempts continue until `K` samples are accepted.

use serde::{Deserialize, Serialize};

use crate::density::DensityScorer;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::mlp::Mlp;
use crate::rng::Rng;

/// Weights swept for the precision/recall trade-off.
pub const WEIGHT_SWEEP: [f64; 6] = [0.01, 0.03, 0.1, 10.0, 33.0, 100.0];
/// Threshold percentiles swept for the precision/recall trade-off.
pub const TAU_PERCENTILES: [f64; 3] = [20.0, 50.0, 80.0];

pub const DEFAULT_MAX_ATTEMPTS_PER_ACCEPT: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingConfig {
    pub threshold: f64,
    pub weight: f64,
    pub max_attempts_per_accept: usize,
}

impl SamplingConfig {
    pub fn new(threshold: f64, weight: f64) -> Self {
        SamplingConfig {
            threshold,
            weight,
            max_attempts_per_accept: DEFAULT_MAX_ATTEMPTS_PER_ACCEPT,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.weight > 0.0 && self.weight.is_finite()) {
            return Err(Error::InvalidConfig(format!("importance weight must be > 0, got {}", self.weight)));
        }
        if self.threshold.is_nan() {
            return Err(Error::InvalidConfig("threshold is NaN".into()));
        }
        if self.max_attempts_per_accept == 0 {
            return Err(Error::InvalidConfig("max_attempts_per_accept must be >= 1".into()));
        }
        Ok(())
    }

    /// The same threshold with weight `1/w`, as used on generated batches during fine-tuning.
    pub fn reciprocal(&self) -> Self {
        SamplingConfig {
            weight: 1.0 / self.weight,
            ..*self
        }
    }
}

/// The accept/reject rule for one attempt.
#[inline]
pub fn accepts(density: f64, threshold: f64, weight: f64, u: f64) -> bool {
    if weight > 1.0 {
        density > threshold || u < 1.0 / weight
    } else {
        density < threshold || u < weight
    }
}

/// Probability that a sample with this density is accepted.
pub fn acceptance_probability(density: f64, threshold: f64, weight: f64) -> f64 {
    if weight > 1.0 {
        if density > threshold {
            1.0
        } else {
            1.0 / weight
        }
    } else if density < threshold {
        1.0
    } else {
        weight
    }
}

/// Expected acceptance rate when a fraction `frac_below` of generated samples
/// falls below the threshold (and none sits exactly on it).
///
/// For `w <= 1` this is `frac_below + (1 - frac_below) * w`; for `w > 1` the
/// mirrored `(1 - frac_below) + frac_below / w`.
pub fn acceptance_rate(frac_below: f64, weight: f64) -> f64 {
    if weight > 1.0 {
        (1.0 - frac_below) + frac_below / weight
    } else {
        frac_below + (1.0 - frac_below) * weight
    }
}

/// Expected generator evaluations per accepted sample.
pub fn cost_multiplier(frac_below: f64, weight: f64) -> f64 {
    1.0 / acceptance_rate(frac_below, weight)
}

/// Anything that maps latent rows to output rows.
pub trait LatentGenerator {
    fn latent_dim(&self) -> usize;
    fn generate(&self, z: &Matrix) -> Result<Matrix>;
}

impl LatentGenerator for Mlp {
    fn latent_dim(&self) -> usize {
        self.input_dim()
    }

    fn generate(&self, z: &Matrix) -> Result<Matrix> {
        self.forward(z)
    }
}

/// `n` standard-normal latent rows.
pub fn draw_latents(rng: &mut Rng, n: usize, dim: usize) -> Matrix {
    let data = (0..n * dim).map(|_| rng.normal() as f32).collect();
    Matrix::new(n, dim, data).expect("length matches by construction")
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    /// Accepted latents, in attempt order.
    pub latents: Matrix,
    pub outputs: Matrix,
    /// Pseudo densities of the accepted outputs.
    pub densities: Vec<f64>,
    /// One flag per attempt.
    pub accepted_flags: Vec<bool>,
    pub attempts: usize,
}

impl SampleBatch {
    pub fn accepted(&self) -> usize {
        self.latents.rows()
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.attempts == 0 {
            return 0.0;
        }
        self.accepted() as f64 / self.attempts as f64
    }
}

/// Draws a block of attempts: latent row `i` then uniform `i`, in attempt order.
fn draw_attempts(rng: &mut Rng, n: usize, dim: usize) -> (Matrix, Vec<f64>) {
    let mut data = Vec::with_capacity(n * dim);
    let mut us = Vec::with_capacity(n);
    for _ in 0..n {
        for _ in 0..dim {
            data.push(rng.normal() as f32);
        }
        us.push(rng.uniform());
    }
    (Matrix::new(n, dim, data).expect("length matches by construction"), us)
}

fn check_compat<G: LatentGenerator + ?Sized, S: DensityScorer + ?Sized>(gen: &G, scorer: &S, out: &Matrix) -> Result<()> {
    if out.cols() != scorer.input_dim() {
        return Err(Error::shape("generator output vs density input", scorer.input_dim(), out.cols()));
    }
    let _ = gen;
    Ok(())
}

/// Runs attempts until `k` samples are accepted.
///
/// Fails with [`Error::Starved`] after `max_attempts_per_accept` consecutive
/// rejections.
pub fn importance_sample<G, S>(gen: &G, scorer: &S, cfg: &SamplingConfig, k: usize, rng: &mut Rng) -> Result<SampleBatch>
where
    G: LatentGenerator + ?Sized,
    S: DensityScorer + ?Sized,
{
    cfg.validate()?;
    if k == 0 {
        return Err(Error::InvalidConfig("requested sample count must be >= 1".into()));
    }
    let dim = gen.latent_dim();
    let mut latents = Matrix::zeros(0, dim);
    let mut outputs: Option<Matrix> = None;
    let mut densities = Vec::with_capacity(k);
    let mut flags = Vec::new();
    let mut rejections = 0usize;

    'outer: while densities.len() < k {
        let remaining = k - densities.len();
        let block = (2 * remaining).clamp(64, 4096);
        let (z, us) = draw_attempts(rng, block, dim);
        let x = gen.generate(&z)?;
        check_compat(gen, scorer, &x)?;
        let rho = scorer.score(&x)?;
        for i in 0..block {
            if !rho[i].is_finite() {
                return Err(Error::NonFinite("pseudo density of a generated sample".into()));
            }
            let ok = accepts(rho[i], cfg.threshold, cfg.weight, us[i]);
            flags.push(ok);
            if ok {
                rejections = 0;
                latents.push_row(z.row(i))?;
                let out = outputs.get_or_insert_with(|| Matrix::zeros(0, x.cols()));
                out.push_row(x.row(i))?;
                densities.push(rho[i]);
                if densities.len() == k {
                    break 'outer;
                }
            } else {
                rejections += 1;
                if rejections >= cfg.max_attempts_per_accept {
                    return Err(Error::Starved {
                        rejections,
                        tau: cfg.threshold,
                        weight: cfg.weight,
                    });
                }
            }
        }
    }

    let attempts = flags.len();
    Ok(SampleBatch {
        latents,
        outputs: outputs.expect("k >= 1 accepted"),
        densities,
        accepted_flags: flags,
        attempts,
    })
}

/// Outcome of a fixed number of attempts.
#[derive(Debug, Clone, PartialEq)]
pub struct ScreenResult {
    pub densities: Vec<f64>,
    pub accepted_flags: Vec<bool>,
}

impl ScreenResult {
    pub fn acceptance_rate(&self) -> f64 {
        self.accepted_flags.iter().filter(|&&b| b).count() as f64 / self.accepted_flags.len().max(1) as f64
    }
}

/// Runs exactly `attempts` attempts with the same draw order as
/// [`importance_sample`] and reports every decision.
pub fn screen_attempts<G, S>(gen: &G, scorer: &S, cfg: &SamplingConfig, attempts: usize, rng: &mut Rng) -> Result<ScreenResult>
where
    G: LatentGenerator + ?Sized,
    S: DensityScorer + ?Sized,
{
    cfg.validate()?;
    let (z, us) = draw_attempts(rng, attempts, gen.latent_dim());
    let x = gen.generate(&z)?;
    check_compat(gen, scorer, &x)?;
    let densities = scorer.score(&x)?;
    let accepted_flags = densities
        .iter()
        .zip(&us)
        .map(|(&r, &u)| accepts(r, cfg.threshold, cfg.weight, u))
        .collect();
    Ok(ScreenResult {
        densities,
        accepted_flags,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationConfig {
    pub psi: f64,
    pub latent_mean: Vec<f32>,
}

impl TruncationConfig {
    /// Truncation toward the origin of a zero-mean latent prior.
    pub fn centered(psi: f64, dim: usize) -> Self {
        TruncationConfig {
            psi,
            latent_mean: vec![0.0; dim],
        }
    }
}

/// `z' = mean + psi * (z - mean)`, row-wise.
pub fn truncate_latents(z: &Matrix, cfg: &TruncationConfig) -> Result<Matrix> {
    if !(cfg.psi >= 0.0 && cfg.psi.is_finite()) {
        return Err(Error::InvalidConfig(format!("truncation psi must be >= 0, got {}", cfg.psi)));
    }
    if cfg.latent_mean.len() != z.cols() {
        return Err(Error::shape("truncation latent mean", z.cols(), cfg.latent_mean.len()));
    }
    let mut out = z.clone();
    for i in 0..out.rows() {
        for (v, &m) in out.row_mut(i).iter_mut().zip(&cfg.latent_mean) {
            *v = (m as f64 + cfg.psi * (*v as f64 - m as f64)) as f32;
        }
    }
    Ok(out)
}

/// Generates `n` samples from truncated standard-normal latents.
pub fn sample_truncated<G: LatentGenerator + ?Sized>(gen: &G, cfg: &TruncationConfig, n: usize, rng: &mut Rng) -> Result<Matrix> {
    let z = draw_latents(rng, n, gen.latent_dim());
    gen.generate(&truncate_latents(&z, cfg)?)
}
