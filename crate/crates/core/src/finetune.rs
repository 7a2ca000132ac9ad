//! Importance-sampled GAN fine-tuning.
//!
//! Every iteration draws a real batch by rejection with `(tau, w)`, then two
//! generated batches filtered with `(tau, 1/w)` (one for the critic update,
//! one for the generator update). With `w > 1` real batches favour
//! high-density samples while the critic mostly sees low-density fakes, so the
//! generator is pushed toward high density; `w < 1` does the opposite.

use serde::{Deserialize, Serialize};

use crate::density::DensityRegressor;
use crate::error::{Error, Result};
use crate::gan::{critic_step, generator_step, GanPair, IterationLog};
use crate::linalg::Matrix;
use crate::rng::Rng;
use crate::sampler::{acceptance_probability, accepts, importance_sample, SamplingConfig, DEFAULT_MAX_ATTEMPTS_PER_ACCEPT};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinetuneConfig {
    pub batch_size: usize,
    pub iterations: usize,
    pub threshold: f64,
    pub weight: f64,
    pub generator_lr: f64,
    pub critic_lr: f64,
    pub seed: u64,
    /// Gradient-penalty coefficient; `None` or 0 disables it.
    pub gp_coef: Option<f64>,
    pub max_attempts_per_accept: usize,
}

impl FinetuneConfig {
    pub fn new(threshold: f64, weight: f64) -> Self {
        FinetuneConfig {
            batch_size: 128,
            iterations: 300,
            threshold,
            weight,
            generator_lr: 2e-4,
            critic_lr: 2e-4,
            seed: 0,
            gp_coef: Some(0.1),
            max_attempts_per_accept: DEFAULT_MAX_ATTEMPTS_PER_ACCEPT,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be >= 1".into()));
        }
        self.sampling().validate()
    }

    pub fn sampling(&self) -> SamplingConfig {
        SamplingConfig {
            threshold: self.threshold,
            weight: self.weight,
            max_attempts_per_accept: self.max_attempts_per_accept,
        }
    }
}

/// Real samples with precomputed pseudo densities, drawn by importance-weighted rejection.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedDataset {
    pub data: Matrix,
    pub densities: Vec<f64>,
    pub threshold: f64,
    pub weight: f64,
    pub max_attempts_per_accept: usize,
}

impl WeightedDataset {
    pub fn new(data: Matrix, densities: Vec<f64>, threshold: f64, weight: f64) -> Result<Self> {
        if data.rows() != densities.len() {
            return Err(Error::shape("weighted dataset densities", data.rows(), densities.len()));
        }
        if data.rows() == 0 {
            return Err(Error::InsufficientSamples { n: 0, k: 0 });
        }
        if !(weight > 0.0 && weight.is_finite()) {
            return Err(Error::InvalidConfig(format!("importance weight must be > 0, got {weight}")));
        }
        if densities.iter().any(|d| !d.is_finite()) {
            return Err(Error::NonFinite("dataset densities".into()));
        }
        Ok(WeightedDataset {
            data,
            densities,
            threshold,
            weight,
            max_attempts_per_accept: DEFAULT_MAX_ATTEMPTS_PER_ACCEPT,
        })
    }

    pub fn len(&self) -> usize {
        self.data.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.data.rows() == 0
    }

    /// Per-sample acceptance probability in `(0, 1]`.
    pub fn acceptance_probabilities(&self) -> Vec<f64> {
        self.densities
            .iter()
            .map(|&d| acceptance_probability(d, self.threshold, self.weight))
            .collect()
    }

    /// The distribution a single draw follows: acceptance probabilities, normalized.
    pub fn sampling_distribution(&self) -> Vec<f64> {
        let p = self.acceptance_probabilities();
        let total: f64 = p.iter().sum();
        p.into_iter().map(|v| v / total).collect()
    }

    /// Indices of `b` samples drawn with replacement: a uniform pick followed
    /// by the accept/reject rule, repeated until accepted.
    pub fn sample_indices(&self, b: usize, rng: &mut Rng) -> Result<Vec<usize>> {
        let mut out = Vec::with_capacity(b);
        let mut rejections = 0usize;
        while out.len() < b {
            let i = rng.below(self.len());
            let u = rng.uniform();
            if accepts(self.densities[i], self.threshold, self.weight, u) {
                out.push(i);
                rejections = 0;
            } else {
                rejections += 1;
                if rejections >= self.max_attempts_per_accept {
                    return Err(Error::Starved {
                        rejections,
                        tau: self.threshold,
                        weight: self.weight,
                    });
                }
            }
        }
        Ok(out)
    }

    pub fn sample_real_batch(&self, b: usize, rng: &mut Rng) -> Result<Matrix> {
        Ok(self.data.select_rows(&self.sample_indices(b, rng)?))
    }
}

/// Runs `cfg.iterations` fine-tuning iterations in place.
///
/// Optimizer states are reset to the configured learning rates first. If a
/// loss turns non-finite the pair is restored to its state after the last
/// completed iteration and the error is returned.
pub fn finetune_gan(pair: &mut GanPair, ds: &WeightedDataset, reg: &DensityRegressor, cfg: &FinetuneConfig) -> Result<()> {
    cfg.validate()?;
    if ds.threshold != cfg.threshold || ds.weight != cfg.weight {
        return Err(Error::InvalidConfig("dataset and fine-tune config disagree on (tau, w)".into()));
    }
    if ds.data.cols() != pair.data_dim() {
        return Err(Error::shape("fine-tune data", pair.data_dim(), ds.data.cols()));
    }
    if reg.input_dim() != pair.data_dim() {
        return Err(Error::shape("regressor input", pair.data_dim(), reg.input_dim()));
    }
    if cfg.iterations == 0 {
        return Ok(());
    }
    pair.reset_optimizers(cfg.generator_lr, cfg.critic_lr)?;
    let gen_filter = cfg.sampling().reciprocal();
    let gp_coef = cfg.gp_coef.unwrap_or(0.0);

    let root = Rng::new(cfg.seed);
    let mut real_rng = root.fork(10);
    let mut gen_rng = root.fork(11);
    let mut gp_rng = root.fork(12);
    let b = cfg.batch_size;

    for it in 0..cfg.iterations {
        let checkpoint = pair.clone();
        let step = (|| -> Result<IterationLog> {
            let real = ds.sample_real_batch(b, &mut real_rng)?;
            let fake_d = importance_sample(&pair.generator, reg, &gen_filter, b, &mut gen_rng)?;
            let (closs, gp) = critic_step(pair, &real, &fake_d.outputs, gp_coef, &mut gp_rng)?;
            let fake_g = importance_sample(&pair.generator, reg, &gen_filter, b, &mut gen_rng)?;
            let gloss = generator_step(pair, &fake_g.latents)?;
            let dens: Vec<f64> = fake_d.densities.iter().chain(&fake_g.densities).copied().collect();
            Ok(IterationLog {
                iteration: pair.log.len(),
                critic_loss: closs,
                generator_loss: gloss,
                gradient_penalty: gp,
                mean_generated_density: Some(dens.iter().sum::<f64>() / dens.len() as f64),
                generated_attempts: fake_d.attempts + fake_g.attempts,
            })
        })();
        match step {
            Ok(entry) => pair.log.push(entry),
            Err(e) => {
                log::error!("fine-tune stopped at iteration {it}: {e}; restoring last good state");
                *pair = checkpoint;
                return Err(e);
            }
        }
    }
    Ok(())
}

/// Two-bin mass split (above, below) of a distribution after importance
/// sampling with weight `w`: the above-threshold bin's odds are multiplied by `w`.
pub fn perturbed_split(above: f64, below: f64, weight: f64) -> (f64, f64) {
    let a = above * weight;
    let total = a + below;
    (a / total, below / total)
}

/// Generated-data mass split the generator should reach when real data is
/// sampled with `w` and generated data with `1/w`.
///
/// At equilibrium the two perturbed distributions agree:
/// `perturb(g, 1/w) = perturb(r, w)`, which in odds form gives
/// `g_above / g_below = w^2 * r_above / r_below`.
pub fn equilibrium_target(real_above: f64, real_below: f64, weight: f64) -> Result<(f64, f64)> {
    if !(weight > 0.0 && weight.is_finite()) {
        return Err(Error::InvalidConfig(format!("importance weight must be > 0, got {weight}")));
    }
    if real_above < 0.0 || real_below < 0.0 || real_above + real_below <= 0.0 {
        return Err(Error::InvalidConfig("histogram masses must be non-negative with positive total".into()));
    }
    let total = real_above + real_below;
    let (ra, rb) = (real_above / total, real_below / total);
    let above = weight * weight * ra;
    let z = above + rb;
    Ok((above / z, rb / z))
}
