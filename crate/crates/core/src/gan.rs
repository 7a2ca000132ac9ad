//! Toy Wasserstein GAN built from two [`Mlp`]s.
//!
//! Critic loss: `-(mean D(x_real) - mean D(G(z)))`; generator loss:
//! `-mean D(G(z))`. An optional gradient penalty
//! `lambda * mean (‖grad D(x_hat)‖ - 1)^2` at random interpolates between
//! real and generated rows keeps the critic near 1-Lipschitz.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::mlp::{Activation, Gradients, Mlp};
use crate::optim::{OptimizerKind, OptimizerState};
use crate::rng::Rng;
use crate::sampler::draw_latents;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GanArch {
    pub latent_dim: usize,
    pub data_dim: usize,
    pub generator_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub activation: Activation,
}

impl Default for GanArch {
    fn default() -> Self {
        GanArch {
            latent_dim: 2,
            data_dim: 2,
            generator_hidden: vec![64, 64, 64],
            critic_hidden: vec![64, 64, 64],
            activation: Activation::LeakyRelu,
        }
    }
}

/// Adam with the usual WGAN-GP moments.
pub fn gan_optimizer() -> OptimizerKind {
    OptimizerKind::Adam {
        beta1: 0.5,
        beta2: 0.9,
        eps: 1e-8,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub iteration: usize,
    pub critic_loss: f64,
    pub generator_loss: f64,
    pub gradient_penalty: f64,
    /// Mean pseudo density of the accepted generated samples, when filtering was applied.
    pub mean_generated_density: Option<f64>,
    /// Generator evaluations spent to fill the generated batches.
    pub generated_attempts: usize,
}

#[derive(Debug, Clone)]
pub struct GanPair {
    pub generator: Mlp,
    pub critic: Mlp,
    pub generator_opt: OptimizerState,
    pub critic_opt: OptimizerState,
    pub log: Vec<IterationLog>,
}

impl GanPair {
    pub fn new(arch: &GanArch, generator_lr: f64, critic_lr: f64, rng: &mut Rng) -> Result<Self> {
        let mut gs = vec![arch.latent_dim];
        gs.extend(&arch.generator_hidden);
        gs.push(arch.data_dim);
        let mut ds = vec![arch.data_dim];
        ds.extend(&arch.critic_hidden);
        ds.push(1);
        let generator = Mlp::new(&gs, arch.activation, Activation::Identity, rng)?;
        let critic = Mlp::new(&ds, arch.activation, Activation::Identity, rng)?;
        Self::from_nets(generator, critic, generator_lr, critic_lr)
    }

    pub fn from_nets(generator: Mlp, critic: Mlp, generator_lr: f64, critic_lr: f64) -> Result<Self> {
        if generator.output_dim() != critic.input_dim() {
            return Err(Error::shape("generator output vs critic input", critic.input_dim(), generator.output_dim()));
        }
        if critic.output_dim() != 1 {
            return Err(Error::shape("critic output", 1, critic.output_dim()));
        }
        let generator_opt = OptimizerState::new(gan_optimizer(), generator_lr, &generator)?;
        let critic_opt = OptimizerState::new(gan_optimizer(), critic_lr, &critic)?;
        Ok(GanPair {
            generator,
            critic,
            generator_opt,
            critic_opt,
            log: Vec::new(),
        })
    }

    pub fn latent_dim(&self) -> usize {
        self.generator.input_dim()
    }

    pub fn data_dim(&self) -> usize {
        self.generator.output_dim()
    }

    /// Fresh optimizer states at new learning rates.
    pub fn reset_optimizers(&mut self, generator_lr: f64, critic_lr: f64) -> Result<()> {
        self.generator_opt = OptimizerState::new(gan_optimizer(), generator_lr, &self.generator)?;
        self.critic_opt = OptimizerState::new(gan_optimizer(), critic_lr, &self.critic)?;
        Ok(())
    }
}

fn mean_output(critic: &Mlp, x: &Matrix) -> Result<f64> {
    let out = critic.forward(x)?;
    Ok(out.data().iter().map(|&v| v as f64).sum::<f64>() / out.rows().max(1) as f64)
}

/// `-(mean D(real) - mean D(fake))`.
pub fn critic_loss(critic: &Mlp, real: &Matrix, fake: &Matrix) -> Result<f64> {
    Ok(-(mean_output(critic, real)? - mean_output(critic, fake)?))
}

/// `-mean D(fake)`.
pub fn generator_loss(critic: &Mlp, fake: &Matrix) -> Result<f64> {
    Ok(-mean_output(critic, fake)?)
}

/// Critic loss plus `gp_coef` times the interpolate gradient penalty, with parameter gradients.
///
/// `interp` holds one mixing coefficient per row: `x_hat = t * real + (1 - t) * fake`.
pub fn critic_loss_and_gradients(
    critic: &Mlp,
    real: &Matrix,
    fake: &Matrix,
    gp_coef: f64,
    interp: &[f64],
) -> Result<(f64, f64, Gradients)> {
    if real.rows() == 0 || fake.rows() == 0 {
        return Err(Error::InvalidConfig("critic update needs non-empty batches".into()));
    }
    let rt = critic.forward_trace(real)?;
    let ft = critic.forward_trace(fake)?;
    let br = real.rows() as f64;
    let bf = fake.rows() as f64;
    let mean = |m: &Matrix| m.data().iter().map(|&v| v as f64).sum::<f64>() / m.rows() as f64;
    let loss = -(mean(rt.output()) - mean(ft.output()));

    let mut grads = critic.backward(&rt, &Matrix::new(real.rows(), 1, vec![(-1.0 / br) as f32; real.rows()])?)?;
    let gf = critic.backward(&ft, &Matrix::new(fake.rows(), 1, vec![(1.0 / bf) as f32; fake.rows()])?)?;
    grads.add_scaled(&gf, 1.0)?;

    let mut penalty = 0.0;
    if gp_coef > 0.0 {
        if real.rows() != fake.rows() || interp.len() != real.rows() {
            return Err(Error::shape("gradient penalty batches", real.rows(), fake.rows()));
        }
        let mut mixed = real.clone();
        for i in 0..real.rows() {
            let t = interp[i];
            for (j, v) in mixed.row_mut(i).iter_mut().enumerate() {
                *v = (t * real.get(i, j) as f64 + (1.0 - t) * fake.get(i, j) as f64) as f32;
            }
        }
        let (p, pg) = critic.input_gradient_penalty(&mixed, 1.0)?;
        penalty = p;
        grads.add_scaled(&pg, gp_coef as f32)?;
    }
    Ok((loss, penalty, grads))
}

/// One critic update. Returns (loss without penalty, penalty).
pub fn critic_step(pair: &mut GanPair, real: &Matrix, fake: &Matrix, gp_coef: f64, rng: &mut Rng) -> Result<(f64, f64)> {
    let interp: Vec<f64> = (0..real.rows()).map(|_| rng.uniform()).collect();
    let (loss, gp, grads) = critic_loss_and_gradients(&pair.critic, real, fake, gp_coef, &interp)?;
    if !loss.is_finite() || !gp.is_finite() {
        return Err(Error::Diverged(format!("critic loss {loss}, penalty {gp}")));
    }
    pair.critic_opt.step(&mut pair.critic, &grads)?;
    Ok((loss, gp))
}

/// Generator loss and generator parameter gradients for latent batch `z`.
pub fn generator_loss_and_gradients(generator: &Mlp, critic: &Mlp, z: &Matrix) -> Result<(f64, Gradients)> {
    if z.rows() == 0 {
        return Err(Error::InvalidConfig("generator update needs a non-empty batch".into()));
    }
    let gt = generator.forward_trace(z)?;
    let ct = critic.forward_trace(gt.output())?;
    let b = z.rows() as f64;
    let loss = -ct.output().data().iter().map(|&v| v as f64).sum::<f64>() / b;
    let dx = critic.backward(&ct, &Matrix::new(z.rows(), 1, vec![(-1.0 / b) as f32; z.rows()])?)?.input;
    let grads = generator.backward(&gt, &dx)?;
    Ok((loss, grads))
}

/// One generator update on latent batch `z`. Returns the loss before the update.
pub fn generator_step(pair: &mut GanPair, z: &Matrix) -> Result<f64> {
    let (loss, grads) = generator_loss_and_gradients(&pair.generator, &pair.critic, z)?;
    if !loss.is_finite() {
        return Err(Error::Diverged(format!("generator loss {loss}")));
    }
    pair.generator_opt.step(&mut pair.generator, &grads)?;
    Ok(loss)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PretrainConfig {
    pub iterations: usize,
    pub batch_size: usize,
    /// Critic updates per generator update.
    pub critic_steps: usize,
    pub generator_lr: f64,
    pub critic_lr: f64,
    pub gp_coef: f64,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        PretrainConfig {
            iterations: 2000,
            batch_size: 128,
            critic_steps: 5,
            generator_lr: 1e-3,
            critic_lr: 1e-3,
            gp_coef: 0.1,
        }
    }
}

/// Trains a GAN from scratch on `data` (uniform minibatches with replacement).
///
/// `iterations = 0` returns the freshly initialized pair.
pub fn train_gan(data: &Matrix, arch: &GanArch, cfg: &PretrainConfig, seed: u64) -> Result<GanPair> {
    if data.cols() != arch.data_dim {
        return Err(Error::shape("training data", arch.data_dim, data.cols()));
    }
    if data.rows() == 0 && cfg.iterations > 0 {
        return Err(Error::InsufficientSamples { n: 0, k: 0 });
    }
    if cfg.batch_size == 0 || cfg.critic_steps == 0 {
        return Err(Error::InvalidConfig("batch_size and critic_steps must be >= 1".into()));
    }
    let root = Rng::new(seed);
    let mut init_rng = root.fork(0);
    let mut data_rng = root.fork(1);
    let mut latent_rng = root.fork(2);
    let mut gp_rng = root.fork(3);

    let mut pair = GanPair::new(arch, cfg.generator_lr, cfg.critic_lr, &mut init_rng)?;
    let b = cfg.batch_size;
    for it in 0..cfg.iterations {
        let mut closs = 0.0;
        let mut gp = 0.0;
        for _ in 0..cfg.critic_steps {
            let idx: Vec<usize> = (0..b).map(|_| data_rng.below(data.rows())).collect();
            let real = data.select_rows(&idx);
            let fake = pair.generator.forward(&draw_latents(&mut latent_rng, b, arch.latent_dim))?;
            (closs, gp) = critic_step(&mut pair, &real, &fake, cfg.gp_coef, &mut gp_rng)?;
        }
        let z = draw_latents(&mut latent_rng, b, arch.latent_dim);
        let gloss = generator_step(&mut pair, &z)?;
        pair.log.push(IterationLog {
            iteration: it,
            critic_loss: closs,
            generator_loss: gloss,
            gradient_penalty: gp,
            mean_generated_density: None,
            generated_attempts: b,
        });
    }
    Ok(pair)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mlp::Layer;

    #[test]
    fn loss_identity_on_linear_critic() {
        // D(x) = 2x + 1: real {1, 3} → mean 5, fake {0, -1} → mean 0
        let critic = Mlp::from_layers(vec![Layer::new(1, 1, Activation::Identity, vec![2.0], vec![1.0]).unwrap()]).unwrap();
        let real = Matrix::column(&[1.0, 3.0]);
        let fake = Matrix::column(&[0.0, -1.0]);
        assert!((critic_loss(&critic, &real, &fake).unwrap() - (-5.0)).abs() < 1e-9);
        assert!((generator_loss(&critic, &fake).unwrap() - 0.0).abs() < 1e-9);
        let (loss, gp, grads) = critic_loss_and_gradients(&critic, &real, &fake, 0.0, &[]).unwrap();
        assert!((loss + 5.0).abs() < 1e-9);
        assert_eq!(gp, 0.0);
        // dL/dw = -(mean real - mean fake) = -(2 - (-0.5)) = -2.5 ; dL/db = 0
        assert!((grads.layers[0].weights[0] + 2.5).abs() < 1e-6);
        assert!(grads.layers[0].biases[0].abs() < 1e-6);
    }

    #[test]
    fn zero_iterations_returns_initialized_pair() {
        let data = Matrix::zeros(10, 2);
        let a = train_gan(&data, &GanArch::default(), &PretrainConfig { iterations: 0, ..Default::default() }, 3).unwrap();
        let mut rng = Rng::new(3).fork(0);
        let b = GanPair::new(&GanArch::default(), 1e-3, 1e-3, &mut rng).unwrap();
        assert_eq!(a.generator, b.generator);
        assert_eq!(a.critic, b.critic);
        assert!(a.log.is_empty());
    }

    #[test]
    fn incompatible_nets_rejected() {
        let mut rng = Rng::new(0);
        let g = Mlp::new(&[2, 3], Activation::Tanh, Activation::Identity, &mut rng).unwrap();
        let d = Mlp::new(&[2, 1], Activation::Tanh, Activation::Identity, &mut rng).unwrap();
        assert!(GanPair::from_nets(g, d, 1e-3, 1e-3).is_err());
    }
}
