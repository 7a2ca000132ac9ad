//! Pseudo-density estimation for feature-space data and density-based
//! control of generative models.
//!
//! A k-NN density estimate on real features is distilled into a small MLP
//! regressor (the *pseudo density*). The regressor then drives three controls:
//!
//! - [`perturb`]: per-sample projected gradient steps on the latent code,
//! - [`sampler`]: inference-time rejection sampling with a density threshold and importance weight,
//! - [`finetune`]: GAN fine-tuning on importance-sampled real and generated batches.
//!
//! [`metrics`] provides improved precision/recall and the Fréchet distance,
//! [`synthetic`] the toy distributions with analytic densities, [`formats`]
//! the binary file formats and [`pipeline`] reproducible experiment plans.

pub mod density;
pub mod error;
pub mod finetune;
pub mod formats;
pub mod gan;
pub mod linalg;
pub mod metrics;
pub mod mlp;
pub mod optim;
pub mod perturb;
pub mod pipeline;
pub mod rng;
pub mod sampler;
pub mod synthetic;

pub use density::{
    calibrate_threshold, estimate_density, pseudo_density, train_regressor, DensityConfig, DensityEstimate,
    DensityRegressor, DensityScorer, FeatureSet, RegressorConfig, ThresholdCalibration,
};
pub use error::{Error, ErrorCategory, Result};
pub use finetune::{finetune_gan, FinetuneConfig, WeightedDataset};
pub use gan::{train_gan, GanArch, GanPair, PretrainConfig};
pub use linalg::Matrix;
pub use metrics::{evaluate, frechet_distance, precision_recall, EvalReport};
pub use mlp::{Activation, Mlp};
pub use pipeline::{run_plan, ExperimentPlan, RunManifest, Stage};
pub use perturb::{perturb_batch, perturb_latent, Direction, PerturbConfig, PerturbResult};
pub use rng::Rng;
pub use sampler::{importance_sample, SampleBatch, SamplingConfig};
pub use synthetic::{generate_synthetic, Distribution, SyntheticData, SyntheticSpec};
