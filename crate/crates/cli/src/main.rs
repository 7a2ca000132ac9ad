use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use densctl_core::error::{Error, Result};
use densctl_core::perturb::Direction;
use densctl_core::pipeline::{
    self, EvalStage, ExperimentPlan, FinetuneStage, FitDensityStage, GenDataStage, PerturbStage, PretrainStage,
    RunManifest, Runner, SampleStage, Stage, SweepStage, TrainRegressorStage, MANIFEST_DIR,
};
use densctl_core::synthetic::{Benchmark, Distribution};
use densctl_core::{PerturbConfig, PretrainConfig, RegressorConfig};

#[derive(Parser)]
#[command(name = "densctl", version, about = "Pseudo-density estimation and density-based control of generative models")]
struct Cli {
    /// Seed for every stochastic step (for run-plan: overrides the plan seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for artifacts and manifests.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Only print errors.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a synthetic benchmark (features plus analytic density sidecar).
    GenData(GenDataArgs),
    /// Train a toy GAN on a feature file.
    Pretrain(PretrainArgs),
    /// k-NN pseudo densities of a feature file.
    FitDensity(FitDensityArgs),
    /// Fit the density regressor.
    TrainRegressor(TrainRegressorArgs),
    /// Latent perturbation toward higher or lower pseudo density.
    Perturb(PerturbArgs),
    /// Inference-time importance sampling.
    Sample(SampleArgs),
    /// Importance-sampled GAN fine-tuning.
    Finetune(FinetuneArgs),
    /// Precision, recall and Fréchet distance of generated against real features.
    Eval(EvalArgs),
    /// Execute an experiment plan (TOML).
    RunPlan(RunPlanArgs),
    /// Sampling sweep over thresholds and weights, with a Pareto frontier CSV.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct GenDataArgs {
    /// ring, mixture2d, mixture8d or two-moons.
    #[arg(long, default_value = "mixture2d")]
    benchmark: Benchmark,
    /// TOML file describing a distribution; overrides --benchmark.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, default_value_t = 2000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    heldout: usize,
    #[arg(long, default_value = "data.fvec")]
    output: String,
    #[arg(long, default_value = "heldout.fvec")]
    heldout_output: String,
}

#[derive(Args)]
struct PretrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    heldout: Option<PathBuf>,
    #[arg(long, default_value_t = PretrainConfig::default().iterations)]
    iters: usize,
    #[arg(long, default_value_t = PretrainConfig::default().batch_size)]
    batch: usize,
    #[arg(long, default_value_t = PretrainConfig::default().critic_steps)]
    critic_steps: usize,
    #[arg(long, default_value_t = PretrainConfig::default().generator_lr)]
    lr: f64,
    #[arg(long, default_value_t = PretrainConfig::default().gp_coef)]
    gp: f64,
    /// Hidden layer widths, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = vec![64, 64, 64])]
    hidden: Vec<usize>,
    /// 0 means the data dimension.
    #[arg(long, default_value_t = 0)]
    latent_dim: usize,
    #[arg(long, default_value = "gan")]
    output: String,
}

#[derive(Args)]
struct FitDensityArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Manifold dimension used as the distance exponent.
    #[arg(long, default_value_t = 1)]
    n: u32,
    #[arg(long, default_value = "densities.dens")]
    output: String,
}

#[derive(Args)]
struct TrainRegressorArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    densities: PathBuf,
    #[arg(long, default_value_t = RegressorConfig::default().epochs)]
    epochs: usize,
    #[arg(long, default_value_t = RegressorConfig::default().batch_size)]
    batch: usize,
    #[arg(long, default_value_t = RegressorConfig::default().learning_rate)]
    lr: f64,
    #[arg(long, default_value = "regressor.mlpw")]
    output: String,
}

#[derive(Args)]
struct PerturbArgs {
    /// Generator weights (MLPW1 file or checkpoint directory).
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    regressor: PathBuf,
    #[arg(long, default_value = "ascend")]
    direction: Direction,
    #[arg(long, default_value_t = 10)]
    steps: usize,
    #[arg(long, default_value_t = 0.025)]
    alpha: f64,
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    /// Scale each step by the L2-normalized gradient.
    #[arg(long)]
    normalize: bool,
    #[arg(long, default_value_t = 100)]
    count: usize,
    #[arg(long, default_value = "perturb.csv")]
    output: String,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    regressor: PathBuf,
    /// Real features for threshold calibration.
    #[arg(long, required_unless_present = "tau")]
    data: Option<PathBuf>,
    #[arg(long, default_value_t = 50.0)]
    tau_percentile: f64,
    /// Explicit threshold value.
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    weight: f64,
    #[arg(long, default_value_t = 2000)]
    count: usize,
    #[arg(long, default_value = "samples.fvec")]
    output: String,
}

#[derive(Args)]
struct FinetuneArgs {
    /// Checkpoint directory (generator.mlpw + discriminator.mlpw).
    #[arg(long)]
    gan: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// DENS1 densities of --data; regressor predictions are used when absent.
    #[arg(long)]
    densities: Option<PathBuf>,
    #[arg(long)]
    regressor: PathBuf,
    #[arg(long, default_value_t = 50.0)]
    tau_percentile: f64,
    #[arg(long, default_value_t = 1.0)]
    weight: f64,
    #[arg(long, default_value_t = 300)]
    iters: usize,
    #[arg(long, default_value_t = 128)]
    batch: usize,
    #[arg(long, default_value_t = 2e-4)]
    lr: f64,
    #[arg(long, default_value = "gan_finetuned")]
    output: String,
    #[arg(long, default_value = "finetune_log.csv")]
    log: String,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    real: PathBuf,
    #[arg(long)]
    gen: PathBuf,
    #[arg(long, default_value_t = 3)]
    knn: usize,
    #[arg(long, default_value = "eval.txt")]
    output: String,
}

#[derive(Args)]
struct RunPlanArgs {
    plan: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    regressor: PathBuf,
    /// Features for threshold calibration.
    #[arg(long)]
    data: PathBuf,
    /// Reference features for precision and recall.
    #[arg(long)]
    real: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = vec![20.0, 50.0, 80.0])]
    taus: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.01, 0.03, 0.1, 10.0, 33.0, 100.0])]
    weights: Vec<f64>,
    #[arg(long, default_value_t = 2000)]
    count: usize,
    #[arg(long, default_value_t = 3)]
    knn: usize,
    #[arg(long, default_value = "sweep")]
    output: String,
}

/// Artifact name for a user-supplied path: relative to the run directory when
/// inside it, absolute otherwise.
fn artifact_name(out_dir: &Path, p: &Path) -> Result<String> {
    let p = std::path::absolute(p)?;
    let root = std::path::absolute(out_dir)?;
    Ok(match p.strip_prefix(&root) {
        Ok(rel) if !rel.as_os_str().is_empty() => rel.to_string_lossy().into_owned(),
        _ => p.to_string_lossy().into_owned(),
    })
}

fn stage_for(cmd: &Command, out_dir: &Path) -> Result<Option<Stage>> {
    let abs = |p: &Path| artifact_name(out_dir, p);
    let stage = match cmd {
        Command::GenData(a) => {
            let distribution = match &a.spec {
                Some(p) => Some(
                    toml::from_str::<Distribution>(&std::fs::read_to_string(p)?)
                        .map_err(|e| Error::InvalidConfig(format!("distribution spec: {e}")))?,
                ),
                None => None,
            };
            Stage::GenData(GenDataStage {
                benchmark: a.benchmark,
                distribution,
                n: a.n,
                heldout: a.heldout,
                output: a.output.clone(),
                heldout_output: a.heldout_output.clone(),
            })
        }
        Command::Pretrain(a) => Stage::Pretrain(PretrainStage {
            data: abs(&a.data)?,
            heldout: a.heldout.as_deref().map(&abs).transpose()?,
            latent_dim: a.latent_dim,
            hidden: a.hidden.clone(),
            train: PretrainConfig {
                iterations: a.iters,
                batch_size: a.batch,
                critic_steps: a.critic_steps,
                generator_lr: a.lr,
                critic_lr: a.lr,
                gp_coef: a.gp,
            },
            output: a.output.clone(),
        }),
        Command::FitDensity(a) => Stage::FitDensity(FitDensityStage {
            data: abs(&a.data)?,
            k: a.k,
            n: a.n,
            output: a.output.clone(),
        }),
        Command::TrainRegressor(a) => Stage::TrainRegressor(TrainRegressorStage {
            data: abs(&a.data)?,
            densities: abs(&a.densities)?,
            regressor: RegressorConfig {
                epochs: a.epochs,
                batch_size: a.batch,
                learning_rate: a.lr,
                ..RegressorConfig::default()
            },
            output: a.output.clone(),
        }),
        Command::Perturb(a) => Stage::Perturb(PerturbStage {
            generator: abs(&a.model)?,
            regressor: abs(&a.regressor)?,
            perturb: PerturbConfig {
                steps: a.steps,
                step_size: a.alpha,
                budget: a.eps,
                direction: a.direction,
                normalize_gradient: a.normalize,
            },
            count: a.count,
            output: a.output.clone(),
        }),
        Command::Sample(a) => Stage::Sample(SampleStage {
            generator: abs(&a.model)?,
            regressor: abs(&a.regressor)?,
            data: a.data.as_deref().map(&abs).transpose()?.unwrap_or_default(),
            tau_percentile: a.tau_percentile,
            tau: a.tau,
            weight: a.weight,
            count: a.count,
            output: a.output.clone(),
            ..SampleStage::default()
        }),
        Command::Finetune(a) => Stage::Finetune(FinetuneStage {
            gan: abs(&a.gan)?,
            regressor: abs(&a.regressor)?,
            data: abs(&a.data)?,
            densities: a.densities.as_deref().map(&abs).transpose()?,
            tau_percentile: a.tau_percentile,
            weight: a.weight,
            iterations: a.iters,
            batch_size: a.batch,
            generator_lr: a.lr,
            critic_lr: a.lr,
            output: a.output.clone(),
            log: a.log.clone(),
            ..FinetuneStage::default()
        }),
        Command::Eval(a) => Stage::Eval(EvalStage {
            real: abs(&a.real)?,
            generated: abs(&a.gen)?,
            k: a.knn,
            output: a.output.clone(),
        }),
        Command::Sweep(a) => Stage::Sweep(SweepStage {
            generator: abs(&a.model)?,
            regressor: abs(&a.regressor)?,
            data: abs(&a.data)?,
            real: abs(&a.real)?,
            tau_percentiles: a.taus.clone(),
            weights: a.weights.clone(),
            count: a.count,
            k: a.knn,
            output: a.output.clone(),
        }),
        Command::RunPlan(_) => return Ok(None),
    };
    Ok(Some(stage))
}

fn next_index(out_dir: &Path) -> Result<usize> {
    let dir = out_dir.join(MANIFEST_DIR);
    if !dir.exists() {
        return Ok(0);
    }
    Ok(pipeline::read_manifests(out_dir)?.iter().map(|m| m.index + 1).max().unwrap_or(0))
}

fn report(manifests: &[RunManifest], cmd: &Command, runner_root: &Path, quiet: bool) -> Result<()> {
    if quiet {
        return Ok(());
    }
    if let Command::Eval(a) = cmd {
        print!("{}", std::fs::read_to_string(runner_root.join(&a.output))?);
        return Ok(());
    }
    print!("{}", pipeline::summary_table(manifests));
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::RunPlan(a) => {
            let mut plan = ExperimentPlan::load(&a.plan)?;
            if let Some(seed) = cli.seed {
                plan.seed = seed;
            }
            let manifests = pipeline::run_plan(&plan, &cli.out_dir)?;
            if !cli.quiet {
                print!("{}", pipeline::summary_table(&manifests));
            }
            Ok(())
        }
        cmd => {
            let stage = stage_for(cmd, &cli.out_dir)?.expect("single-stage command");
            let runner = Runner::new(&cli.out_dir, "cli")?;
            let manifests = runner.run_stage(&stage, next_index(&cli.out_dir)?, cli.seed.unwrap_or(0))?;
            report(&manifests, cmd, runner.root(), cli.quiet)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "error" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let cat = e.category();
            eprintln!("error ({cat:?}): {e}");
            ExitCode::from(cat.exit_code() as u8)
        }
    }
}
