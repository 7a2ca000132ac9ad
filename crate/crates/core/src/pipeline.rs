//! Reproducible experiment plans.
//!
//! A plan is an ordered list of stages that read and write named artifacts in
//! one run directory. Every executed stage leaves a [`RunManifest`] under
//! `manifests/`; the manifest's content hash covers everything except the
//! wall-clock timestamp, so reruns with the same seed produce identical hashes.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::density::{
    calibrate_threshold, estimate_density, pseudo_density, train_regressor, DensityConfig, DensityEstimate,
    DensityRegressor, FeatureSet, RegressorConfig,
};
use crate::error::{Error, Result};
use crate::finetune::{finetune_gan, FinetuneConfig, WeightedDataset};
use crate::formats::{self, DensityFile};
use crate::gan::{train_gan, GanArch, IterationLog, PretrainConfig};
use crate::linalg::Matrix;
use crate::metrics::{evaluate, frechet_distance, DEFAULT_PR_K};
use crate::perturb::{perturb_batch, Direction, PerturbConfig};
use crate::rng::{Rng, RNG_CONTRACT};
use crate::sampler::{draw_latents, importance_sample, SamplingConfig, DEFAULT_MAX_ATTEMPTS_PER_ACCEPT, TAU_PERCENTILES, WEIGHT_SWEEP};
use crate::synthetic::{generate_synthetic, Benchmark, Distribution, SyntheticSpec};

pub const MANIFEST_DIR: &str = "manifests";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub plan: String,
    pub stage: String,
    pub index: usize,
    pub seed: u64,
    pub rng_contract: String,
    pub config: serde_json::Value,
    /// Artifact name → SHA-256 of its bytes.
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub metrics: BTreeMap<String, f64>,
    /// SHA-256 over every field above.
    pub content_hash: String,
    /// Seconds since the Unix epoch; not part of the content hash.
    pub created_unix: u64,
}

#[derive(Serialize)]
struct HashedView<'a> {
    plan: &'a str,
    stage: &'a str,
    index: usize,
    seed: u64,
    rng_contract: &'a str,
    config: &'a serde_json::Value,
    inputs: &'a BTreeMap<String, String>,
    outputs: &'a BTreeMap<String, String>,
    metrics: &'a BTreeMap<String, f64>,
}

impl RunManifest {
    fn compute_hash(&self) -> Result<String> {
        let view = HashedView {
            plan: &self.plan,
            stage: &self.stage,
            index: self.index,
            seed: self.seed,
            rng_contract: &self.rng_contract,
            config: &self.config,
            inputs: &self.inputs,
            outputs: &self.outputs,
            metrics: &self.metrics,
        };
        let bytes = serde_json::to_vec(&view).map_err(|e| Error::Format(format!("manifest: {e}")))?;
        Ok(hex::encode(Sha256::digest(bytes)))
    }

    /// True when the stored hash matches the manifest's contents.
    pub fn verify(&self) -> Result<bool> {
        Ok(self.compute_hash()? == self.content_hash)
    }

    pub fn file_name(&self) -> String {
        format!("{:03}-{}.json", self.index, self.stage)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Format(format!("manifest: {e}")))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        serde_json::from_slice(&fs::read(path)?).map_err(|e| Error::Format(format!("manifest: {e}")))
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    if path.is_dir() {
        let mut entries: Vec<PathBuf> = fs::read_dir(path)?.map(|e| e.map(|e| e.path())).collect::<std::io::Result<_>>()?;
        entries.sort();
        let mut h = Sha256::new();
        for e in entries {
            if e.is_file() {
                h.update(e.file_name().unwrap_or_default().to_string_lossy().as_bytes());
                h.update(fs::read(&e)?);
            }
        }
        Ok(hex::encode(h.finalize()))
    } else {
        Ok(hex::encode(Sha256::digest(fs::read(path)?)))
    }
}

fn default_k() -> usize {
    DEFAULT_PR_K
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenDataStage {
    /// Named benchmark; ignored when `distribution` is given.
    pub benchmark: Benchmark,
    pub distribution: Option<Distribution>,
    pub n: usize,
    pub heldout: usize,
    pub output: String,
    pub heldout_output: String,
}

impl Default for GenDataStage {
    fn default() -> Self {
        GenDataStage {
            benchmark: Benchmark::Mixture2d,
            distribution: None,
            n: 2000,
            heldout: 0,
            output: "data.fvec".into(),
            heldout_output: "heldout.fvec".into(),
        }
    }
}

impl GenDataStage {
    pub fn resolved_distribution(&self) -> Distribution {
        self.distribution.clone().unwrap_or_else(|| self.benchmark.distribution())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PretrainStage {
    pub data: String,
    /// Optional held-out set for the Fréchet-distance check.
    pub heldout: Option<String>,
    /// Latent size; 0 means "same as the data dimension".
    pub latent_dim: usize,
    pub hidden: Vec<usize>,
    pub train: PretrainConfig,
    pub output: String,
}

impl Default for PretrainStage {
    fn default() -> Self {
        PretrainStage {
            data: "data.fvec".into(),
            heldout: None,
            latent_dim: 0,
            hidden: GanArch::default().generator_hidden,
            train: PretrainConfig::default(),
            output: "gan".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitDensityStage {
    pub data: String,
    pub k: usize,
    pub n: u32,
    pub output: String,
}

impl Default for FitDensityStage {
    fn default() -> Self {
        let d = DensityConfig::default();
        FitDensityStage {
            data: "data.fvec".into(),
            k: d.k,
            n: d.n,
            output: "densities.dens".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainRegressorStage {
    pub data: String,
    pub densities: String,
    pub regressor: RegressorConfig,
    pub output: String,
}

impl Default for TrainRegressorStage {
    fn default() -> Self {
        TrainRegressorStage {
            data: "data.fvec".into(),
            densities: "densities.dens".into(),
            regressor: RegressorConfig::default(),
            output: "regressor.mlpw".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerturbStage {
    /// Generator file or checkpoint directory.
    pub generator: String,
    pub regressor: String,
    pub perturb: PerturbConfig,
    pub count: usize,
    pub output: String,
}

impl Default for PerturbStage {
    fn default() -> Self {
        PerturbStage {
            generator: "gan".into(),
            regressor: "regressor.mlpw".into(),
            perturb: PerturbConfig::gan(Direction::Ascend),
            count: 100,
            output: "perturb.csv".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleStage {
    pub generator: String,
    pub regressor: String,
    /// Real features used to calibrate the threshold.
    pub data: String,
    pub tau_percentile: f64,
    /// Explicit threshold; overrides `tau_percentile`.
    pub tau: Option<f64>,
    pub weight: f64,
    pub count: usize,
    pub max_attempts_per_accept: usize,
    pub output: String,
}

impl Default for SampleStage {
    fn default() -> Self {
        SampleStage {
            generator: "gan".into(),
            regressor: "regressor.mlpw".into(),
            data: "data.fvec".into(),
            tau_percentile: 50.0,
            tau: None,
            weight: 1.0,
            count: 2000,
            max_attempts_per_accept: DEFAULT_MAX_ATTEMPTS_PER_ACCEPT,
            output: "samples.fvec".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FinetuneStage {
    /// Checkpoint directory to start from.
    pub gan: String,
    pub regressor: String,
    pub data: String,
    /// Densities for the real samples; the regressor's predictions when absent.
    pub densities: Option<String>,
    pub tau_percentile: f64,
    pub weight: f64,
    pub iterations: usize,
    pub batch_size: usize,
    pub generator_lr: f64,
    pub critic_lr: f64,
    pub gp_coef: Option<f64>,
    pub output: String,
    pub log: String,
}

impl Default for FinetuneStage {
    fn default() -> Self {
        let f = FinetuneConfig::new(0.0, 1.0);
        FinetuneStage {
            gan: "gan".into(),
            regressor: "regressor.mlpw".into(),
            data: "data.fvec".into(),
            densities: None,
            tau_percentile: 50.0,
            weight: 1.0,
            iterations: f.iterations,
            batch_size: f.batch_size,
            generator_lr: f.generator_lr,
            critic_lr: f.critic_lr,
            gp_coef: f.gp_coef,
            output: "gan_finetuned".into(),
            log: "finetune_log.csv".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalStage {
    pub real: String,
    pub generated: String,
    pub k: usize,
    pub output: String,
}

impl Default for EvalStage {
    fn default() -> Self {
        EvalStage {
            real: "heldout.fvec".into(),
            generated: "samples.fvec".into(),
            k: default_k(),
            output: "eval.txt".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepStage {
    pub generator: String,
    pub regressor: String,
    /// Features used to calibrate thresholds.
    pub data: String,
    /// Reference set for precision and recall.
    pub real: String,
    pub tau_percentiles: Vec<f64>,
    pub weights: Vec<f64>,
    pub count: usize,
    pub k: usize,
    pub output: String,
}

impl Default for SweepStage {
    fn default() -> Self {
        SweepStage {
            generator: "gan".into(),
            regressor: "regressor.mlpw".into(),
            data: "data.fvec".into(),
            real: "heldout.fvec".into(),
            tau_percentiles: TAU_PERCENTILES.to_vec(),
            weights: WEIGHT_SWEEP.to_vec(),
            count: 2000,
            k: default_k(),
            output: "sweep".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "stage", rename_all = "kebab-case")]
pub enum Stage {
    GenData(GenDataStage),
    Pretrain(PretrainStage),
    FitDensity(FitDensityStage),
    TrainRegressor(TrainRegressorStage),
    Perturb(PerturbStage),
    Sample(SampleStage),
    Finetune(FinetuneStage),
    Eval(EvalStage),
    Sweep(SweepStage),
}

impl Stage {
    pub fn kind(&self) -> &'static str {
        match self {
            Stage::GenData(_) => "gen-data",
            Stage::Pretrain(_) => "pretrain",
            Stage::FitDensity(_) => "fit-density",
            Stage::TrainRegressor(_) => "train-regressor",
            Stage::Perturb(_) => "perturb",
            Stage::Sample(_) => "sample",
            Stage::Finetune(_) => "finetune",
            Stage::Eval(_) => "eval",
            Stage::Sweep(_) => "sweep",
        }
    }

    /// Artifact names the stage reads.
    pub fn inputs(&self) -> Vec<&str> {
        match self {
            Stage::GenData(_) => vec![],
            Stage::Pretrain(s) => std::iter::once(s.data.as_str()).chain(s.heldout.as_deref()).collect(),
            Stage::FitDensity(s) => vec![&s.data],
            Stage::TrainRegressor(s) => vec![&s.data, &s.densities],
            Stage::Perturb(s) => vec![&s.generator, &s.regressor],
            Stage::Sample(s) if s.tau.is_some() => vec![&s.generator, &s.regressor],
            Stage::Sample(s) => vec![&s.generator, &s.regressor, &s.data],
            Stage::Finetune(s) => [s.gan.as_str(), &s.regressor, &s.data].into_iter().chain(s.densities.as_deref()).collect(),
            Stage::Eval(s) => vec![&s.real, &s.generated],
            Stage::Sweep(s) => vec![&s.generator, &s.regressor, &s.data, &s.real],
        }
    }

    fn config_json(&self) -> Result<serde_json::Value> {
        serde_json::to_value(self).map_err(|e| Error::Format(format!("stage config: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub name: String,
    pub seed: u64,
    #[serde(default)]
    pub stages: Vec<Stage>,
}

impl ExperimentPlan {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(format!("plan: {e}")))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidConfig(format!("plan: {e}")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    /// Seed handed to stage `index`.
    pub fn stage_seed(&self, index: usize) -> u64 {
        Rng::new(self.seed).fork(index as u64).next_u64()
    }
}

/// Executes stages in order inside one run directory.
#[derive(Debug, Clone)]
pub struct Runner {
    root: PathBuf,
    plan_name: String,
}

struct StageOutput {
    outputs: Vec<String>,
    metrics: BTreeMap<String, f64>,
    /// Extra manifests (one per sweep configuration).
    children: Vec<ChildManifest>,
}

struct ChildManifest {
    stage: String,
    config: serde_json::Value,
    outputs: Vec<String>,
    metrics: BTreeMap<String, f64>,
}

impl Runner {
    pub fn new(root: impl Into<PathBuf>, plan_name: impl Into<String>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(root.join(MANIFEST_DIR))?;
        Ok(Runner {
            root,
            plan_name: plan_name.into(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Absolute names pass through; relative names live in the run directory.
    pub fn resolve(&self, name: &str) -> PathBuf {
        let p = Path::new(name);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.root.join(p)
        }
    }

    fn hashes(&self, names: &[String]) -> Result<BTreeMap<String, String>> {
        names.iter().map(|n| Ok((n.clone(), sha256_file(&self.resolve(n))?))).collect()
    }

    /// Runs one stage and writes its manifest(s). `first_index` numbers the
    /// first manifest; sweep stages write one manifest per configuration.
    pub fn run_stage(&self, stage: &Stage, first_index: usize, seed: u64) -> Result<Vec<RunManifest>> {
        let inputs: Vec<String> = stage.inputs().into_iter().map(String::from).collect();
        for name in &inputs {
            if !self.resolve(name).exists() {
                return Err(Error::MissingInput(format!("{} (needed by {})", name, stage.kind())));
            }
        }
        let input_hashes = self.hashes(&inputs)?;
        log::info!("stage {} ({})", first_index, stage.kind());
        let out = match stage {
            Stage::GenData(s) => self.gen_data(s, seed)?,
            Stage::Pretrain(s) => self.pretrain(s, seed)?,
            Stage::FitDensity(s) => self.fit_density(s)?,
            Stage::TrainRegressor(s) => self.train_regressor(s, seed)?,
            Stage::Perturb(s) => self.perturb(s, seed)?,
            Stage::Sample(s) => self.sample(s, seed)?,
            Stage::Finetune(s) => self.finetune(s, seed)?,
            Stage::Eval(s) => self.eval(s)?,
            Stage::Sweep(s) => self.sweep(s, seed)?,
        };

        let mut manifests = Vec::new();
        let mut push = |stage_name: String, config: serde_json::Value, outputs: &[String], metrics: BTreeMap<String, f64>| -> Result<()> {
            let index = first_index + manifests.len();
            let mut m = RunManifest {
                plan: self.plan_name.clone(),
                stage: stage_name,
                index,
                seed,
                rng_contract: RNG_CONTRACT.to_string(),
                config,
                inputs: input_hashes.clone(),
                outputs: self.hashes(outputs)?,
                metrics,
                content_hash: String::new(),
                created_unix: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
            };
            m.content_hash = m.compute_hash()?;
            fs::write(self.root.join(MANIFEST_DIR).join(m.file_name()), m.to_json()?)?;
            manifests.push(m);
            Ok(())
        };
        if out.children.is_empty() {
            push(stage.kind().to_string(), stage.config_json()?, &out.outputs, out.metrics)?;
        } else {
            for c in out.children {
                push(c.stage, c.config, &c.outputs, c.metrics)?;
            }
        }
        Ok(manifests)
    }

    fn load_features(&self, name: &str) -> Result<Matrix> {
        formats::read_features(self.resolve(name))
    }

    fn load_regressor(&self, name: &str) -> Result<DensityRegressor> {
        DensityRegressor::from_net(formats::read_mlpw(self.resolve(name))?)
    }

    fn gen_data(&self, s: &GenDataStage, seed: u64) -> Result<StageOutput> {
        let dist = s.resolved_distribution();
        let spec = SyntheticSpec {
            distribution: dist.clone(),
            n: s.n,
            seed,
        };
        let data = generate_synthetic(&spec)?;
        formats::write_fvec(self.resolve(&s.output), &data.features.features)?;
        let truth = truth_name(&s.output);
        formats::write_dens(self.resolve(&truth), &DensityFile { densities: data.true_density, k: 0, n: 0 })?;
        let mut outputs = vec![s.output.clone(), truth];
        let mut metrics = BTreeMap::from([("n".to_string(), s.n as f64), ("dim".to_string(), dist.dim() as f64)]);
        if s.heldout > 0 {
            let held = generate_synthetic(&SyntheticSpec {
                n: s.heldout,
                seed: seed.wrapping_add(1),
                ..spec
            })?;
            formats::write_fvec(self.resolve(&s.heldout_output), &held.features.features)?;
            let truth = truth_name(&s.heldout_output);
            formats::write_dens(self.resolve(&truth), &DensityFile { densities: held.true_density, k: 0, n: 0 })?;
            outputs.push(s.heldout_output.clone());
            outputs.push(truth);
            metrics.insert("heldout".into(), s.heldout as f64);
        }
        Ok(StageOutput { outputs, metrics, children: vec![] })
    }

    fn pretrain(&self, s: &PretrainStage, seed: u64) -> Result<StageOutput> {
        let data = self.load_features(&s.data)?;
        let dim = data.cols();
        let arch = GanArch {
            latent_dim: if s.latent_dim == 0 { dim } else { s.latent_dim },
            data_dim: dim,
            generator_hidden: s.hidden.clone(),
            critic_hidden: s.hidden.clone(),
            ..GanArch::default()
        };
        let pair = train_gan(&data, &arch, &s.train, seed)?;
        let dir = self.resolve(&s.output);
        formats::save_gan(&dir, &pair)?;
        let log_name = format!("{}_log.csv", s.output.trim_end_matches('/'));
        write_iteration_log(&self.resolve(&log_name), &pair.log)?;
        let mut metrics = BTreeMap::new();
        if let Some(last) = pair.log.last() {
            metrics.insert("final_critic_loss".into(), last.critic_loss);
            metrics.insert("final_generator_loss".into(), last.generator_loss);
        }
        if let Some(h) = &s.heldout {
            let held = FeatureSet::new(self.load_features(h)?, h.clone())?;
            let untrained = train_gan(&data, &arch, &PretrainConfig { iterations: 0, ..s.train.clone() }, seed)?;
            let n = held.len().max(2);
            let score = |g: &crate::mlp::Mlp| -> Result<f64> {
                let z = draw_latents(&mut Rng::new(seed).fork(100), n, arch.latent_dim);
                frechet_distance(&held, &FeatureSet::new(g.forward(&z)?, "generated")?)
            };
            metrics.insert("frechet_heldout".into(), score(&pair.generator)?);
            metrics.insert("frechet_untrained".into(), score(&untrained.generator)?);
        }
        Ok(StageOutput {
            outputs: vec![s.output.clone(), log_name],
            metrics,
            children: vec![],
        })
    }

    fn fit_density(&self, s: &FitDensityStage) -> Result<StageOutput> {
        let fs = FeatureSet::new(self.load_features(&s.data)?, s.data.clone())?;
        let cfg = DensityConfig { k: s.k, n: s.n };
        let est = estimate_density(&fs, &cfg)?;
        let mean = est.densities.iter().sum::<f64>() / est.len().max(1) as f64;
        formats::write_dens(self.resolve(&s.output), &DensityFile::new(est.densities, &cfg)?)?;
        Ok(StageOutput {
            outputs: vec![s.output.clone()],
            metrics: BTreeMap::from([("mean_density".to_string(), mean)]),
            children: vec![],
        })
    }

    fn train_regressor(&self, s: &TrainRegressorStage, seed: u64) -> Result<StageOutput> {
        let fs = FeatureSet::new(self.load_features(&s.data)?, s.data.clone())?;
        let dens = formats::read_dens(self.resolve(&s.densities))?;
        let est = DensityEstimate {
            avg_knn_distances: vec![],
            config: DensityConfig { k: dens.k as usize, n: dens.n },
            densities: dens.densities,
        };
        let cfg = RegressorConfig { seed, ..s.regressor.clone() };
        let reg = train_regressor(&fs, &est, &cfg)?;
        formats::write_mlpw(self.resolve(&s.output), &reg.net)?;
        let mut metrics = BTreeMap::new();
        if let Some(st) = &reg.stats {
            metrics.insert("final_mse".into(), st.final_mse);
            if let Some(v) = st.holdout_mse {
                metrics.insert("holdout_mse".into(), v);
            }
            if let Some(v) = st.holdout_r2 {
                metrics.insert("holdout_r2".into(), v);
            }
        }
        Ok(StageOutput { outputs: vec![s.output.clone()], metrics, children: vec![] })
    }

    fn perturb(&self, s: &PerturbStage, seed: u64) -> Result<StageOutput> {
        let gen = formats::read_generator(self.resolve(&s.generator))?;
        let reg = self.load_regressor(&s.regressor)?;
        let zs = draw_latents(&mut Rng::new(seed), s.count, gen.input_dim());
        let results = perturb_batch(&gen, &reg, &zs, &s.perturb)?;
        let d = gen.input_dim();
        let mut w = csv_writer(&self.resolve(&s.output))?;
        let mut header: Vec<String> = (0..d).map(|i| format!("z{i}")).collect();
        header.extend((0..d).map(|i| format!("delta{i}")));
        header.extend(["density_before".to_string(), "density_after".to_string()]);
        w.write_record(&header).map_err(csv_err)?;
        let mut raised = 0usize;
        let mut gain = 0.0;
        for r in &results {
            let mut row: Vec<String> = r.original_z.iter().map(|v| v.to_string()).collect();
            row.extend(r.delta.iter().map(|v| v.to_string()));
            row.push(r.density_before.to_string());
            row.push(r.density_after.to_string());
            w.write_record(&row).map_err(csv_err)?;
            if r.density_after > r.density_before {
                raised += 1;
            }
            gain += r.density_after - r.density_before;
        }
        w.flush()?;
        let n = results.len().max(1) as f64;
        Ok(StageOutput {
            outputs: vec![s.output.clone()],
            metrics: BTreeMap::from([
                ("fraction_raised".to_string(), raised as f64 / n),
                ("mean_density_change".to_string(), gain / n),
            ]),
            children: vec![],
        })
    }

    fn threshold(&self, reg: &DensityRegressor, data: &str, percentile: f64) -> Result<f64> {
        let x = self.load_features(data)?;
        Ok(calibrate_threshold(&pseudo_density(reg, &x)?, percentile)?.threshold_value)
    }

    fn sample(&self, s: &SampleStage, seed: u64) -> Result<StageOutput> {
        let gen = formats::read_generator(self.resolve(&s.generator))?;
        let reg = self.load_regressor(&s.regressor)?;
        let tau = match s.tau {
            Some(t) => t,
            None => self.threshold(&reg, &s.data, s.tau_percentile)?,
        };
        let cfg = SamplingConfig {
            max_attempts_per_accept: s.max_attempts_per_accept,
            ..SamplingConfig::new(tau, s.weight)
        };
        let batch = importance_sample(&gen, &reg, &cfg, s.count, &mut Rng::new(seed))?;
        formats::write_fvec(self.resolve(&s.output), &batch.outputs)?;
        Ok(StageOutput {
            outputs: vec![s.output.clone()],
            metrics: BTreeMap::from([
                ("threshold".to_string(), tau),
                ("attempts".to_string(), batch.attempts as f64),
                ("acceptance_rate".to_string(), batch.acceptance_rate()),
            ]),
            children: vec![],
        })
    }

    fn finetune(&self, s: &FinetuneStage, seed: u64) -> Result<StageOutput> {
        let mut pair = formats::load_gan(self.resolve(&s.gan), s.generator_lr, s.critic_lr)?;
        let reg = self.load_regressor(&s.regressor)?;
        let data = self.load_features(&s.data)?;
        let real_density = match &s.densities {
            Some(d) => formats::read_dens(self.resolve(d))?.densities,
            None => pseudo_density(&reg, &data)?,
        };
        let tau = calibrate_threshold(&real_density, s.tau_percentile)?.threshold_value;
        let ds = WeightedDataset::new(data, real_density, tau, s.weight)?;
        let cfg = FinetuneConfig {
            batch_size: s.batch_size,
            iterations: s.iterations,
            generator_lr: s.generator_lr,
            critic_lr: s.critic_lr,
            seed,
            gp_coef: s.gp_coef,
            ..FinetuneConfig::new(tau, s.weight)
        };
        finetune_gan(&mut pair, &ds, &reg, &cfg)?;
        formats::save_gan(self.resolve(&s.output), &pair)?;
        write_iteration_log(&self.resolve(&s.log), &pair.log)?;
        let mut metrics = BTreeMap::from([("threshold".to_string(), tau)]);
        if let Some(last) = pair.log.last() {
            metrics.insert("final_critic_loss".into(), last.critic_loss);
            metrics.insert("final_generator_loss".into(), last.generator_loss);
        }
        Ok(StageOutput {
            outputs: vec![s.output.clone(), s.log.clone()],
            metrics,
            children: vec![],
        })
    }

    fn eval(&self, s: &EvalStage) -> Result<StageOutput> {
        let real = FeatureSet::new(self.load_features(&s.real)?, s.real.clone())?;
        let gen = FeatureSet::new(self.load_features(&s.generated)?, s.generated.clone())?;
        let report = evaluate(&real, &gen, s.k)?;
        fs::write(self.resolve(&s.output), format!("{}\n{}", report.to_text(), report.to_kv_lines()))?;
        Ok(StageOutput {
            outputs: vec![s.output.clone()],
            metrics: BTreeMap::from([
                ("precision".to_string(), report.precision),
                ("recall".to_string(), report.recall),
                ("frechet_distance".to_string(), report.frechet_distance),
            ]),
            children: vec![],
        })
    }

    /// Every (τ, w) configuration draws from the same seeded attempt stream so
    /// the configurations differ only in their accept decisions.
    fn sweep(&self, s: &SweepStage, seed: u64) -> Result<StageOutput> {
        if s.tau_percentiles.is_empty() || s.weights.is_empty() {
            return Err(Error::InvalidConfig("sweep needs at least one threshold and one weight".into()));
        }
        let gen = formats::read_generator(self.resolve(&s.generator))?;
        let reg = self.load_regressor(&s.regressor)?;
        let calib = pseudo_density(&reg, &self.load_features(&s.data)?)?;
        let real = FeatureSet::new(self.load_features(&s.real)?, s.real.clone())?;
        let out_dir = self.resolve(&s.output);
        fs::create_dir_all(&out_dir)?;

        let run = |tau: f64, w: f64| -> Result<SweepPoint> {
            let batch = importance_sample(&gen, &reg, &SamplingConfig::new(tau, w), s.count, &mut Rng::new(seed))?;
            let report = evaluate(&real, &FeatureSet::new(batch.outputs.clone(), "sweep")?, s.k)?;
            Ok(SweepPoint {
                tau_percentile: f64::NAN,
                threshold: tau,
                weight: w,
                precision: report.precision,
                recall: report.recall,
                frechet_distance: report.frechet_distance,
                acceptance_rate: batch.acceptance_rate(),
                samples: batch.outputs,
            })
        };

        let baseline = run(calibrate_threshold(&calib, 50.0)?.threshold_value, 1.0)?;
        let mut points = Vec::new();
        let mut children = Vec::new();
        for &p in &s.tau_percentiles {
            let tau = calibrate_threshold(&calib, p)?.threshold_value;
            for &w in &s.weights {
                let mut pt = run(tau, w)?;
                pt.tau_percentile = p;
                let name = format!("{}/tau{}_w{}.fvec", s.output.trim_end_matches('/'), p, w);
                formats::write_fvec(self.resolve(&name), &pt.samples)?;
                children.push(ChildManifest {
                    stage: "sweep".into(),
                    config: serde_json::json!({
                        "tau_percentile": p,
                        "threshold": tau,
                        "weight": w,
                        "count": s.count,
                        "k": s.k,
                    }),
                    outputs: vec![name],
                    metrics: pt.metrics(),
                });
                points.push(pt);
            }
        }

        let all = format!("{}/sweep.csv", s.output.trim_end_matches('/'));
        let frontier = format!("{}/pareto.csv", s.output.trim_end_matches('/'));
        let mut w = csv_writer(&self.resolve(&all))?;
        w.write_record(SweepPoint::HEADER).map_err(csv_err)?;
        w.write_record(baseline.record(true)).map_err(csv_err)?;
        for p in &points {
            w.write_record(p.record(false)).map_err(csv_err)?;
        }
        w.flush()?;
        let pr: Vec<(f64, f64)> = points.iter().map(|p| (p.precision, p.recall)).collect();
        let mut w = csv_writer(&self.resolve(&frontier))?;
        w.write_record(SweepPoint::HEADER).map_err(csv_err)?;
        for i in pareto_front(&pr) {
            w.write_record(points[i].record(false)).map_err(csv_err)?;
        }
        w.flush()?;
        for c in children.iter_mut() {
            c.outputs.push(all.clone());
            c.outputs.push(frontier.clone());
            c.metrics.insert("baseline_precision".into(), baseline.precision);
            c.metrics.insert("baseline_recall".into(), baseline.recall);
        }
        Ok(StageOutput {
            outputs: vec![all, frontier],
            metrics: BTreeMap::new(),
            children,
        })
    }
}

fn truth_name(output: &str) -> String {
    let stem = output.strip_suffix(".fvec").unwrap_or(output);
    format!("{stem}.truth.dens")
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(format!("CSV: {e}"))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    Ok(csv::Writer::from_writer(fs::File::create(path)?))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn write_iteration_log(path: &Path, log: &[IterationLog]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record([
        "iteration",
        "critic_loss",
        "generator_loss",
        "gradient_penalty",
        "mean_generated_density",
        "generated_attempts",
    ])
    .map_err(csv_err)?;
    for e in log {
        w.write_record([
            e.iteration.to_string(),
            e.critic_loss.to_string(),
            e.generator_loss.to_string(),
            e.gradient_penalty.to_string(),
            opt(e.mean_generated_density),
            e.generated_attempts.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// One (τ, w) configuration of an inference-time sampling sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub tau_percentile: f64,
    pub threshold: f64,
    pub weight: f64,
    pub precision: f64,
    pub recall: f64,
    pub frechet_distance: f64,
    pub acceptance_rate: f64,
    pub samples: Matrix,
}

impl SweepPoint {
    const HEADER: [&'static str; 8] = [
        "tau_percentile",
        "threshold",
        "weight",
        "precision",
        "recall",
        "frechet_distance",
        "acceptance_rate",
        "baseline",
    ];

    fn record(&self, baseline: bool) -> [String; 8] {
        [
            if self.tau_percentile.is_nan() { String::new() } else { self.tau_percentile.to_string() },
            self.threshold.to_string(),
            self.weight.to_string(),
            self.precision.to_string(),
            self.recall.to_string(),
            self.frechet_distance.to_string(),
            self.acceptance_rate.to_string(),
            baseline.to_string(),
        ]
    }

    fn metrics(&self) -> BTreeMap<String, f64> {
        BTreeMap::from([
            ("precision".to_string(), self.precision),
            ("recall".to_string(), self.recall),
            ("frechet_distance".to_string(), self.frechet_distance),
            ("acceptance_rate".to_string(), self.acceptance_rate),
        ])
    }
}

/// Indices of the points not dominated by any other point (both coordinates
/// at least as large, one strictly larger). Exact duplicates are all kept.
pub fn pareto_front(points: &[(f64, f64)]) -> Vec<usize> {
    (0..points.len())
        .filter(|&i| {
            let (pi, ri) = points[i];
            !points
                .iter()
                .any(|&(pj, rj)| pj >= pi && rj >= ri && (pj > pi || rj > ri))
        })
        .collect()
}

/// Runs every stage of `plan` in `root`. Stage `i` gets seed
/// [`ExperimentPlan::stage_seed`]`(i)`. On error the manifests of completed
/// stages stay on disk.
pub fn run_plan(plan: &ExperimentPlan, root: impl Into<PathBuf>) -> Result<Vec<RunManifest>> {
    let runner = Runner::new(root, plan.name.clone())?;
    let mut all = Vec::new();
    for (i, stage) in plan.stages.iter().enumerate() {
        let manifests = runner.run_stage(stage, all.len(), plan.stage_seed(i)).map_err(|e| {
            log::error!("stage {} ({}) failed: {e}", i, stage.kind());
            e
        })?;
        all.extend(manifests);
    }
    Ok(all)
}

/// Reads every manifest in `root/manifests`, ordered by file name.
pub fn read_manifests(root: impl AsRef<Path>) -> Result<Vec<RunManifest>> {
    let dir = root.as_ref().join(MANIFEST_DIR);
    let mut paths: Vec<PathBuf> = fs::read_dir(&dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    paths.retain(|p| p.extension().is_some_and(|e| e == "json"));
    paths.sort();
    paths.into_iter().map(RunManifest::read).collect()
}

/// Plain-text table of stage metrics.
pub fn summary_table(manifests: &[RunManifest]) -> String {
    let mut out = String::from("index  stage            metrics\n");
    for m in manifests {
        let metrics: Vec<String> = m.metrics.iter().map(|(k, v)| format!("{k}={v:.6}")).collect();
        out.push_str(&format!("{:>5}  {:<15}  {}\n", m.index, m.stage, metrics.join(" ")));
    }
    out
}
