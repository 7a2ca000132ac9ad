//! Synthetic benchmark distributions with analytic densities.
//!
//! Every generated set comes with the true density of each sample, so the
//! k-NN pseudo density can be checked against ground truth.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::density::FeatureSet;
use crate::error::{Error, Result};
use crate::gan::{train_gan, GanArch, GanPair, PretrainConfig};
use crate::linalg::Matrix;
use crate::metrics::frechet_distance;
use crate::rng::Rng;
use crate::sampler::draw_latents;

/// Quadrature nodes per moon arc.
const MOON_NODES: usize = 512;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub weight: f64,
    pub mean: Vec<f64>,
    /// Full covariance, row-major rows.
    pub cov: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Distribution {
    GaussianMixture { components: Vec<Component> },
    /// `modes` isotropic Gaussians evenly spaced on a circle.
    Ring { modes: usize, radius: f64, std: f64 },
    /// Two interleaved half circles with isotropic Gaussian noise.
    TwoMoons { noise: f64 },
}

impl Distribution {
    /// 8 modes on a radius-2 circle, std 0.2: the toy GAN benchmark.
    pub fn ring_benchmark() -> Self {
        Distribution::Ring {
            modes: 8,
            radius: 2.0,
            std: 0.2,
        }
    }

    /// Three anisotropic components with unequal weights and spreads.
    pub fn mixture_benchmark() -> Self {
        Distribution::GaussianMixture {
            components: vec![
                Component {
                    weight: 0.5,
                    mean: vec![0.0, 0.0],
                    cov: vec![vec![1.0, 0.3], vec![0.3, 0.5]],
                },
                Component {
                    weight: 0.3,
                    mean: vec![3.0, 0.5],
                    cov: vec![vec![0.3, 0.0], vec![0.0, 0.3]],
                },
                Component {
                    weight: 0.2,
                    mean: vec![0.5, 3.0],
                    cov: vec![vec![0.2, 0.0], vec![0.0, 0.8]],
                },
            ],
        }
    }

    /// Three components in 8-D with different spreads and weights. Used for
    /// inference-time sampling sweeps.
    pub fn mixture8_benchmark() -> Self {
        let iso = |v: f64| -> Vec<Vec<f64>> {
            (0..8)
                .map(|i| {
                    let mut r = vec![0.0; 8];
                    r[i] = v;
                    r
                })
                .collect()
        };
        let axis = |i: usize, v: f64| {
            let mut m = vec![0.0; 8];
            m[i] = v;
            m
        };
        Distribution::GaussianMixture {
            components: vec![
                Component { weight: 0.5, mean: vec![0.0; 8], cov: iso(0.5) },
                Component { weight: 0.3, mean: axis(0, 3.0), cov: iso(1.0) },
                Component { weight: 0.2, mean: axis(1, 3.0), cov: iso(0.25) },
            ],
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Distribution::GaussianMixture { components } => components.first().map_or(0, |c| c.mean.len()),
            Distribution::Ring { .. } | Distribution::TwoMoons { .. } => 2,
        }
    }

    /// Ring as an explicit mixture; other kinds unchanged.
    fn components(&self) -> Option<Vec<Component>> {
        match self {
            Distribution::GaussianMixture { components } => Some(components.clone()),
            Distribution::Ring { modes, radius, std } => Some(
                (0..*modes)
                    .map(|i| {
                        let a = 2.0 * std::f64::consts::PI * i as f64 / *modes as f64;
                        Component {
                            weight: 1.0 / *modes as f64,
                            mean: vec![radius * a.cos(), radius * a.sin()],
                            cov: vec![vec![std * std, 0.0], vec![0.0, std * std]],
                        }
                    })
                    .collect(),
            ),
            Distribution::TwoMoons { .. } => None,
        }
    }

    /// Centres of the mixture components (ring modes included).
    pub fn mode_centers(&self) -> Vec<Vec<f64>> {
        self.components()
            .map(|cs| cs.into_iter().map(|c| c.mean).collect())
            .unwrap_or_default()
    }

    pub fn compile(&self) -> Result<CompiledDistribution> {
        match self {
            Distribution::TwoMoons { noise } => {
                if !(*noise > 0.0 && noise.is_finite()) {
                    return Err(Error::InvalidConfig(format!("two-moons noise must be > 0, got {noise}")));
                }
                Ok(CompiledDistribution::Moons { noise: *noise })
            }
            Distribution::Ring { modes, radius, std } if *modes == 0 || !(*std > 0.0) || !radius.is_finite() => Err(
                Error::InvalidConfig(format!("ring needs modes >= 1 and std > 0 (modes={modes}, std={std})")),
            ),
            _ => {
                let comps = self.components().expect("mixture-like");
                compile_mixture(&comps)
            }
        }
    }
}

/// Named benchmark distributions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Benchmark {
    Ring,
    Mixture2d,
    Mixture8d,
    TwoMoons,
}

impl Benchmark {
    pub fn distribution(self) -> Distribution {
        match self {
            Benchmark::Ring => Distribution::ring_benchmark(),
            Benchmark::Mixture2d => Distribution::mixture_benchmark(),
            Benchmark::Mixture8d => Distribution::mixture8_benchmark(),
            Benchmark::TwoMoons => Distribution::TwoMoons { noise: 0.1 },
        }
    }
}

impl std::str::FromStr for Benchmark {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ring" => Ok(Benchmark::Ring),
            "mixture2d" | "mixture-2d" => Ok(Benchmark::Mixture2d),
            "mixture8d" | "mixture-8d" => Ok(Benchmark::Mixture8d),
            "two-moons" => Ok(Benchmark::TwoMoons),
            other => Err(Error::InvalidConfig(format!(
                "unknown benchmark {other:?} (expected ring, mixture2d, mixture8d or two-moons)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
struct CompiledComponent {
    weight: f64,
    mean: DVector<f64>,
    chol: DMatrix<f64>,
    precision: DMatrix<f64>,
    log_norm: f64,
}

#[derive(Debug, Clone)]
pub enum CompiledDistribution {
    Mixture(Vec<CompiledComponentHandle>),
    Moons { noise: f64 },
}

/// Opaque, validated mixture component.
#[derive(Debug, Clone)]
pub struct CompiledComponentHandle(CompiledComponent);

fn compile_mixture(comps: &[Component]) -> Result<CompiledDistribution> {
    if comps.is_empty() {
        return Err(Error::InvalidConfig("mixture needs at least one component".into()));
    }
    let dim = comps[0].mean.len();
    if dim == 0 {
        return Err(Error::InvalidConfig("mixture dimension must be >= 1".into()));
    }
    let total: f64 = comps.iter().map(|c| c.weight).sum();
    if comps.iter().any(|c| !(c.weight >= 0.0)) || (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidConfig(format!("mixture weights must be non-negative and sum to 1, got {total}")));
    }
    let mut out = Vec::with_capacity(comps.len());
    for (i, c) in comps.iter().enumerate() {
        if c.mean.len() != dim || c.cov.len() != dim || c.cov.iter().any(|r| r.len() != dim) {
            return Err(Error::shape("mixture component", dim, c.mean.len()));
        }
        let cov = DMatrix::from_fn(dim, dim, |r, k| c.cov[r][k]);
        if (&cov - cov.transpose()).abs().max() > 1e-12 {
            return Err(Error::InvalidConfig(format!("component {i} covariance is not symmetric")));
        }
        let chol = Cholesky::new(cov)
            .ok_or_else(|| Error::InvalidConfig(format!("component {i} covariance is not positive definite")))?;
        let l = chol.l();
        let log_det = 2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let precision = chol.inverse();
        let log_norm = -0.5 * (dim as f64 * (2.0 * std::f64::consts::PI).ln() + log_det);
        out.push(CompiledComponentHandle(CompiledComponent {
            weight: c.weight,
            mean: DVector::from_vec(c.mean.clone()),
            chol: l,
            precision,
            log_norm,
        }));
    }
    Ok(CompiledDistribution::Mixture(out))
}

fn moon_point(upper: bool, t: f64) -> (f64, f64) {
    if upper {
        (t.cos(), t.sin())
    } else {
        (1.0 - t.cos(), 0.5 - t.sin())
    }
}

impl CompiledDistribution {
    /// Draws one sample and the index of the component (or moon) it came from.
    pub fn sample(&self, rng: &mut Rng) -> (Vec<f64>, usize) {
        match self {
            CompiledDistribution::Mixture(cs) => {
                let u = rng.uniform();
                let mut acc = 0.0;
                let mut pick = cs.len() - 1;
                for (i, c) in cs.iter().enumerate() {
                    acc += c.0.weight;
                    if u < acc {
                        pick = i;
                        break;
                    }
                }
                let c = &cs[pick].0;
                let z = DVector::from_iterator(c.mean.len(), (0..c.mean.len()).map(|_| rng.normal()));
                let x = &c.mean + &c.chol * z;
                (x.iter().copied().collect(), pick)
            }
            CompiledDistribution::Moons { noise } => {
                let upper = rng.uniform() < 0.5;
                let t = std::f64::consts::PI * rng.uniform();
                let (x, y) = moon_point(upper, t);
                (vec![x + noise * rng.normal(), y + noise * rng.normal()], usize::from(!upper))
            }
        }
    }

    /// True probability density at `x`. Two-moons uses midpoint quadrature over the arcs.
    pub fn density(&self, x: &[f64]) -> f64 {
        match self {
            CompiledDistribution::Mixture(cs) => cs
                .iter()
                .map(|c| {
                    let c = &c.0;
                    let d = DVector::from_iterator(x.len(), x.iter().zip(c.mean.iter()).map(|(a, m)| a - m));
                    let q = (&c.precision * &d).dot(&d);
                    c.weight * (c.log_norm - 0.5 * q).exp()
                })
                .sum(),
            CompiledDistribution::Moons { noise } => {
                let s2 = noise * noise;
                let norm = 1.0 / (2.0 * std::f64::consts::PI * s2);
                let mut acc = 0.0;
                for upper in [true, false] {
                    for i in 0..MOON_NODES {
                        let t = std::f64::consts::PI * (i as f64 + 0.5) / MOON_NODES as f64;
                        let (mx, my) = moon_point(upper, t);
                        let q = (x[0] - mx).powi(2) + (x[1] - my).powi(2);
                        acc += (-0.5 * q / s2).exp();
                    }
                }
                0.5 * norm * acc / MOON_NODES as f64
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub distribution: Distribution,
    pub n: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub features: FeatureSet,
    /// Analytic density of each sample.
    pub true_density: Vec<f64>,
    /// Component (or moon) index of each sample.
    pub labels: Vec<usize>,
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticData> {
    let dist = spec.distribution.compile()?;
    let dim = spec.distribution.dim();
    let mut rng = Rng::new(spec.seed);
    let mut data = Vec::with_capacity(spec.n * dim);
    let mut true_density = Vec::with_capacity(spec.n);
    let mut labels = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let (x, label) = dist.sample(&mut rng);
        let xf: Vec<f32> = x.iter().map(|&v| v as f32).collect();
        // density of the stored (rounded) point
        let xr: Vec<f64> = xf.iter().map(|&v| v as f64).collect();
        true_density.push(dist.density(&xr));
        data.extend(xf);
        labels.push(label);
    }
    let tag = format!("synthetic:{}:seed={}", kind_name(&spec.distribution), spec.seed);
    Ok(SyntheticData {
        features: FeatureSet::new(Matrix::new(spec.n, dim, data)?, tag)?,
        true_density,
        labels,
    })
}

fn kind_name(d: &Distribution) -> &'static str {
    match d {
        Distribution::GaussianMixture { .. } => "gaussian-mixture",
        Distribution::Ring { .. } => "ring",
        Distribution::TwoMoons { .. } => "two-moons",
    }
}

/// A GAN trained on a synthetic set, with its Fréchet distance to a held-out
/// set before and after training.
#[derive(Debug, Clone)]
pub struct ToyGan {
    pub pair: GanPair,
    pub train: SyntheticData,
    pub heldout: SyntheticData,
    pub frechet_heldout: f64,
    /// Distance of the untrained generator: the baseline training must beat.
    pub frechet_untrained: f64,
}

/// Generates `spec.n` training and `heldout` held-out samples (seed + 1) and
/// trains a GAN on the former. Architecture dimensions follow the data.
pub fn pretrain_toy_gan(spec: &SyntheticSpec, heldout: usize, arch: &GanArch, cfg: &PretrainConfig, seed: u64) -> Result<ToyGan> {
    let train = generate_synthetic(spec)?;
    let held = generate_synthetic(&SyntheticSpec {
        n: heldout,
        seed: spec.seed.wrapping_add(1),
        ..spec.clone()
    })?;
    if arch.data_dim != spec.distribution.dim() {
        return Err(Error::shape("GAN data dimension", spec.distribution.dim(), arch.data_dim));
    }
    let untrained = train_gan(&train.features.features, arch, &PretrainConfig { iterations: 0, ..cfg.clone() }, seed)?;
    let pair = train_gan(&train.features.features, arch, cfg, seed)?;
    let score = |p: &GanPair| -> Result<f64> {
        let mut rng = Rng::new(seed).fork(100);
        let g = p.generator.forward(&draw_latents(&mut rng, heldout.max(2), arch.latent_dim))?;
        frechet_distance(&held.features, &FeatureSet::new(g, "generated")?)
    };
    let (frechet_heldout, frechet_untrained) = if heldout >= 2 {
        (score(&pair)?, score(&untrained)?)
    } else {
        (f64::NAN, f64::NAN)
    };
    Ok(ToyGan {
        pair,
        train,
        heldout: held,
        frechet_heldout,
        frechet_untrained,
    })
}

/// Analytic density at each row of `x`.
pub fn true_density(dist: &Distribution, x: &Matrix) -> Result<Vec<f64>> {
    if x.cols() != dist.dim() {
        return Err(Error::shape("true density input", dist.dim(), x.cols()));
    }
    let c = dist.compile()?;
    Ok((0..x.rows()).map(|i| c.density(&x.row_f64(i))).collect())
}

/// Number of mixture modes whose nearest generated sample lies within
/// `sigmas` standard deviations (isotropic, per-component largest std) of the centre.
pub fn modes_covered(dist: &Distribution, generated: &Matrix, sigmas: f64) -> Result<usize> {
    let comps = dist
        .components()
        .ok_or_else(|| Error::InvalidConfig("mode coverage needs a mixture distribution".into()))?;
    if generated.cols() != dist.dim() {
        return Err(Error::shape("generated samples", dist.dim(), generated.cols()));
    }
    let covered = comps
        .iter()
        .filter(|c| {
            let std = (0..c.mean.len()).map(|i| c.cov[i][i]).fold(0.0f64, f64::max).sqrt();
            generated.iter_rows().any(|r| {
                let d2: f64 = r.iter().zip(&c.mean).map(|(&a, m)| (a as f64 - m).powi(2)).sum();
                d2.sqrt() <= sigmas * std
            })
        })
        .count();
    Ok(covered)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian(n: usize, seed: u64) -> SyntheticSpec {
        SyntheticSpec {
            distribution: Distribution::GaussianMixture {
                components: vec![Component {
                    weight: 1.0,
                    mean: vec![0.0, 0.0],
                    cov: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
                }],
            },
            n,
            seed,
        }
    }

    #[test]
    fn standard_gaussian_mean() {
        let d = generate_synthetic(&gaussian(1000, 11)).unwrap();
        for m in d.features.features.column_means() {
            assert!(m.abs() < 0.1, "{m}");
        }
        // density at origin of N(0, I) in 2-D is 1/(2π)
        let c = gaussian(1, 0).distribution.compile().unwrap();
        assert!((c.density(&[0.0, 0.0]) - 1.0 / (2.0 * std::f64::consts::PI)).abs() < 1e-12);
    }

    #[test]
    fn balanced_two_components() {
        let spec = SyntheticSpec {
            distribution: Distribution::GaussianMixture {
                components: vec![
                    Component { weight: 0.5, mean: vec![-50.0], cov: vec![vec![1.0]] },
                    Component { weight: 0.5, mean: vec![50.0], cov: vec![vec![1.0]] },
                ],
            },
            n: 2000,
            seed: 5,
        };
        let d = generate_synthetic(&spec).unwrap();
        let left = d.features.features.iter_rows().filter(|r| r[0] < 0.0).count();
        // binomial sd = sqrt(2000 * 0.25) ≈ 22.4
        assert!((left as f64 - 1000.0).abs() < 3.0 * 22.4);
        assert_eq!(left, d.labels.iter().filter(|&&l| l == 0).count());
    }

    #[test]
    fn empty_set_is_valid() {
        let d = generate_synthetic(&gaussian(0, 1)).unwrap();
        assert_eq!(d.features.len(), 0);
        assert_eq!(d.features.dim(), 2);
    }

    #[test]
    fn invalid_specs() {
        let bad_cov = Distribution::GaussianMixture {
            components: vec![Component { weight: 1.0, mean: vec![0.0, 0.0], cov: vec![vec![1.0, 2.0], vec![2.0, 1.0]] }],
        };
        assert!(bad_cov.compile().is_err());
        let bad_weights = Distribution::GaussianMixture {
            components: vec![Component { weight: 0.7, mean: vec![0.0], cov: vec![vec![1.0]] }],
        };
        assert!(bad_weights.compile().is_err());
        assert!(Distribution::TwoMoons { noise: 0.0 }.compile().is_err());
        assert!(Distribution::Ring { modes: 0, radius: 1.0, std: 0.1 }.compile().is_err());
    }

    #[test]
    fn moons_density_integrates_to_one() {
        let c = Distribution::TwoMoons { noise: 0.1 }.compile().unwrap();
        let h = 0.02;
        let mut total = 0.0;
        let mut x = -1.6;
        while x < 2.6 {
            let mut y = -1.1;
            while y < 1.6 {
                total += c.density(&[x, y]) * h * h;
                y += h;
            }
            x += h;
        }
        assert!((total - 1.0).abs() < 0.01, "{total}");
    }

    #[test]
    fn ring_modes() {
        let d = Distribution::ring_benchmark();
        let centers = d.mode_centers();
        assert_eq!(centers.len(), 8);
        let m = Matrix::from_rows(
            &centers.iter().map(|c| c.iter().map(|&v| v as f32).collect::<Vec<_>>()).collect::<Vec<_>>(),
            2,
        )
        .unwrap();
        assert_eq!(modes_covered(&d, &m, 3.0).unwrap(), 8);
        assert_eq!(modes_covered(&d, &m.select_rows(&[0, 1, 2]), 3.0).unwrap(), 3);
    }
}
