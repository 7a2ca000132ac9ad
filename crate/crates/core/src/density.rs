//! Pseudo density.
//!
//! For every sample the mean Euclidean distance `d_i` to its `k` nearest
//! neighbours (self excluded) defines an occupied volume proportional to
//! `d_i^n`; density is inversely proportional to that volume, then normalized
//! so that it averages to one over the dataset:
//!
//! ```text
//! rho_i = N * d_i^(-n) / sum_j d_j^(-n)
//! ```
//!
//! The ball-volume constant depends only on `n` and cancels in the
//! normalization, so it is never computed. A small MLP regressor is then fit
//! to `(features_i, rho_i)`; its output is the pseudo density of arbitrary
//! (generated) samples, and its input gradient drives latent perturbation.

use std::cmp::Ordering;
use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{squared_euclidean, Matrix};
use crate::mlp::{Activation, Layer, Mlp};
use crate::optim::OptimizerState;
use crate::rng::Rng;

/// Largest supported manifold dimensionality `n`.
pub const MAX_MANIFOLD_DIM: u32 = 8;

/// Feature vectors, one row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    pub features: Matrix,
    pub source_tag: String,
}

impl FeatureSet {
    pub fn new(features: Matrix, source_tag: impl Into<String>) -> Result<Self> {
        features.ensure_finite("feature set")?;
        Ok(FeatureSet {
            features,
            source_tag: source_tag.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.features.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DensityConfig {
    pub k: usize,
    pub n: u32,
}

impl Default for DensityConfig {
    fn default() -> Self {
        DensityConfig { k: 10, n: 1 }
    }
}

impl DensityConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidConfig("k must be >= 1".into()));
        }
        if self.n == 0 || self.n > MAX_MANIFOLD_DIM {
            return Err(Error::InvalidConfig(format!(
                "n must be in 1..={MAX_MANIFOLD_DIM}, got {}",
                self.n
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityEstimate {
    pub densities: Vec<f64>,
    pub avg_knn_distances: Vec<f64>,
    pub config: DensityConfig,
}

impl DensityEstimate {
    pub fn len(&self) -> usize {
        self.densities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.densities.is_empty()
    }
}

/// Indices of the `k` nearest rows to `query_row` among `data`, self excluded,
/// with distance ties broken by lower index. Returns `(index, distance)`
/// pairs in ascending order.
pub(crate) fn nearest_neighbors(data: &Matrix, query_row: usize, k: usize) -> Vec<(usize, f64)> {
    let q = data.row(query_row);
    let mut cand: Vec<(f64, usize)> = data
        .iter_rows()
        .enumerate()
        .filter(|&(j, _)| j != query_row)
        .map(|(j, r)| (squared_euclidean(q, r), j))
        .collect();
    let by_dist = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if cand.len() > k {
        cand.select_nth_unstable_by(k - 1, by_dist);
        cand.truncate(k);
    }
    cand.sort_unstable_by(by_dist);
    cand.into_iter().map(|(d2, j)| (j, d2.sqrt())).collect()
}

/// Mean distance from every sample to its `k` nearest neighbours, by exact brute force.
///
/// Fails with [`Error::ZeroDistance`] when a sample has `k` exact duplicates;
/// [`estimate_density`] deduplicates first and never hits that.
pub fn knn_avg_distance(fs: &FeatureSet, cfg: &DensityConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let n = fs.len();
    if n <= cfg.k {
        return Err(Error::InsufficientSamples { n, k: cfg.k });
    }
    let data = &fs.features;
    let d: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let nn = nearest_neighbors(data, i, cfg.k);
            nn.iter().map(|&(_, d)| d).sum::<f64>() / cfg.k as f64
        })
        .collect();
    if let Some(index) = d.iter().position(|&v| v == 0.0) {
        return Err(Error::ZeroDistance { index });
    }
    Ok(d)
}

/// Groups exactly equal rows. Returns the unique rows (first occurrence order)
/// and, for every input row, the index of its representative.
pub(crate) fn dedup_rows(m: &Matrix) -> (Matrix, Vec<usize>) {
    let mut seen: HashMap<Vec<u32>, usize> = HashMap::with_capacity(m.rows());
    let mut unique_idx = Vec::new();
    let mut rep = Vec::with_capacity(m.rows());
    for (i, row) in m.iter_rows().enumerate() {
        // +0.0 folds -0.0 into 0.0 so the two compare as duplicates
        let key: Vec<u32> = row.iter().map(|&v| (v + 0.0).to_bits()).collect();
        let next = unique_idx.len();
        let r = *seen.entry(key).or_insert_with(|| {
            unique_idx.push(i);
            next
        });
        rep.push(r);
    }
    (m.select_rows(&unique_idx), rep)
}

/// Normalized k-NN pseudo density of every sample.
///
/// Exact duplicate rows are collapsed before the neighbour search and each
/// copy receives its representative's density; normalization still runs
/// over all `N` input rows, so the mean is one.
pub fn estimate_density(fs: &FeatureSet, cfg: &DensityConfig) -> Result<DensityEstimate> {
    cfg.validate()?;
    let (unique, rep) = dedup_rows(&fs.features);
    if unique.rows() < fs.len() {
        log::info!(
            "density: {} duplicate rows collapsed onto {} unique samples",
            fs.len() - unique.rows(),
            unique.rows()
        );
    }
    let ufs = FeatureSet {
        features: unique,
        source_tag: fs.source_tag.clone(),
    };
    let unique_d = knn_avg_distance(&ufs, cfg)?;
    let d: Vec<f64> = rep.iter().map(|&r| unique_d[r]).collect();
    let densities = normalized_inverse_volume(&d, cfg.n);
    Ok(DensityEstimate {
        densities,
        avg_knn_distances: d,
        config: *cfg,
    })
}

/// `N * d_i^-n / sum_j d_j^-n`, evaluated in log space so large `n` or tiny
/// distances cannot overflow.
fn normalized_inverse_volume(d: &[f64], n: u32) -> Vec<f64> {
    if d.is_empty() {
        return Vec::new();
    }
    let logs: Vec<f64> = d.iter().map(|&di| -(n as f64) * di.ln()).collect();
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let unnorm: Vec<f64> = logs.iter().map(|&l| (l - max).exp()).collect();
    let total: f64 = unnorm.iter().sum();
    let scale = d.len() as f64 / total;
    unnorm.into_iter().map(|v| v * scale).collect()
}

/// Anything that assigns a scalar density to each row of a batch.
pub trait DensityScorer {
    fn input_dim(&self) -> usize;
    fn score(&self, x: &Matrix) -> Result<Vec<f64>>;
}

impl DensityScorer for Mlp {
    fn input_dim(&self) -> usize {
        Mlp::input_dim(self)
    }

    fn score(&self, x: &Matrix) -> Result<Vec<f64>> {
        if self.output_dim() != 1 {
            return Err(Error::shape("density scorer output", 1, self.output_dim()));
        }
        Ok(self.forward(x)?.data().iter().map(|&v| v as f64).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegressorConfig {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub holdout_fraction: f64,
    pub seed: u64,
}

impl Default for RegressorConfig {
    fn default() -> Self {
        RegressorConfig {
            hidden: vec![64, 64, 64],
            activation: Activation::LeakyRelu,
            epochs: 200,
            batch_size: 64,
            learning_rate: 1e-3,
            holdout_fraction: 0.1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingStats {
    /// MSE over the training split, with the final folded network.
    pub final_mse: f64,
    pub holdout_mse: Option<f64>,
    pub holdout_r2: Option<f64>,
    pub epochs: usize,
    pub seed: u64,
}

/// Axis-aligned box around the training features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportBox {
    pub lower: Vec<f32>,
    pub upper: Vec<f32>,
}

impl SupportBox {
    fn of(m: &Matrix) -> Option<Self> {
        if m.rows() == 0 {
            return None;
        }
        let mut lower = m.row(0).to_vec();
        let mut upper = lower.clone();
        for r in m.iter_rows() {
            for j in 0..r.len() {
                lower[j] = lower[j].min(r[j]);
                upper[j] = upper[j].max(r[j]);
            }
        }
        Some(SupportBox { lower, upper })
    }

    /// True when `x` lies outside the box widened by 10% of its extent per side.
    pub fn is_outside(&self, x: &[f32]) -> bool {
        x.iter().enumerate().any(|(j, &v)| {
            let pad = 0.1 * (self.upper[j] - self.lower[j]).max(f32::EPSILON);
            v < self.lower[j] - pad || v > self.upper[j] + pad
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityRegressor {
    pub net: Mlp,
    pub stats: Option<TrainingStats>,
    pub support: Option<SupportBox>,
}

impl DensityRegressor {
    /// Wraps a bare network (e.g. loaded from a checkpoint).
    pub fn from_net(net: Mlp) -> Result<Self> {
        if net.output_dim() != 1 {
            return Err(Error::shape("density regressor output", 1, net.output_dim()));
        }
        Ok(DensityRegressor {
            net,
            stats: None,
            support: None,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.net.input_dim()
    }

    /// Rows that fall outside the training support, when it is known.
    pub fn extrapolation_mask(&self, x: &Matrix) -> Vec<bool> {
        match &self.support {
            Some(b) if b.lower.len() == x.cols() => x.iter_rows().map(|r| b.is_outside(r)).collect(),
            _ => vec![false; x.rows()],
        }
    }
}

impl DensityScorer for DensityRegressor {
    fn input_dim(&self) -> usize {
        self.net.input_dim()
    }

    fn score(&self, x: &Matrix) -> Result<Vec<f64>> {
        pseudo_density(self, x)
    }
}

/// Fits the regressor to `est.densities` on standardized features, then folds
/// the standardization into the first layer so the stored network consumes
/// raw features.
pub fn train_regressor(fs: &FeatureSet, est: &DensityEstimate, cfg: &RegressorConfig) -> Result<DensityRegressor> {
    let n = fs.len();
    if est.len() != n {
        return Err(Error::shape("train_regressor targets", n, est.len()));
    }
    if n == 0 {
        return Err(Error::InsufficientSamples { n, k: 0 });
    }
    if cfg.batch_size == 0 || !(0.0..1.0).contains(&cfg.holdout_fraction) {
        return Err(Error::InvalidConfig("batch_size must be >= 1 and holdout_fraction in [0, 1)".into()));
    }
    let dim = fs.dim();
    let mut rng = Rng::new(cfg.seed);

    let means = fs.features.column_means();
    let mut stds = vec![0.0f64; dim];
    for r in fs.features.iter_rows() {
        for j in 0..dim {
            stds[j] += (r[j] as f64 - means[j]).powi(2);
        }
    }
    for s in &mut stds {
        *s = (*s / n as f64).sqrt();
        if *s < 1e-12 {
            *s = 1.0;
        }
    }
    let standardized = {
        let mut m = fs.features.clone();
        for i in 0..n {
            for (j, v) in m.row_mut(i).iter_mut().enumerate() {
                *v = ((*v as f64 - means[j]) / stds[j]) as f32;
            }
        }
        m
    };

    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);
    let n_hold = ((n as f64) * cfg.holdout_fraction).floor() as usize;
    let (hold_idx, train_idx) = order.split_at(n_hold);
    let mut train_idx = train_idx.to_vec();

    let mut sizes = vec![dim];
    sizes.extend(&cfg.hidden);
    sizes.push(1);
    let mut net = Mlp::new(&sizes, cfg.activation, Activation::Identity, &mut rng)?;
    let mut opt = OptimizerState::adam(cfg.learning_rate, &net)?;

    for epoch in 0..cfg.epochs {
        rng.shuffle(&mut train_idx);
        let mut epoch_loss = 0.0;
        for batch in train_idx.chunks(cfg.batch_size) {
            let x = standardized.select_rows(batch);
            let trace = net.forward_trace(&x)?;
            let pred = trace.output();
            let b = batch.len() as f64;
            let mut grad = Matrix::zeros(batch.len(), 1);
            for (r, &i) in batch.iter().enumerate() {
                let err = pred.get(r, 0) as f64 - est.densities[i];
                epoch_loss += err * err;
                grad.set(r, 0, (2.0 * err / b) as f32);
            }
            let grads = net.backward(&trace, &grad)?;
            opt.step(&mut net, &grads)?;
        }
        if !epoch_loss.is_finite() {
            return Err(Error::Diverged(format!("regressor loss is non-finite at epoch {epoch}")));
        }
    }

    fold_standardization(&mut net, &means, &stds)?;

    let mse = |idx: &[usize]| -> Result<f64> {
        let pred = net.forward(&fs.features.select_rows(idx))?;
        Ok(idx
            .iter()
            .enumerate()
            .map(|(r, &i)| (pred.get(r, 0) as f64 - est.densities[i]).powi(2))
            .sum::<f64>()
            / idx.len().max(1) as f64)
    };
    let final_mse = mse(&train_idx)?;
    let (holdout_mse, holdout_r2) = if hold_idx.is_empty() {
        (None, None)
    } else {
        let m = mse(hold_idx)?;
        let mean = hold_idx.iter().map(|&i| est.densities[i]).sum::<f64>() / hold_idx.len() as f64;
        let var = hold_idx.iter().map(|&i| (est.densities[i] - mean).powi(2)).sum::<f64>() / hold_idx.len() as f64;
        let r2 = if var > 0.0 { 1.0 - m / var } else { f64::NAN };
        (Some(m), Some(r2))
    };
    log::debug!("regressor: train mse {final_mse:.5}, holdout r2 {holdout_r2:?}");

    Ok(DensityRegressor {
        net,
        stats: Some(TrainingStats {
            final_mse,
            holdout_mse,
            holdout_r2,
            epochs: cfg.epochs,
            seed: cfg.seed,
        }),
        support: SupportBox::of(&fs.features),
    })
}

/// Rewrites the first layer so that `net(raw) == net_before((raw - mean) / std)`.
fn fold_standardization(net: &mut Mlp, means: &[f64], stds: &[f64]) -> Result<()> {
    let first = &net.layers()[0];
    let (id, od) = (first.in_dim(), first.out_dim());
    let mut w = Vec::with_capacity(id * od);
    let mut b = Vec::with_capacity(od);
    for o in 0..od {
        let mut shift = 0.0f64;
        for i in 0..id {
            let wi = first.weights()[o * id + i] as f64 / stds[i];
            shift += wi * means[i];
            w.push(wi as f32);
        }
        b.push((first.biases()[o] as f64 - shift) as f32);
    }
    let folded = Layer::new(id, od, first.activation(), w, b)?;
    net.layers_mut()[0] = folded;
    Ok(())
}

/// Pseudo density of each row of `x`.
pub fn pseudo_density(reg: &DensityRegressor, x: &Matrix) -> Result<Vec<f64>> {
    if x.cols() != reg.input_dim() {
        return Err(Error::shape("pseudo_density features", reg.input_dim(), x.cols()));
    }
    let out = reg.net.forward(x)?;
    let outside = reg.extrapolation_mask(x).iter().filter(|&&b| b).count();
    if outside > 0 {
        log::warn!("pseudo density: {outside} of {} rows lie outside the regressor's training support", x.rows());
    }
    Ok(out.data().iter().map(|&v| v as f64).collect())
}

/// Pseudo density and its gradient with respect to each input row.
pub fn pseudo_density_with_gradient(reg: &DensityRegressor, x: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    if x.cols() != reg.input_dim() {
        return Err(Error::shape("pseudo_density features", reg.input_dim(), x.cols()));
    }
    let trace = reg.net.forward_trace(x)?;
    let values = trace.output().data().iter().map(|&v| v as f64).collect();
    let grads = reg.net.backward(&trace, &Matrix::new(x.rows(), 1, vec![1.0; x.rows()])?)?;
    Ok((values, grads.input))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdCalibration {
    pub percentile: f64,
    pub threshold_value: f64,
}

/// Nearest-rank percentile: the `ceil(p/100 * N)`-th smallest value (1-based).
pub fn calibrate_threshold(values: &[f64], percentile: f64) -> Result<ThresholdCalibration> {
    if values.is_empty() {
        return Err(Error::InsufficientSamples { n: 0, k: 0 });
    }
    if !(percentile > 0.0 && percentile < 100.0) {
        return Err(Error::InvalidConfig(format!("percentile must be in (0, 100), got {percentile}")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    let n = sorted.len();
    let rank = ((percentile * n as f64) / 100.0).ceil() as usize;
    let rank = rank.clamp(1, n);
    Ok(ThresholdCalibration {
        percentile,
        threshold_value: sorted[rank - 1],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(xs: &[f32]) -> FeatureSet {
        FeatureSet::new(Matrix::column(xs), "test").unwrap()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn knn_hand_examples() {
        let k1 = DensityConfig { k: 1, n: 1 };
        let k2 = DensityConfig { k: 2, n: 1 };
        close(&knn_avg_distance(&line(&[0.0, 1.0, 2.0]), &k1).unwrap(), &[1.0, 1.0, 1.0], 0.0);
        close(&knn_avg_distance(&line(&[0.0, 1.0, 2.0, 4.0]), &k1).unwrap(), &[1.0, 1.0, 1.0, 2.0], 0.0);
        close(&knn_avg_distance(&line(&[0.0, 1.0, 2.0, 4.0]), &k2).unwrap(), &[1.5, 1.0, 1.5, 2.5], 0.0);
    }

    #[test]
    fn knn_errors() {
        let cfg = DensityConfig { k: 3, n: 1 };
        assert!(matches!(
            knn_avg_distance(&line(&[0.0, 1.0, 2.0]), &cfg),
            Err(Error::InsufficientSamples { n: 3, k: 3 })
        ));
        let dup = line(&[0.0, 0.0, 5.0]);
        assert!(matches!(
            knn_avg_distance(&dup, &DensityConfig { k: 1, n: 1 }),
            Err(Error::ZeroDistance { index: 0 })
        ));
        assert!(DensityConfig { k: 0, n: 1 }.validate().is_err());
        assert!(DensityConfig { k: 1, n: 9 }.validate().is_err());
    }

    #[test]
    fn neighbor_ties_prefer_lower_index() {
        let m = Matrix::column(&[0.0, -1.0, 1.0]);
        let nn = nearest_neighbors(&m, 0, 1);
        assert_eq!(nn, vec![(1, 1.0)]);
    }

    #[test]
    fn density_hand_examples() {
        let est = estimate_density(&line(&[0.0, 1.0, 2.0]), &DensityConfig { k: 1, n: 1 }).unwrap();
        close(&est.densities, &[1.0, 1.0, 1.0], 1e-12);
        let x = line(&[0.0, 1.0, 2.0, 4.0]);
        let e1 = estimate_density(&x, &DensityConfig { k: 1, n: 1 }).unwrap();
        close(&e1.densities, &[8.0 / 7.0, 8.0 / 7.0, 8.0 / 7.0, 4.0 / 7.0], 1e-12);
        let e2 = estimate_density(&x, &DensityConfig { k: 1, n: 2 }).unwrap();
        close(&e2.densities, &[16.0 / 13.0, 16.0 / 13.0, 16.0 / 13.0, 4.0 / 13.0], 1e-12);
    }

    #[test]
    fn duplicates_share_density() {
        let x = line(&[0.0, 1.0, 1.0, 2.0, 4.0]);
        let est = estimate_density(&x, &DensityConfig { k: 1, n: 1 }).unwrap();
        assert_eq!(est.densities[1], est.densities[2]);
        let mean = est.densities.iter().sum::<f64>() / 5.0;
        assert!((mean - 1.0).abs() < 1e-12);
        // unique set is {0,1,2,4}: d = [1,1,1,2]
        close(&est.avg_knn_distances, &[1.0, 1.0, 1.0, 1.0, 2.0], 0.0);
        assert!(estimate_density(&line(&[3.0, 3.0, 3.0]), &DensityConfig { k: 1, n: 1 }).is_err());
    }

    #[test]
    fn large_n_and_tiny_distances_stay_finite() {
        let x = line(&[0.0, 1e-30, 2e-30, 1.0]);
        let est = estimate_density(&x, &DensityConfig { k: 1, n: 8 }).unwrap();
        assert!(est.densities.iter().all(|v| v.is_finite() && *v >= 0.0));
        assert!((est.densities.iter().sum::<f64>() - 4.0).abs() < 1e-9);
    }

    #[test]
    fn threshold_examples() {
        let t = calibrate_threshold(&[8.0 / 7.0, 4.0 / 7.0, 8.0 / 7.0, 8.0 / 7.0], 20.0).unwrap();
        assert_eq!(t.threshold_value, 4.0 / 7.0);
        assert_eq!(calibrate_threshold(&[4.0, 1.0, 3.0, 2.0], 50.0).unwrap().threshold_value, 2.0);
        for p in [1.0, 20.0, 50.0, 80.0, 99.9] {
            assert_eq!(calibrate_threshold(&[0.3; 7], p).unwrap().threshold_value, 0.3);
        }
        assert!(calibrate_threshold(&[], 50.0).is_err());
        assert!(calibrate_threshold(&[1.0], 0.0).is_err());
        assert!(calibrate_threshold(&[1.0], 100.0).is_err());
    }

    #[test]
    fn fold_preserves_function() {
        let mut rng = Rng::new(4);
        let mut net = Mlp::new(&[3, 5, 1], Activation::Tanh, Activation::Identity, &mut rng).unwrap();
        let means = [1.0, -2.0, 0.5];
        let stds = [2.0, 0.5, 3.0];
        let raw = Matrix::new(2, 3, vec![0.3, -1.0, 2.0, 4.0, 0.0, -0.7]).unwrap();
        let std_in = {
            let mut m = raw.clone();
            for i in 0..2 {
                for (j, v) in m.row_mut(i).iter_mut().enumerate() {
                    *v = ((*v as f64 - means[j]) / stds[j]) as f32;
                }
            }
            m
        };
        let before = net.forward(&std_in).unwrap();
        fold_standardization(&mut net, &means, &stds).unwrap();
        let after = net.forward(&raw).unwrap();
        for (a, b) in before.data().iter().zip(after.data()) {
            assert!((a - b).abs() < 1e-5);
        }
    }

    #[test]
    fn regressor_dimension_checks() {
        let reg = DensityRegressor::from_net(
            Mlp::new(&[2, 4, 1], Activation::Tanh, Activation::Identity, &mut Rng::new(0)).unwrap(),
        )
        .unwrap();
        assert!(matches!(pseudo_density(&reg, &Matrix::zeros(3, 5)), Err(Error::ShapeMismatch { .. })));
        let vals = pseudo_density(&reg, &Matrix::zeros(3, 2)).unwrap();
        assert_eq!(vals.len(), 3);
        assert!(DensityRegressor::from_net(
            Mlp::new(&[2, 2], Activation::Tanh, Activation::Identity, &mut Rng::new(0)).unwrap()
        )
        .is_err());
    }
}
