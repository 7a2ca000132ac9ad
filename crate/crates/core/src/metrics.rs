//! Precision, recall and Fréchet distance for generated feature sets.
//!
//! Precision is the fraction of generated points inside the real k-NN
//! manifold (the union of balls around each real point whose radius is the
//! distance to its k-th nearest real neighbour); recall swaps the roles.
//! A point exactly on a ball's surface counts as inside.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::{dedup_rows, nearest_neighbors, FeatureSet};
use crate::error::{Error, Result};
use crate::linalg::{squared_euclidean, Matrix};

pub const DEFAULT_PR_K: usize = 3;

/// Diagonal jitter added to singular covariances.
pub const COVARIANCE_JITTER: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldIndex {
    reference: Matrix,
    radii: Vec<f64>,
    k: usize,
}

impl ManifoldIndex {
    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn contains(&self, x: &[f32]) -> bool {
        self.reference
            .iter_rows()
            .zip(&self.radii)
            .any(|(r, &rad)| squared_euclidean(x, r) <= rad * rad)
    }

    /// Fraction of `queries` rows inside the manifold.
    pub fn coverage(&self, queries: &Matrix) -> Result<f64> {
        if queries.cols() != self.reference.cols() {
            return Err(Error::shape("manifold query", self.reference.cols(), queries.cols()));
        }
        if queries.rows() == 0 {
            return Ok(0.0);
        }
        let inside = (0..queries.rows())
            .into_par_iter()
            .filter(|&i| self.contains(queries.row(i)))
            .count();
        Ok(inside as f64 / queries.rows() as f64)
    }
}

/// k-NN radius (distance to the k-th nearest distinct neighbour) of every reference point.
pub fn build_manifold(fs: &FeatureSet, k: usize) -> Result<ManifoldIndex> {
    if k == 0 {
        return Err(Error::InvalidConfig("k must be >= 1".into()));
    }
    let (unique, rep) = dedup_rows(&fs.features);
    if unique.rows() <= k {
        return Err(Error::InsufficientSamples { n: unique.rows(), k });
    }
    let unique_radii: Vec<f64> = (0..unique.rows())
        .into_par_iter()
        .map(|i| nearest_neighbors(&unique, i, k)[k - 1].1)
        .collect();
    Ok(ManifoldIndex {
        reference: fs.features.clone(),
        radii: rep.iter().map(|&r| unique_radii[r]).collect(),
        k,
    })
}

/// (precision, recall) of `gen` against `real`.
pub fn precision_recall(real: &FeatureSet, gen: &FeatureSet, k: usize) -> Result<(f64, f64)> {
    if real.dim() != gen.dim() {
        return Err(Error::shape("precision/recall feature dims", real.dim(), gen.dim()));
    }
    let real_manifold = build_manifold(real, k)?;
    let gen_manifold = build_manifold(gen, k)?;
    let precision = real_manifold.coverage(&gen.features)?;
    let recall = gen_manifold.coverage(&real.features)?;
    Ok((precision, recall))
}

/// Mean and unbiased covariance of the rows of `m`.
pub fn gaussian_fit(m: &Matrix) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = m.rows();
    if n < 2 {
        return Err(Error::InsufficientSamples { n, k: 1 });
    }
    let d = m.cols();
    let mean = DVector::from_vec(m.column_means());
    let mut cov = DMatrix::<f64>::zeros(d, d);
    for r in m.iter_rows() {
        let c = DVector::from_iterator(d, r.iter().zip(mean.iter()).map(|(&v, &mu)| v as f64 - mu));
        cov.ger(1.0, &c, &c, 1.0);
    }
    cov /= (n - 1) as f64;
    Ok((mean, cov))
}

fn sym_eigen(m: &DMatrix<f64>) -> SymmetricEigen<f64, nalgebra::Dyn> {
    let s = (m + m.transpose()) * 0.5;
    SymmetricEigen::new(s)
}

/// PSD square root through eigendecomposition, negative eigenvalues clamped to zero.
pub fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = sym_eigen(m);
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose()
}

fn is_singular(cov: &DMatrix<f64>) -> bool {
    let eig = sym_eigen(cov);
    let max = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    min <= 1e-12 * max.max(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrechetResult {
    pub distance: f64,
    pub jitter_applied: bool,
}

/// Fréchet distance between Gaussian fits given their statistics:
/// `‖mu_a - mu_b‖² + tr(S_a + S_b - 2 (S_a S_b)^(1/2))`.
///
/// The trace of `(S_a S_b)^(1/2)` is taken as the trace of the PSD root of
/// the symmetric matrix `S_a^(1/2) S_b S_a^(1/2)`, which has the same spectrum.
pub fn frechet_from_stats(
    mu_a: &DVector<f64>,
    cov_a: &DMatrix<f64>,
    mu_b: &DVector<f64>,
    cov_b: &DMatrix<f64>,
) -> Result<FrechetResult> {
    if mu_a.len() != mu_b.len() || cov_a.nrows() != cov_b.nrows() || cov_a.nrows() != mu_a.len() {
        return Err(Error::shape("Fréchet statistics", mu_a.len(), mu_b.len()));
    }
    let mut ca = cov_a.clone();
    let mut cb = cov_b.clone();
    let jitter_applied = is_singular(&ca) || is_singular(&cb);
    if jitter_applied {
        log::info!("Fréchet distance: singular covariance, adding {COVARIANCE_JITTER} to the diagonal");
        let d = ca.nrows();
        ca += DMatrix::<f64>::identity(d, d) * COVARIANCE_JITTER;
        cb += DMatrix::<f64>::identity(d, d) * COVARIANCE_JITTER;
    }
    let root_a = psd_sqrt(&ca);
    let inner = &root_a * &cb * &root_a;
    let eig = sym_eigen(&inner);
    let tr_sqrt: f64 = eig.eigenvalues.iter().map(|&l| l.max(0.0).sqrt()).sum();
    let diff = mu_a - mu_b;
    let value = diff.dot(&diff) + ca.trace() + cb.trace() - 2.0 * tr_sqrt;
    if !value.is_finite() {
        return Err(Error::NonFinite("Fréchet distance".into()));
    }
    Ok(FrechetResult {
        distance: value.max(0.0),
        jitter_applied,
    })
}

pub fn frechet_detailed(real: &FeatureSet, gen: &FeatureSet) -> Result<FrechetResult> {
    if real.dim() != gen.dim() {
        return Err(Error::shape("Fréchet feature dims", real.dim(), gen.dim()));
    }
    let (ma, ca) = gaussian_fit(&real.features)?;
    let (mb, cb) = gaussian_fit(&gen.features)?;
    frechet_from_stats(&ma, &ca, &mb, &cb)
}

pub fn frechet_distance(real: &FeatureSet, gen: &FeatureSet) -> Result<f64> {
    Ok(frechet_detailed(real, gen)?.distance)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub precision: f64,
    pub recall: f64,
    pub frechet_distance: f64,
    pub jitter_applied: bool,
    pub n_real: usize,
    pub n_generated: usize,
    pub k: usize,
}

impl EvalReport {
    pub fn to_text(&self) -> String {
        format!(
            "Evaluation ({} real, {} generated, k = {})\n  precision        {:.4}\n  recall           {:.4}\n  Fréchet distance {:.6}{}\n",
            self.n_real,
            self.n_generated,
            self.k,
            self.precision,
            self.recall,
            self.frechet_distance,
            if self.jitter_applied { " (covariance jitter applied)" } else { "" }
        )
    }

    pub fn to_kv_lines(&self) -> String {
        format!(
            "precision={}\nrecall={}\nfrechet_distance={}\njitter_applied={}\nn_real={}\nn_generated={}\nk={}\n",
            self.precision, self.recall, self.frechet_distance, self.jitter_applied, self.n_real, self.n_generated, self.k
        )
    }
}

pub fn evaluate(real: &FeatureSet, gen: &FeatureSet, k: usize) -> Result<EvalReport> {
    let (precision, recall) = precision_recall(real, gen, k)?;
    let fd = frechet_detailed(real, gen)?;
    Ok(EvalReport {
        precision,
        recall,
        frechet_distance: fd.distance,
        jitter_applied: fd.jitter_applied,
        n_real: real.len(),
        n_generated: gen.len(),
        k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(xs: &[f32]) -> FeatureSet {
        FeatureSet::new(Matrix::column(xs), "t").unwrap()
    }

    #[test]
    fn radii_examples() {
        let m = build_manifold(&line(&[0.0, 1.0, 2.0]), 1).unwrap();
        assert_eq!(m.radii(), &[1.0, 1.0, 1.0]);
        let x = line(&[0.0, 1.0, 2.0, 4.0]);
        assert_eq!(build_manifold(&x, 1).unwrap().radii(), &[1.0, 1.0, 1.0, 2.0]);
        assert_eq!(build_manifold(&x, 2).unwrap().radii(), &[2.0, 1.0, 2.0, 3.0]);
        assert!(matches!(build_manifold(&x, 4), Err(Error::InsufficientSamples { .. })));
    }

    #[test]
    fn duplicates_do_not_zero_radii() {
        let m = build_manifold(&line(&[0.0, 0.0, 1.0, 3.0]), 1).unwrap();
        assert_eq!(m.radii(), &[1.0, 1.0, 1.0, 2.0]);
    }

    #[test]
    fn precision_recall_examples() {
        let real = line(&[0.0, 1.0, 2.0]);
        let (p, r) = precision_recall(&real, &real, 1).unwrap();
        assert_eq!((p, r), (1.0, 1.0));
        let gen = line(&[0.5, 10.0]);
        let (p, r) = precision_recall(&real, &gen, 1).unwrap();
        assert_eq!(p, 0.5);
        // generated radii are both 9.5, which covers every real point
        assert_eq!(r, 1.0);
        let far = line(&[100.0, 101.0, 102.0]);
        assert_eq!(precision_recall(&real, &far, 1).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn surface_counts_as_inside() {
        let m = build_manifold(&line(&[0.0, 1.0, 2.0]), 1).unwrap();
        assert!(m.contains(&[3.0]));
        assert!(!m.contains(&[3.0001]));
    }

    #[test]
    fn frechet_univariate_closed_form() {
        // {-1,0,1}: mean 0, var 1 ; {-1,1,3}: mean 1, var 4  →  1 + 1 + 4 - 2*2 = 2
        let a = line(&[-1.0, 0.0, 1.0]);
        let b = line(&[-1.0, 1.0, 3.0]);
        assert!((frechet_distance(&a, &b).unwrap() - 2.0).abs() < 1e-12);
        assert!(frechet_distance(&a, &a).unwrap().abs() < 1e-6);
        assert!(frechet_distance(&line(&[1.0]), &a).is_err());
    }

    #[test]
    fn singular_covariance_is_jittered() {
        let a = FeatureSet::new(Matrix::new(3, 2, vec![0.0, 0.0, 1.0, 1.0, 2.0, 2.0]).unwrap(), "t").unwrap();
        let r = frechet_detailed(&a, &a).unwrap();
        assert!(r.jitter_applied);
        assert!(r.distance.abs() < 1e-6);
    }

    #[test]
    fn report_formats() {
        let a = line(&[-1.0, 0.0, 1.0, 2.0]);
        let rep = evaluate(&a, &a, 1).unwrap();
        assert!(rep.to_kv_lines().contains("precision=1\n"));
        assert!(rep.to_text().contains("precision"));
    }
}
