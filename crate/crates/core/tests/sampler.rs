use densctl_core::density::DensityScorer;
use densctl_core::sampler::{
    acceptance_probability, acceptance_rate, accepts, cost_multiplier, draw_latents, sample_truncated, screen_attempts, truncate_latents,
    LatentGenerator, TruncationConfig, DEFAULT_MAX_ATTEMPTS_PER_ACCEPT, TAU_PERCENTILES, WEIGHT_SWEEP,
};
use densctl_core::{importance_sample, Error, Matrix, Result, Rng, SamplingConfig};
use proptest::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

/// `x = z` in one dimension.
struct Identity;

impl LatentGenerator for Identity {
    fn latent_dim(&self) -> usize {
        1
    }
    fn generate(&self, z: &Matrix) -> Result<Matrix> {
        Ok(z.clone())
    }
}

/// `rho(x) = x`.
struct Linear;

impl DensityScorer for Linear {
    fn input_dim(&self) -> usize {
        1
    }
    fn score(&self, x: &Matrix) -> Result<Vec<f64>> {
        Ok(x.data().iter().map(|&v| v as f64).collect())
    }
}

/// Every sample scores exactly `0.5`.
struct Flat;

impl DensityScorer for Flat {
    fn input_dim(&self) -> usize {
        1
    }
    fn score(&self, x: &Matrix) -> Result<Vec<f64>> {
        Ok(vec![0.5; x.rows()])
    }
}

const ATTEMPTS: usize = 10_000;

/// Threshold with exactly `below` of the standard normal mass under it.
fn tau_for(below: f64) -> f64 {
    Normal::standard().inverse_cdf(below)
}

fn within_3se(observed: f64, p: f64, n: usize) -> bool {
    let se = (p * (1.0 - p) / n as f64).sqrt();
    (observed - p).abs() <= 3.0 * se.max(1e-12)
}

#[test]
fn defaults() {
    assert_eq!(WEIGHT_SWEEP, [0.01, 0.03, 0.1, 10.0, 33.0, 100.0]);
    assert_eq!(TAU_PERCENTILES, [20.0, 50.0, 80.0]);
    assert_eq!(DEFAULT_MAX_ATTEMPTS_PER_ACCEPT, 10_000);
    assert_eq!(SamplingConfig::new(0.0, 2.0).max_attempts_per_accept, 10_000);
}

#[test]
fn unit_weight_passes_everything() {
    let b = importance_sample(&Identity, &Linear, &SamplingConfig::new(0.0, 1.0), 500, &mut Rng::new(1)).unwrap();
    assert_eq!((b.accepted(), b.attempts), (500, 500));
    for below in [0.0, 0.3, 1.0] {
        assert_eq!(acceptance_rate(below, 1.0), 1.0);
    }
}

#[test]
fn acceptance_law_matches_closed_form() {
    for (below, w) in [(0.5, 0.01), (0.2, 0.01), (0.5, 0.5), (0.5, 33.0), (0.8, 100.0), (0.3, 0.03)] {
        let cfg = SamplingConfig::new(tau_for(below), w);
        let r = screen_attempts(&Identity, &Linear, &cfg, ATTEMPTS, &mut Rng::new(2)).unwrap();
        let expected = acceptance_rate(below, w);
        assert!(within_3se(r.acceptance_rate(), expected, ATTEMPTS), "below={below} w={w}: {} vs {expected}", r.acceptance_rate());
    }
}

#[test]
fn half_above_with_small_weight() {
    let cfg = SamplingConfig::new(0.0, 0.01);
    let r = screen_attempts(&Identity, &Linear, &cfg, ATTEMPTS, &mut Rng::new(3)).unwrap();
    assert!((r.acceptance_rate() - 0.505).abs() <= 0.02);
    let b = importance_sample(&Identity, &Linear, &cfg, 4000, &mut Rng::new(4)).unwrap();
    let above = b.densities.iter().filter(|&&d| d > 0.0).count() as f64 / b.accepted() as f64;
    assert!((above - 0.005 / 0.505).abs() <= 0.005, "{above}");
}

#[test]
fn reweighting_law() {
    for (a, w) in [(0.5, 0.1), (0.7, 0.03), (0.5, 10.0), (0.2, 33.0)] {
        let cfg = SamplingConfig::new(tau_for(1.0 - a), w);
        let b = importance_sample(&Identity, &Linear, &cfg, 5000, &mut Rng::new(5)).unwrap();
        let n = b.accepted();
        if w <= 1.0 {
            let p = a * w / (a * w + (1.0 - a));
            let obs = b.densities.iter().filter(|&&d| d > cfg.threshold).count() as f64 / n as f64;
            assert!(within_3se(obs, p, n), "a={a} w={w}: P(above|acc) {obs} vs {p}");
        } else {
            let p = (1.0 - a) / w / (a + (1.0 - a) / w);
            let obs = b.densities.iter().filter(|&&d| d <= cfg.threshold).count() as f64 / n as f64;
            assert!(within_3se(obs, p, n), "a={a} w={w}: P(below|acc) {obs} vs {p}");
        }
    }
}

#[test]
fn boundary_falls_to_random_branch() {
    assert!(!accepts(0.5, 0.5, 10.0, 0.2));
    assert!(accepts(0.5, 0.5, 10.0, 0.05));
    assert!(!accepts(0.5, 0.5, 0.1, 0.2));
    assert!(accepts(0.5, 0.5, 0.1, 0.05));
    assert_eq!(acceptance_probability(0.5, 0.5, 4.0), 0.25);
    assert_eq!(acceptance_probability(0.5, 0.5, 0.25), 0.25);
    for w in [0.2, 5.0] {
        let r = screen_attempts(&Identity, &Flat, &SamplingConfig::new(0.5, w), ATTEMPTS, &mut Rng::new(6)).unwrap();
        assert!(within_3se(r.acceptance_rate(), w.min(1.0 / w), ATTEMPTS));
    }
}

#[test]
fn accepted_samples_keep_attempt_order() {
    let cfg = SamplingConfig::new(0.3, 0.05);
    let b = importance_sample(&Identity, &Linear, &cfg, 300, &mut Rng::new(7)).unwrap();
    let s = screen_attempts(&Identity, &Linear, &cfg, b.attempts, &mut Rng::new(7)).unwrap();
    assert_eq!(s.accepted_flags, b.accepted_flags);
    let replay: Vec<f64> = s.densities.iter().zip(&s.accepted_flags).filter(|(_, &f)| f).map(|(&d, _)| d).collect();
    assert_eq!(replay, b.densities);
    assert_eq!(b.latents, b.outputs);
    assert!(b.attempts >= 300);
}

#[test]
fn starvation_and_bad_configs() {
    let mut cfg = SamplingConfig::new(1e9, 1e6);
    cfg.max_attempts_per_accept = 50;
    assert!(matches!(importance_sample(&Identity, &Linear, &cfg, 10, &mut Rng::new(8)), Err(Error::Starved { .. })));
    for w in [0.0, -1.0, f64::NAN, f64::INFINITY] {
        assert!(importance_sample(&Identity, &Linear, &SamplingConfig::new(0.0, w), 1, &mut Rng::new(8)).is_err());
    }
    assert!(importance_sample(&Identity, &Linear, &SamplingConfig::new(0.0, 2.0), 0, &mut Rng::new(8)).is_err());
}

#[test]
fn cost_multipliers() {
    assert!((acceptance_rate(0.5, 0.01) - 0.505).abs() < 1e-12);
    assert!((cost_multiplier(0.5, 0.01) - 1.0 / 0.505).abs() < 1e-12);
    assert!((acceptance_rate(0.2, 0.01) - 0.208).abs() < 1e-12);
    assert!((cost_multiplier(0.2, 0.01) - 4.8077).abs() < 1e-3);
}

#[test]
fn truncation_examples() {
    let z = Matrix::from_rows(&[[2.0f32, -4.0], [0.5, 1.0]], 2).unwrap();
    assert_eq!(truncate_latents(&z, &TruncationConfig::centered(1.0, 2)).unwrap(), z);
    let mean = TruncationConfig {
        psi: 0.0,
        latent_mean: vec![0.25, -1.0],
    };
    let t = truncate_latents(&z, &mean).unwrap();
    assert!(t.iter_rows().all(|r| r == [0.25, -1.0]));
    assert_eq!(truncate_latents(&z, &TruncationConfig::centered(0.5, 2)).unwrap().row(0), &[1.0, -2.0]);
    assert!(truncate_latents(&z, &TruncationConfig::centered(0.5, 3)).is_err());
    assert!(truncate_latents(&z, &TruncationConfig::centered(-0.5, 2)).is_err());

    let a = sample_truncated(&Identity, &TruncationConfig::centered(0.5, 1), 100, &mut Rng::new(9)).unwrap();
    let b = draw_latents(&mut Rng::new(9), 100, 1);
    assert!(a.data().iter().zip(b.data()).all(|(x, y)| *x == 0.5 * y));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn acceptance_probability_agrees_with_rule(d in -2.0f64..2.0, t in -2.0f64..2.0, w in 0.001f64..1000.0, u in 0.0f64..1.0) {
        let p = acceptance_probability(d, t, w);
        prop_assert!(p > 0.0 && p <= 1.0);
        prop_assert_eq!(accepts(d, t, w, u), u < p || p == 1.0);
    }

    #[test]
    fn closed_form_is_a_probability(below in 0.0f64..=1.0, w in 0.001f64..1000.0) {
        let r = acceptance_rate(below, w);
        prop_assert!(r > 0.0 && r <= 1.0 + 1e-12);
        prop_assert!((cost_multiplier(below, w) * r - 1.0).abs() < 1e-12);
        let cfg = SamplingConfig::new(0.0, w);
        prop_assert_eq!(cfg.reciprocal().weight, 1.0 / w);
    }
}
