use densctl_core::mlp::Layer;
use densctl_core::perturb::density_and_latent_gradient;
use densctl_core::{perturb_batch, perturb_latent, Activation, DensityRegressor, Direction, Matrix, Mlp, PerturbConfig, Rng};
use proptest::prelude::*;

fn affine(rows: usize, cols: usize, w: Vec<f32>) -> Mlp {
    Mlp::from_layers(vec![Layer::new(cols, rows, Activation::Identity, w, vec![0.0; rows]).unwrap()]).unwrap()
}

/// `G(z) = z` and `rho(x) = x` in one dimension.
fn linear_fixture() -> (Mlp, DensityRegressor) {
    (affine(1, 1, vec![1.0]), DensityRegressor::from_net(affine(1, 1, vec![1.0])).unwrap())
}

fn random_pair(seed: u64, latent: usize, data: usize) -> (Mlp, DensityRegressor) {
    let mut rng = Rng::new(seed);
    let gen = Mlp::new(&[latent, 16, 16, data], Activation::Tanh, Activation::Identity, &mut rng).unwrap();
    let reg = Mlp::new(&[data, 16, 1], Activation::Tanh, Activation::Identity, &mut rng).unwrap();
    (gen, DensityRegressor::from_net(reg).unwrap())
}

#[test]
fn defaults() {
    let c = PerturbConfig::gan(Direction::Ascend);
    assert_eq!((c.steps, c.step_size, c.budget), (10, 0.025, 0.1));
    let d = PerturbConfig::diffusion(Direction::Descend);
    assert_eq!((d.steps, d.step_size, d.budget), (5, 0.0025, 0.0125));
}

#[test]
fn zero_budget_is_identity() {
    let (gen, reg) = random_pair(1, 4, 2);
    let z = [0.3f32, -1.2, 0.0, 2.0];
    let cfg = PerturbConfig {
        budget: 0.0,
        ..PerturbConfig::gan(Direction::Ascend)
    };
    let r = perturb_latent(&gen, &reg, &z, &cfg).unwrap();
    assert_eq!(r.final_z, z);
    assert_eq!(r.density_after, r.density_before);
    assert!(r.delta.iter().all(|&d| d == 0.0));
}

#[test]
fn linear_fixture_saturates() {
    let (gen, reg) = linear_fixture();
    let r = perturb_latent(&gen, &reg, &[0.5], &PerturbConfig::gan(Direction::Ascend)).unwrap();
    let expected = [0.025f32, 0.05, 0.075, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1];
    for (got, want) in r.delta_norms.iter().zip(expected) {
        assert!((got - want).abs() < 1e-6, "{:?}", r.delta_norms);
    }
    assert!((r.density_after - r.density_before - 0.1).abs() < 1e-6);
    assert!((r.density_before - 0.5).abs() < 1e-7);
    assert_eq!(r.density_trace.len(), 11);

    let d = perturb_latent(&gen, &reg, &[0.5], &PerturbConfig::gan(Direction::Descend)).unwrap();
    assert!((d.delta[0] + 0.1).abs() < 1e-6);
    assert!((d.density_after - 0.4).abs() < 1e-6);
}

#[test]
fn matches_projected_ascent_oracle() {
    // G(z) = A z, rho(x) = c . x: constant latent gradient A^T c
    let a = [0.5f32, -1.0, 2.0, 0.1, 0.0, 3.0];
    let c = [0.4f32, -0.02];
    let gen = affine(2, 3, a.to_vec());
    let reg = DensityRegressor::from_net(affine(1, 2, c.to_vec())).unwrap();
    let g: Vec<f64> = (0..3).map(|j| (0..2).map(|i| a[i * 3 + j] as f64 * c[i] as f64).sum()).collect();
    let cfg = PerturbConfig::gan(Direction::Ascend);
    let mut delta = [0.0f64; 3];
    for _ in 0..cfg.steps {
        for j in 0..3 {
            delta[j] = (delta[j] + cfg.step_size * g[j]).clamp(-cfg.budget, cfg.budget);
        }
    }
    let r = perturb_latent(&gen, &reg, &[1.0, 0.0, -1.0], &cfg).unwrap();
    for j in 0..3 {
        assert!((r.delta[j] as f64 - delta[j]).abs() < 1e-6, "{:?} vs {delta:?}", r.delta);
    }
    let gain: f64 = (0..3).map(|j| g[j] * delta[j]).sum();
    assert!((r.density_after - r.density_before - gain).abs() < 1e-5);
}

#[test]
fn normalized_gradient_steps_have_unit_length() {
    let gen = affine(1, 2, vec![3.0, 4.0]);
    let reg = DensityRegressor::from_net(affine(1, 1, vec![1.0])).unwrap();
    let cfg = PerturbConfig {
        steps: 1,
        normalize_gradient: true,
        ..PerturbConfig::gan(Direction::Ascend)
    };
    let r = perturb_latent(&gen, &reg, &[0.0, 0.0], &cfg).unwrap();
    assert!((r.delta[0] - 0.015).abs() < 1e-7 && (r.delta[1] - 0.02).abs() < 1e-7);
}

#[test]
fn latent_gradient_matches_finite_differences() {
    let (gen, reg) = random_pair(2, 5, 3);
    let z = [0.2f32, -0.7, 1.1, 0.0, -0.3];
    let (rho, grad) = density_and_latent_gradient(&gen, &reg, &z).unwrap();
    let f = |z: &[f32]| reg.net.forward(&gen.forward(&Matrix::new(1, z.len(), z.to_vec()).unwrap()).unwrap()).unwrap().get(0, 0) as f64;
    assert!((rho - f(&z)).abs() < 1e-7);
    let h = 1e-2f32;
    for j in 0..z.len() {
        let (mut p, mut m) = (z, z);
        p[j] += h;
        m[j] -= h;
        let num = (f(&p) - f(&m)) / (2.0 * h as f64);
        assert!((num - grad[j] as f64).abs() <= 1e-2 * num.abs().max(grad[j].abs() as f64).max(1e-2), "{j}: {num} vs {}", grad[j]);
    }
}

#[test]
fn batch_matches_single_and_is_deterministic() {
    let (gen, reg) = random_pair(3, 4, 2);
    let zs = densctl_core::sampler::draw_latents(&mut Rng::new(4), 16, 4);
    let cfg = PerturbConfig::gan(Direction::Descend);
    let a = perturb_batch(&gen, &reg, &zs, &cfg).unwrap();
    let b = perturb_batch(&gen, &reg, &zs, &cfg).unwrap();
    assert_eq!(a, b);
    for (i, r) in a.iter().enumerate() {
        assert_eq!(r, &perturb_latent(&gen, &reg, zs.row(i), &cfg).unwrap());
    }
}

#[test]
fn invalid_configs_and_shapes() {
    let (gen, reg) = linear_fixture();
    let bad = [
        PerturbConfig { steps: 0, ..Default::default() },
        PerturbConfig { step_size: 0.0, ..Default::default() },
        PerturbConfig { budget: -0.1, ..Default::default() },
        PerturbConfig { budget: f64::NAN, ..Default::default() },
    ];
    for cfg in bad {
        assert!(perturb_latent(&gen, &reg, &[0.0], &cfg).is_err());
    }
    assert!(perturb_latent(&gen, &reg, &[0.0, 1.0], &PerturbConfig::default()).is_err());
    assert_eq!("ascend".parse::<Direction>().unwrap(), Direction::Ascend);
    assert!("up".parse::<Direction>().is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn delta_stays_in_budget(seed in any::<u64>(), eps in 0.0f64..0.5, alpha in 0.001f64..1.0, steps in 1usize..15, ascend in any::<bool>()) {
        let (gen, reg) = random_pair(seed, 3, 2);
        let z = densctl_core::sampler::draw_latents(&mut Rng::new(seed ^ 1), 1, 3);
        let cfg = PerturbConfig {
            steps,
            step_size: alpha,
            budget: eps,
            direction: if ascend { Direction::Ascend } else { Direction::Descend },
            normalize_gradient: false,
        };
        let r = perturb_latent(&gen, &reg, z.row(0), &cfg).unwrap();
        prop_assert!(r.delta.iter().all(|d| d.abs() <= eps as f32));
        prop_assert!(r.delta_norms.iter().all(|&n| n <= eps as f32));
        prop_assert_eq!(r.delta_norms.len(), steps);
        prop_assert_eq!(r.density_trace.len(), steps + 1);
        for j in 0..3 {
            prop_assert_eq!(r.final_z[j], r.original_z[j] + r.delta[j]);
        }
    }
}
