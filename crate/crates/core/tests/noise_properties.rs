use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stoch_euler::gas::{riemann_invariants, GasLaw, Grid};
use stoch_euler::noise::*;

#[test]
fn growth_bound_audit() {
    let law = GasLaw::shallow_water(2.0).unwrap();
    let plain = sw_topography_modes(2.0, &[1.0, 0.5, 1.0, 0.25, 1.0], 5).unwrap();
    let local = plain.clone().localize(&law, 4.0, 0.25).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for model in [&plain, &local] {
        let a0 = model.a0();
        for _ in 0..10_000 {
            let x: f64 = rng.random();
            let rho: f64 = 5.0 * rng.random::<f64>();
            let u: f64 = rng.random_range(-5.0..5.0);
            let g2 = model.g_squared(x, rho, u);
            let bound = a0 * a0 * rho * rho * (1.0 + u * u + rho.powf(2.0 * law.theta));
            assert!(g2 <= bound, "x={x} rho={rho} u={u}: {g2} > {bound}");
        }
    }
}

#[test]
fn localized_model_vanishes_outside_region() {
    let law = GasLaw::shallow_water(2.0).unwrap();
    let kappa = 4.0;
    let model = sw_topography_modes(2.0, &[1.0; 5], 5).unwrap().localize(&law, kappa, 0.25).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut outside = 0;
    for _ in 0..10_000 {
        let rho: f64 = 8.0 * rng.random::<f64>();
        let u: f64 = rng.random_range(-8.0..8.0);
        let (z, w) = riemann_invariants(&law, rho, rho * u);
        if z.abs().max(w.abs()) >= kappa {
            outside += 1;
            for k in 0..model.n_modes() {
                assert_eq!(model.sigma(k, rng.random(), rho, u), 0.0);
            }
        }
    }
    assert!(outside > 1000);
}

proptest! {
    #[test]
    fn sw_intensity_is_homogeneous(rho in 0.0f64..5.0, u in -5.0f64..5.0) {
        let model = sw_topography_modes(2.0, &[1.0; 5], 5).unwrap();
        let grid = Grid::new(64).unwrap();
        let gn = model.on_grid(&grid);
        let g0 = gn.g_squared(0, rho, u);
        let expected = 16.0 * std::f64::consts::PI.powi(2) * 55.0 * rho * rho;
        prop_assert!((g0 - expected).abs() <= 1e-12 * expected.max(1.0));
        for i in 1..64 {
            prop_assert!((gn.g_squared(i, rho, u) - g0).abs() <= 1e-12 * g0.max(1.0));
        }
    }

    #[test]
    fn increments_keyed_and_prefix_stable(seed in any::<u64>(), rid in any::<u32>(), step in any::<u32>()) {
        let a = sample_increments(seed, rid, step, 12, 0.5).unwrap();
        let b = sample_increments(seed, rid, step, 12, 0.5).unwrap();
        prop_assert_eq!(&a, &b);
        let short = sample_increments(seed, rid, step, 5, 0.5).unwrap();
        prop_assert_eq!(&short.dw[..], &a.dw[..5]);
        let other = sample_increments(seed, rid, step.wrapping_add(1), 12, 0.5).unwrap();
        prop_assert_ne!(&other.dw, &a.dw);
    }
}

#[test]
fn increment_variance() {
    // sample variance of n N(0, dt) draws has standard error dt·√(2/(n−1))
    let dt = 0.01;
    let mut xs = Vec::with_capacity(100_000);
    for step in 0..1000 {
        xs.extend(sample_increments(42, 3, step, 100, dt).unwrap().dw);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    let se = dt * (2.0 / (n - 1.0)).sqrt();
    assert!((var - dt).abs() < 3.0 * se, "variance {var}");
    assert!(mean.abs() < 3.0 * (dt / n).sqrt());
    assert!(sample_increments(1, 1, 1, 0, dt).unwrap().dw.is_empty());
    assert!(sample_increments(1, 1, 1, 3, 0.0).is_err());
}
