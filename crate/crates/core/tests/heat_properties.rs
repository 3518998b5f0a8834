use std::f64::consts::PI;

use proptest::prelude::*;
use stoch_euler::heat::*;

const N: usize = 256;

/// Random trigonometric polynomial of degree ≤ 16 sampled at cell centers.
fn band_limited() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 17).prop_map(|c| {
        (0..N)
            .map(|i| {
                let x = (i as f64 + 0.5) / N as f64;
                c.iter()
                    .enumerate()
                    .map(|(k, (a, b))| {
                        let t = 2.0 * PI * k as f64 * x;
                        a * t.cos() + b * t.sin()
                    })
                    .sum()
            })
            .collect()
    })
}

fn sup(f: &[f64]) -> f64 {
    f.iter().fold(0.0, |m, v| m.max(v.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn semigroup(f in prop::collection::vec(-5.0f64..5.0, N), s in 0.0f64..0.1, t in 0.0f64..0.1) {
        let a = heat_apply(&heat_apply(&f, 1.0, s).unwrap(), 1.0, t).unwrap();
        let b = heat_apply(&f, 1.0, s + t).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn maximum_principle(f in prop::collection::vec(-5.0f64..5.0, N), t in 1e-4f64..1.0) {
        // from t ≈ 6e-5 on, the sampled kernel is a positive Gaussian up to e^{−40}
        let (lo, hi) = f.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        let g = heat_apply(&f, 1.0, t).unwrap();
        for v in g {
            prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
        }
    }

    #[test]
    fn kernel_route_agrees(f in band_limited(), t in 1e-4f64..0.5) {
        let a = heat_apply(&f, 1.0, t).unwrap();
        let b = heat_apply_kernel(&f, 1.0, t).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn smoothing_estimate(f in band_limited(), t in 1e-3f64..0.5) {
        // ‖∂_x S(t) f‖_∞ ≤ (πt)^{−1/2} ‖f‖_∞ since ‖∂_x K_t‖_{L¹} ≤ (πt)^{−1/2}
        let g = heat_apply(&f, 1.0, t).unwrap();
        let dg = spectral_derivative(&g);
        prop_assert!(sup(&dg) <= 1.05 * sup(&f) / (PI * t).sqrt());
    }

    #[test]
    fn kernel_positive_and_normalized(t in 1e-3f64..2.0) {
        let m = 4000;
        let mut s = 0.0;
        for i in 0..m {
            let k = kernel_eval(t, (i as f64 + 0.5) / m as f64).unwrap();
            prop_assert!(k > 0.0);
            s += k / m as f64;
        }
        prop_assert!((s - 1.0).abs() < 1e-10);
    }
}

#[test]
fn every_mode_decays_at_its_rate() {
    let t = 1e-4;
    for n in 0..=N / 2 - 1 {
        let f: Vec<f64> = (0..N)
            .map(|i| (2.0 * PI * n as f64 * (i as f64 + 0.5) / N as f64).cos())
            .collect();
        let g = heat_apply(&f, 1.0, t).unwrap();
        let r = (-4.0 * PI * PI * (n * n) as f64 * t).exp();
        for (a, b) in g.iter().zip(&f) {
            assert!((a - r * b).abs() < 1e-12, "mode {n}");
        }
    }
}

#[test]
fn lattice_propagator_is_a_semigroup_too() {
    let f: Vec<f64> = (0..N).map(|i| ((i * 37) % 11) as f64).collect();
    let mut a = f.clone();
    let mut s = HeatSolver::lattice(N);
    s.apply(&mut a, 1.0, 1e-5);
    s.apply(&mut a, 1.0, 2e-5);
    let mut b = f.clone();
    s.apply(&mut b, 1.0, 3e-5);
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-12);
    }
    assert!(a.iter().all(|&v| v >= -1e-13 && v <= 10.0 + 1e-12));
}
