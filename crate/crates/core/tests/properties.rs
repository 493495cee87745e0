use coupled_plates::abstract_modes::{mode_eigenvalue, mode_generator, AbstractConfig};
use coupled_plates::damping::{indicator_profile, smooth_bump_profile, Interval};
use coupled_plates::evolution::{evolve, EvolveOptions};
use coupled_plates::fit::fit_line;
use coupled_plates::generator::{assemble_generator, dissipativity_residual};
use coupled_plates::mesh::{DiscreteOperators, Grid};
use nalgebra::Vector4;
use num_complex::Complex64;
use proptest::prelude::*;
use std::sync::Arc;

fn ops(n: usize) -> DiscreteOperators {
    DiscreteOperators::build(&Grid::line(n).unwrap())
}

fn vec_of(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn biharmonic_summation_by_parts((n, u, v) in (4usize..40).prop_flat_map(|n| (Just(n), vec_of(n), vec_of(n)))) {
        let o = ops(n);
        let lhs = o.inner(&o.b.mul_vec(&u), &v);
        let ku = o.k.mul_vec(&u);
        let kv = o.k.mul_vec(&v);
        let rhs: f64 = ku.iter().zip(&kv).zip(&o.node_weights).map(|((a, b), w)| w * a * b).sum();
        let scale = o.k_norm_sq(&u).sqrt() * o.k_norm_sq(&v).sqrt();
        prop_assert!((lhs - rhs).abs() <= 1e-11 * scale.max(1e-300));
    }

    #[test]
    fn weighted_laplacian_is_nonpositive(
        (n, a, x) in (4usize..40).prop_flat_map(|n| (Just(n), prop::collection::vec(0.0f64..5.0, n + 1), vec_of(n)))
    ) {
        let o = ops(n);
        let l = o.weighted_laplacian(&a).unwrap();
        let q = o.inner(&x, &l.mul_vec(&x));
        let dense = l.to_dense();
        prop_assert!(q <= 1e-12 * dense.norm() * o.inner(&x, &x));
        prop_assert!((&dense - dense.transpose()).amax() <= 1e-12 * dense.amax().max(1.0));
    }

    #[test]
    fn generator_dissipativity_identity(
        n in 5usize..60,
        d in 0.2f64..3.0,
        c in 0.2f64..3.0,
        lo in 0.0f64..0.5,
        a0 in 0.1f64..4.0,
        smooth in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let o = Arc::new(ops(n));
        let omega = [Interval::new(lo, 1.0).unwrap()];
        let profile = if smooth {
            smooth_bump_profile(&omega, a0, 0.1, &o).unwrap()
        } else {
            indicator_profile(&omega, a0, &o).unwrap()
        };
        let (g, f) = assemble_generator(o, d, c, profile).unwrap();
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..5 {
            let z = f.random_state(&mut rng);
            prop_assert!(dissipativity_residual(&g, &f, &z).unwrap() <= 1e-10);
            prop_assert!(g.dissipation(&z).unwrap() >= 0.0);
        }
    }

    #[test]
    fn midpoint_energy_never_increases(n in 5usize..30, seed in any::<u64>(), dt in 1e-4f64..1e-2) {
        let o = Arc::new(ops(n));
        let profile = indicator_profile(&[Interval::new(0.6, 1.0).unwrap()], 1.0, &o).unwrap();
        let (g, f) = assemble_generator(o, 1.0, 2.0, profile).unwrap();
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let z0 = f.random_state(&mut rng);
        let tr = evolve(&g, &f, &z0, 20.0 * dt, dt, &EvolveOptions::default()).unwrap();
        let e0 = tr.energies[0];
        for w in tr.energies.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12 * e0);
        }
        for ((w, dis), k) in tr.energies.windows(2).zip(&tr.dissipation).zip(0..) {
            prop_assert!((w[1] - w[0] + dis).abs() <= 1e-11 * e0, "step {}", k);
        }
    }

    #[test]
    fn abstract_block_dissipativity(k in 1usize..200, theta in -1.0f64..1.0, gamma in 0.0f64..5.0,
                                    a in 0.1f64..3.0, b in 0.1f64..3.0,
                                    x in prop::array::uniform8(-1.0f64..1.0)) {
        let cfg = AbstractConfig { a, b, gamma, theta };
        let mu = mode_eigenvalue(k);
        let block = mode_generator(mu, &cfg).unwrap();
        let s = block.weights.map(f64::sqrt);
        // unit-size coordinates in the energy frame
        let v = Vector4::from_fn(|i, _| Complex64::new(x[2 * i], x[2 * i + 1]) / s[i]);
        let av = block.matrix.map(|m| Complex64::new(m, 0.0)) * v;
        let re = block.energy_inner(&v, &av).re;
        let expect = -gamma * mu.powf(theta) * (v[2] + v[3]).norm_sqr();
        let scale = block.energy_inner(&v, &v).re * (1.0 + gamma * mu.powf(theta)) * mu.sqrt();
        prop_assert!((re - expect).abs() <= 1e-13 * scale);
    }

    #[test]
    fn power_laws_fit_exactly(slope in -3.0f64..3.0, icpt in -5.0f64..5.0, n in 6usize..50) {
        let xs: Vec<f64> = (0..n).map(|i| i as f64 * 0.3).collect();
        let ys: Vec<f64> = xs.iter().map(|x| icpt + slope * x).collect();
        let f = fit_line(&xs, &ys, 6).unwrap();
        prop_assert!((f.slope - slope).abs() < 1e-10);
        prop_assert!(f.rms < 1e-10);
    }
}
