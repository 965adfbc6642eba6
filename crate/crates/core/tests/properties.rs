mod common;

use common::*;
use delaybound::ctcr::characteristic_residual;
use delaybound::{
    build_ace, build_map, kernel_points, kron_sum, offspring, root_tendency, spectral_decompose,
    transform_state, build_topology, Subsystem,
};
use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn eigenvalues(m: &DMatrix<f64>) -> Vec<Complex64> {
    Schur::new(m.clone()).complex_eigenvalues().iter().copied().collect()
}

fn matrix(n: usize, m: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-1.0f64..1.0, n * m).prop_map(move |v| DMatrix::from_vec(n, m, v))
}

fn square_pair() -> impl Strategy<Value = (DMatrix<f64>, DMatrix<f64>)> {
    (2usize..=4, 2usize..=4).prop_flat_map(|(a, b)| (matrix(a, a), matrix(b, b)))
}

/// Random subsystem with `A + C` comfortably Hurwitz.
fn stable_subsystem() -> impl Strategy<Value = Subsystem> {
    (1usize..=3)
        .prop_flat_map(|p| (matrix(p, p), matrix(p, p)))
        .prop_map(|(a, c)| Subsystem::from_matrices(1.0, a, c * 1.5, 1).unwrap())
        .prop_filter("A + C must be Hurwitz", |s| {
            eigenvalues(&(s.a_matrix() + s.c_matrix())).iter().all(|e| e.re < -0.05)
        })
}

fn weighted_graph() -> impl Strategy<Value = DMatrix<f64>> {
    (2usize..=50).prop_flat_map(|n| {
        prop::collection::vec(prop_oneof![Just(0.0), 0.1f64..3.0], n * (n - 1) / 2).prop_map(move |w| {
            let mut adj = DMatrix::zeros(n, n);
            let mut k = 0;
            for i in 0..n {
                for j in (i + 1)..n {
                    adj[(i, j)] = w[k];
                    adj[(j, i)] = w[k];
                    k += 1;
                }
            }
            adj
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kron_sum_spectrum_is_pairwise_sums((a, b) in square_pair()) {
        let mut eig = eigenvalues(&kron_sum(&a, &b).unwrap());
        for la in eigenvalues(&a) {
            for lb in eigenvalues(&b) {
                let s = la + lb;
                let (idx, dist) = eig.iter().enumerate()
                    .map(|(i, e)| (i, (e - s).norm()))
                    .min_by(|x, y| x.1.total_cmp(&y.1)).unwrap();
                prop_assert!(dist < 1e-9, "sum {s} missing, nearest at {dist:e}");
                eig.swap_remove(idx);
            }
        }
    }

    #[test]
    fn ace_roots_close_under_reciprocal(sub in stable_subsystem()) {
        let ace = build_ace(&sub).unwrap();
        let roots = ace.roots().unwrap();
        for r in &roots {
            let inv = r.inv();
            let best = roots.iter().map(|q| (q - inv).norm() / inv.norm().max(1.0)).fold(f64::MAX, f64::min);
            prop_assert!(best < 1e-6, "1/{r} missing ({best:e})");
        }
    }

    #[test]
    fn ace_coefficients_are_palindromic(sub in stable_subsystem()) {
        let ace = build_ace(&sub).unwrap();
        let c = ace.coefficients();
        let scale = c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (lo, hi) in c.iter().zip(c.iter().rev()) {
            prop_assert!((lo - hi).abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn crossings_are_characteristic_roots(sub in stable_subsystem()) {
        let kernel = kernel_points(&sub).unwrap();
        prop_assert!(kernel.len() <= sub.p() * sub.p());
        let tau_max = 4.0 * kernel.iter().map(|k| k.tau).fold(0.0, f64::max);
        for c in offspring(&kernel, tau_max) {
            let r = characteristic_residual(&sub, c.omega, c.tau);
            prop_assert!(r < 1e-7, "residual {r:e} at tau {}", c.tau);
        }
    }

    #[test]
    fn root_tendency_repeats_along_offspring(sub in stable_subsystem()) {
        for k in kernel_points(&sub).unwrap() {
            for j in 1..=3 {
                let tau = k.tau + j as f64 * 2.0 * PI / k.omega;
                prop_assert_eq!(root_tendency(&sub, k.omega, tau).unwrap(), k.root_tendency);
            }
        }
    }

    #[test]
    fn laplacian_is_psd_and_diagonalized(adj in weighted_graph()) {
        let top = build_topology(adj).unwrap();
        let l = top.laplacian().clone();
        let eig = SymmetricEigen::new(l.clone()).eigenvalues;
        let top_eig = eig.iter().fold(0.0f64, |m, v| m.max(*v));
        prop_assert!(eig.iter().all(|v| *v >= -1e-9 * top_eig.max(1.0)));
        for row in 0..l.nrows() {
            prop_assert!(l.row(row).sum().abs() < 1e-9 * top_eig.max(1.0));
        }
        let d = spectral_decompose(&top, 1e-9).unwrap();
        let t = d.t_matrix();
        let diag = t.transpose() * &l * t;
        let scale = 1e-9 * top_eig.max(1.0);
        for i in 0..diag.nrows() {
            for j in 0..diag.ncols() {
                let expected = if i == j { d.eigenvalues()[i] } else { 0.0 };
                prop_assert!((diag[(i, j)] - expected).abs() < scale, "entry ({i},{j}) = {}", diag[(i, j)]);
            }
        }
    }

    #[test]
    fn state_transform_preserves_norm(seed in any::<u64>(), n in 2usize..=12) {
        let top = ring(n);
        let d = spectral_decompose(&top, 1e-9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DVector::from_column_slice(random_matrix(&mut rng, 3 * n, 1, 2.0).as_slice());
        let xi = transform_state(&x, &d, 3).unwrap();
        prop_assert!((xi.norm() - x.norm()).abs() < 1e-12 * x.norm().max(1.0));
    }

    #[test]
    fn map_ignores_subsystem_order(sub in stable_subsystem(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = sub.p();
        let other = Subsystem::from_matrices(2.0, sub.a_matrix().clone(), sub.c_matrix() * 0.5 + random_matrix(&mut rng, p, p, 0.1), 1).unwrap();
        prop_assume!(eigenvalues(&(other.a_matrix() + other.c_matrix())).iter().all(|e| e.re < -0.05));
        let forward = build_map(&[sub.clone(), other.clone()], Some(20.0));
        let backward = build_map(&[other, sub], Some(20.0));
        match (forward, backward) {
            (Ok(f), Ok(b)) => {
                prop_assert_eq!(f.nu_at_zero, b.nu_at_zero);
                prop_assert_eq!(f.delay_bound, b.delay_bound);
                prop_assert_eq!(f.nu_steps.len(), b.nu_steps.len());
                for (x, y) in f.nu_steps.iter().zip(&b.nu_steps) {
                    prop_assert_eq!(x.nu, y.nu);
                    prop_assert!((x.start - y.start).abs() < 1e-12);
                }
            }
            (Err(f), Err(b)) => prop_assert_eq!(f, b),
            (f, b) => prop_assert!(false, "order changed outcome: {f:?} vs {b:?}"),
        }
    }
}

#[test]
fn map_agrees_on_shared_range_when_extended() {
    let subs = [ring5_subsystem(LAMBDA_LOW), ring5_subsystem(LAMBDA_HIGH)];
    let short = build_map(&subs, Some(6.0)).unwrap();
    let long = build_map(&subs, Some(24.0)).unwrap();
    assert_eq!(short.delay_bound, long.delay_bound);
    for i in 0..600 {
        let tau = i as f64 * 0.01 + 0.005;
        assert_eq!(short.nu_at(tau), long.nu_at(tau), "tau {tau}");
    }
}
