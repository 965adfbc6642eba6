//! Fixtures and independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use delaybound::{build_topology, AgentDynamics, Subsystem, Topology};
use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;
use rand::Rng;

pub const LAMBDA_LOW: f64 = 1.381_966_011_250_105; // (5 − √5)/2
pub const LAMBDA_HIGH: f64 = 3.618_033_988_749_895; // (5 + √5)/2

pub fn ring5_dynamics() -> AgentDynamics {
    let a = DMatrix::from_row_slice(3, 3, &[0.2, 0., 0., 0., 0., 1., 1., -1., 0.]);
    let b = DMatrix::from_row_slice(3, 2, &[1., 0., 0., 1., 1., 0.]);
    let k = -DMatrix::from_row_slice(2, 3, &[-0.2694, 0.0402, -0.0899, 0.0386, -0.2857, -0.1238]);
    AgentDynamics::new(a, b, k).unwrap()
}

pub fn ring(n: usize) -> Topology {
    let mut adj = DMatrix::zeros(n, n);
    for i in 0..n {
        adj[(i, (i + 1) % n)] = 1.0;
        adj[((i + 1) % n, i)] = 1.0;
    }
    build_topology(adj).unwrap()
}

pub fn star(n: usize, center: usize) -> Topology {
    let mut adj = DMatrix::zeros(n, n);
    for i in (0..n).filter(|&i| i != center) {
        adj[(i, center)] = 1.0;
        adj[(center, i)] = 1.0;
    }
    build_topology(adj).unwrap()
}

pub fn ring5_subsystem(lambda: f64) -> Subsystem {
    Subsystem::new(lambda, &ring5_dynamics(), 2)
}

pub fn random_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-scale..scale))
}

fn eigenvalues(m: DMatrix<Complex64>) -> Vec<Complex64> {
    let n = m.nrows();
    if n == 1 {
        return vec![m[(0, 0)]];
    }
    let (_, t) = Schur::new(m).unpack();
    (0..n).map(|i| t[(i, i)]).collect()
}

fn delayed_matrix(sub: &Subsystem, z: Complex64) -> DMatrix<Complex64> {
    sub.a_matrix().map(|v| Complex64::new(v, 0.0)) + sub.c_matrix().map(|v| Complex64::new(v, 0.0)) * z
}

fn right_half_count(sub: &Subsystem, theta: f64) -> usize {
    let z = Complex64::from_polar(1.0, -theta);
    eigenvalues(delayed_matrix(sub, z)).iter().filter(|s| s.re > 0.0).count()
}

/// Kernel set `(τ, ω)` found without the auxiliary polynomial: sweep
/// `θ = ωτ` over `[0, 2π)`, detect changes in the number of eigenvalues of
/// `A + C e^{−jθ}` in the right half plane, refine by bisection and keep the
/// crossings with `ω > 0`.
pub fn frequency_sweep_kernel(sub: &Subsystem, steps: usize) -> Vec<(f64, f64)> {
    let mut found = Vec::new();
    let dtheta = 2.0 * PI / steps as f64;
    let mut prev = right_half_count(sub, 0.0);
    for i in 1..=steps {
        let theta = i as f64 * dtheta;
        let count = right_half_count(sub, theta);
        if count != prev {
            let (mut lo, mut hi) = (theta - dtheta, theta);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if right_half_count(sub, mid) == prev {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let theta_c = 0.5 * (lo + hi);
            let z = Complex64::from_polar(1.0, -theta_c);
            let s = eigenvalues(delayed_matrix(sub, z))
                .into_iter()
                .min_by(|a, b| a.re.abs().total_cmp(&b.re.abs()))
                .unwrap();
            if s.im > 0.0 {
                found.push((theta_c / s.im, s.im));
            }
        }
        prev = count;
    }
    found.sort_by(|a, b| a.0.total_cmp(&b.0));
    found
}

fn char_fn(sub: &Subsystem, s: Complex64, tau: f64) -> Complex64 {
    let p = sub.p();
    let m = DMatrix::<Complex64>::identity(p, p) * s - delayed_matrix(sub, (-s * tau).exp());
    m.determinant()
}

fn arg_change(sub: &Subsystem, tau: f64, s0: Complex64, s1: Complex64, f0: Complex64, f1: Complex64, depth: u32) -> f64 {
    let d = (f1 / f0).arg();
    if d.abs() < 0.25 || depth > 40 {
        return d;
    }
    let sm = 0.5 * (s0 + s1);
    let fm = char_fn(sub, sm, tau);
    arg_change(sub, tau, s0, sm, f0, fm, depth + 1) + arg_change(sub, tau, sm, s1, fm, f1, depth + 1)
}

/// Number of characteristic roots with `Re s > 0` by the argument principle
/// on a rectangle enclosing every such root (`|s| ≤ ‖A‖ + ‖C‖` there).
pub fn unstable_root_count(sub: &Subsystem, tau: f64) -> usize {
    let r = sub.a_matrix().norm() + sub.c_matrix().norm() + 1.0;
    let corners = [
        Complex64::new(0.0, -r),
        Complex64::new(r, -r),
        Complex64::new(r, r),
        Complex64::new(0.0, r),
    ];
    let per_edge = 400;
    let mut total = 0.0;
    for e in 0..4 {
        let (a, b) = (corners[e], corners[(e + 1) % 4]);
        let mut s_prev = a;
        let mut f_prev = char_fn(sub, a, tau);
        for i in 1..=per_edge {
            let s = a + (b - a) * (i as f64 / per_edge as f64);
            let f = char_fn(sub, s, tau);
            total += arg_change(sub, tau, s_prev, s, f_prev, f, 0);
            s_prev = s;
            f_prev = f;
        }
    }
    let winding = total / (2.0 * PI);
    assert!((winding - winding.round()).abs() < 1e-3, "non-integer winding {winding}");
    winding.round() as usize
}
