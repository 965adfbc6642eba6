//! Imaginary-axis crossings of a single-delay system `ẋ = A x + C x(t − τ)`.
//!
//! Substituting `z = e^{−sτ}`, an imaginary root `s = jω` is an eigenvalue of
//! `A + Cz` while `−jω` is an eigenvalue of `A + Cz⁻¹` (for `|z| = 1`). Their
//! sum vanishes, so the Kronecker sum of the two matrices is singular:
//!
//! ```text
//! ACE(z) = det[(A + Cz) ⊕ (A + Cz⁻¹)] = 0
//! ```
//!
//! `z^{p²} · ACE(z)` is an ordinary polynomial of degree at most `2p²`. Its
//! unit-modulus roots give every candidate crossing; each is confirmed by an
//! eigen-solve of `A + Cz`, converted to the smallest positive delay
//! (the kernel), and labelled with the direction the root moves as the delay
//! grows (the root tendency). Crossings repeat with period `2π/ω` in the
//! delay (the offspring) with the same tendency.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::graph::Subsystem;
use crate::linalg::{adjugate, complex_eigenvalues, kron_sum, poly_roots, to_complex};

const TAU_STEP: f64 = 1e-6;
const TANGENTIAL_THRESHOLD: f64 = 1e-9;
const COEFF_TRIM: f64 = 1e-12;
const REAL_COEFF_TOL: f64 = 1e-9;
const ROOT_DEDUP: f64 = 1e-8;

/// Numerical tolerances of the crossing search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CtcrOptions {
    /// Accepted deviation of `|z|` from one.
    pub unit_circle_tol: f64,
    /// Accepted relative real part of an eigenvalue of `A + Cz` to count as
    /// imaginary.
    pub imaginary_tol: f64,
}

impl Default for CtcrOptions {
    fn default() -> Self {
        CtcrOptions {
            unit_circle_tol: 1e-6,
            imaginary_tol: 1e-6,
        }
    }
}

/// `M₀ + M₁ z + M₂ z⁻¹`, the Kronecker sum `(A + Cz) ⊕ (A + Cz⁻¹)` split by
/// powers of `z`.
#[derive(Debug, Clone, PartialEq)]
pub struct LaurentMatrix {
    pub constant_part: DMatrix<Complex64>,
    pub z_part: DMatrix<Complex64>,
    pub zinv_part: DMatrix<Complex64>,
}

impl LaurentMatrix {
    pub fn new(subsystem: &Subsystem) -> Self {
        let a = to_complex(subsystem.a_matrix());
        let c = to_complex(subsystem.c_matrix());
        let p = subsystem.p();
        let eye = DMatrix::<Complex64>::identity(p, p);
        LaurentMatrix {
            constant_part: kron_sum(&a, &a).expect("A is square"),
            z_part: c.kronecker(&eye),
            zinv_part: eye.kronecker(&c),
        }
    }

    pub fn eval(&self, z: Complex64) -> DMatrix<Complex64> {
        &self.constant_part + &self.z_part * z + &self.zinv_part * z.inv()
    }
}

/// Real polynomial `z^{p²} · det[(A + Cz) ⊕ (A + Cz⁻¹)]`, ascending powers,
/// with leading and trailing negligible coefficients removed.
#[derive(Debug, Clone, PartialEq)]
pub struct AcePolynomial {
    coefficients: Vec<f64>,
    /// Power of `z` carried by `coefficients[0]` before trimming.
    low_power: usize,
}

impl AcePolynomial {
    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn degree(&self) -> usize {
        self.coefficients.len().saturating_sub(1)
    }

    /// Lowest power of `z` stripped from the untrimmed polynomial.
    pub fn low_power(&self) -> usize {
        self.low_power
    }

    /// All roots of the trimmed polynomial (companion-matrix eigenvalues).
    pub fn roots(&self) -> Result<Vec<Complex64>> {
        poly_roots(&self.coefficients)
    }
}

/// Builds the auxiliary characteristic polynomial by sampling the Laurent
/// determinant at `2p² + 1` roots of unity and inverting the DFT.
pub fn build_ace(subsystem: &Subsystem) -> Result<AcePolynomial> {
    let p = subsystem.p();
    let half = p * p;
    let samples = 2 * half + 1;
    let laurent = LaurentMatrix::new(subsystem);

    let mut values: Vec<Complex64> = (0..samples)
        .map(|k| {
            let z = Complex64::from_polar(1.0, 2.0 * PI * k as f64 / samples as f64);
            laurent.eval(z).determinant() * z.powu(half as u32)
        })
        .collect();
    FftPlanner::<f64>::new()
        .plan_fft_forward(samples)
        .process(&mut values);
    let coefficients: Vec<Complex64> = values.iter().map(|v| v / samples as f64).collect();

    let max_abs = coefficients.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let a_norm = subsystem.a_matrix().norm();
    let c_norm = subsystem.c_matrix().norm();
    let scale = (2.0 * (a_norm + c_norm)).powi(half as i32);
    if max_abs == 0.0 || max_abs <= 1e-13 * scale {
        return Err(Error::DegenerateAce {
            lambda: subsystem.lambda(),
        });
    }

    let max_imag = coefficients.iter().map(|c| c.im.abs()).fold(0.0, f64::max);
    if max_imag > REAL_COEFF_TOL * max_abs {
        return Err(Error::AceNotReal {
            relative: max_imag / max_abs,
        });
    }

    let cutoff = COEFF_TRIM * max_abs;
    let first = coefficients.iter().position(|c| c.norm() > cutoff).unwrap_or(0);
    let last = coefficients.iter().rposition(|c| c.norm() > cutoff).unwrap_or(0);
    Ok(AcePolynomial {
        coefficients: coefficients[first..=last].iter().map(|c| c.re).collect(),
        low_power: first,
    })
}

/// Unit-modulus roots of the polynomial, one per conjugate pair.
///
/// Roots within `tol` of the unit circle are normalized to `|z| = 1`,
/// mapped to the representative with `Im(z) ≤ 0`, and deduplicated.
pub fn unit_circle_roots(ace: &AcePolynomial, tol: f64) -> Result<Vec<Complex64>> {
    let mut found: Vec<Complex64> = Vec::new();
    for root in ace.roots()? {
        let modulus = root.norm();
        if (modulus - 1.0).abs() >= tol {
            continue;
        }
        let mut z = root / modulus;
        if z.im > 0.0 {
            z = z.conj();
        }
        if found.iter().all(|f| (f - z).norm() > ROOT_DEDUP) {
            found.push(z);
        }
    }
    found.sort_by(|a, b| a.arg().total_cmp(&b.arg()));
    Ok(found)
}

/// An imaginary root `s = jω` produced at `z = e^{−jωτ}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    pub omega: f64,
    pub z: Complex64,
}

/// Imaginary eigenvalues of `A + Cz` for a unit-circle `z`.
///
/// Because `A` and `C` are real, an eigenvalue `−jω` of `A + Cz` means `+jω`
/// is an eigenvalue of `A + Cz*`. Such roots are reported with the
/// conjugated `z`, so every result carries `ω > 0`. Roots at the origin are
/// dropped with a warning since they do not depend on the delay.
pub fn crossing_frequencies(subsystem: &Subsystem, z: Complex64, tol: f64) -> Result<Vec<Crossing>> {
    let d1 = to_complex(subsystem.a_matrix()) + to_complex(subsystem.c_matrix()) * z;
    let mut crossings: Vec<Crossing> = Vec::new();
    let mut imaginary = false;
    for s in complex_eigenvalues(&d1)? {
        if s.re.abs() >= tol * s.norm().max(1.0) {
            continue;
        }
        imaginary = true;
        let candidate = if s.im > tol {
            Crossing { omega: s.im, z }
        } else if s.im < -tol {
            Crossing {
                omega: -s.im,
                z: z.conj(),
            }
        } else {
            log::warn!(
                "static root at s = 0 for lambda = {} (z = {z}); it is independent of the delay",
                subsystem.lambda()
            );
            continue;
        };
        let duplicate = crossings.iter().any(|c| {
            (c.omega - candidate.omega).abs() <= 1e-9 * candidate.omega.max(1.0)
                && (c.z - candidate.z).norm() <= ROOT_DEDUP
        });
        if !duplicate {
            crossings.push(candidate);
        }
    }
    if !imaginary {
        return Err(Error::NoImaginaryRoot { re: z.re, im: z.im });
    }
    Ok(crossings)
}

/// Smallest positive delay for a crossing: `τ = θ/ω` with `θ = −arg z`
/// taken in `(0, 2π]`.
pub fn kernel_delay(crossing: &Crossing) -> f64 {
    let mut theta = -crossing.z.arg();
    if theta <= 0.0 {
        theta += 2.0 * PI;
    }
    theta / crossing.omega
}

/// A kernel point: the smallest positive delay producing a given imaginary
/// root pair `±jω`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelPoint {
    pub tau: f64,
    pub omega: f64,
    pub z: Complex64,
    pub root_tendency: i8,
    pub lambda: f64,
    pub multiplicity: usize,
}

/// Kernel points of a subsystem with default tolerances, sorted by delay.
pub fn kernel_points(subsystem: &Subsystem) -> Result<Vec<KernelPoint>> {
    kernel_points_with(subsystem, &CtcrOptions::default())
}

pub fn kernel_points_with(subsystem: &Subsystem, options: &CtcrOptions) -> Result<Vec<KernelPoint>> {
    let ace = build_ace(subsystem)?;
    let mut points: Vec<KernelPoint> = Vec::new();
    for z in unit_circle_roots(&ace, options.unit_circle_tol)? {
        let crossings = match crossing_frequencies(subsystem, z, options.imaginary_tol) {
            Ok(c) => c,
            Err(Error::NoImaginaryRoot { .. }) => {
                log::debug!(
                    "discarding spurious unit-circle root z = {z} for lambda = {}",
                    subsystem.lambda()
                );
                continue;
            }
            Err(e) => return Err(e),
        };
        for crossing in crossings {
            let tau = kernel_delay(&crossing);
            let duplicate = points.iter().any(|k| {
                (k.tau - tau).abs() <= 1e-9 * tau.max(1.0)
                    && (k.omega - crossing.omega).abs() <= 1e-9 * crossing.omega.max(1.0)
            });
            if duplicate {
                continue;
            }
            let root_tendency = root_tendency(subsystem, crossing.omega, tau)?;
            points.push(KernelPoint {
                tau,
                omega: crossing.omega,
                z: crossing.z,
                root_tendency,
                lambda: subsystem.lambda(),
                multiplicity: subsystem.multiplicity(),
            });
        }
    }
    points.sort_by(|a, b| a.tau.total_cmp(&b.tau));
    let bound = subsystem.p() * subsystem.p();
    if points.len() > bound {
        log::warn!(
            "lambda = {}: {} kernel points exceed the p² = {bound} bound",
            subsystem.lambda(),
            points.len()
        );
    }
    Ok(points)
}

/// `det(sI − A − C e^{−sτ})`.
pub fn characteristic_function(subsystem: &Subsystem, s: Complex64, tau: f64) -> Complex64 {
    characteristic_matrix(subsystem, s, tau).determinant()
}

fn characteristic_matrix(subsystem: &Subsystem, s: Complex64, tau: f64) -> DMatrix<Complex64> {
    let p = subsystem.p();
    let delay = (-s * tau).exp();
    DMatrix::<Complex64>::identity(p, p) * s
        - to_complex(subsystem.a_matrix())
        - to_complex(subsystem.c_matrix()) * delay
}

/// `|det(jωI − A − C e^{−jωτ})| / max(1, ‖jωI − A‖_F)`.
pub fn characteristic_residual(subsystem: &Subsystem, omega: f64, tau: f64) -> f64 {
    let s = Complex64::new(0.0, omega);
    let p = subsystem.p();
    let shifted = DMatrix::<Complex64>::identity(p, p) * s - to_complex(subsystem.a_matrix());
    characteristic_function(subsystem, s, tau).norm() / shifted.norm().max(1.0)
}

/// `ds/dτ` at a root `s`, by implicit differentiation of the characteristic
/// function, together with the partial derivatives used.
fn root_velocity(subsystem: &Subsystem, s: Complex64, tau: f64) -> (Complex64, Complex64, Complex64) {
    let p = subsystem.p();
    let delayed_c = to_complex(subsystem.c_matrix()) * (-s * tau).exp();
    let m = DMatrix::<Complex64>::identity(p, p) * s - to_complex(subsystem.a_matrix()) - &delayed_c;
    let adj = adjugate(&m);
    let d_s = (&adj * (DMatrix::<Complex64>::identity(p, p) + &delayed_c * Complex64::new(tau, 0.0))).trace();
    let d_tau = (&adj * (&delayed_c * s)).trace();
    (-d_tau / d_s, d_s, d_tau)
}

/// Root tendency `sgn Re(ds/dτ)` at the imaginary root `jω`, delay `τ`.
///
/// The analytic value is cross-checked by tracking the root through a
/// `±1e-6` perturbation of the delay with one Newton step each.
pub fn root_tendency(subsystem: &Subsystem, omega: f64, tau: f64) -> Result<i8> {
    let s = Complex64::new(0.0, omega);
    let tangential = |derivative: f64| Error::TangentialCrossing {
        lambda: subsystem.lambda(),
        tau,
        omega,
        derivative,
    };

    let (velocity, d_s, _) = root_velocity(subsystem, s, tau);
    if d_s.norm() == 0.0 || !velocity.re.is_finite() {
        return Err(tangential(f64::NAN));
    }
    if velocity.re.abs() < TANGENTIAL_THRESHOLD {
        return Err(tangential(velocity.re));
    }

    let track = |t: f64| -> Complex64 {
        let f = characteristic_function(subsystem, s, t);
        let (_, d_s, _) = root_velocity(subsystem, s, t);
        s - f / d_s
    };
    let forward = track(tau + TAU_STEP);
    let backward = track(tau - TAU_STEP);
    let fd = (forward.re - backward.re) / (2.0 * TAU_STEP);
    if fd.signum() != velocity.re.signum() {
        return Err(tangential(velocity.re));
    }
    Ok(if velocity.re > 0.0 { 1 } else { -1 })
}

/// Whether a crossing point is a kernel point or one of its periodic copies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrossingKind {
    Kernel,
    Offspring,
}

/// A delay at which a subsystem has imaginary roots `±jω`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossingPoint {
    pub tau: f64,
    pub omega: f64,
    pub root_tendency: i8,
    pub lambda: f64,
    pub multiplicity: usize,
    pub kind: CrossingKind,
    /// Period index: 0 for the kernel point, `k` for `τ₀ + 2kπ/ω`.
    pub period: usize,
}

/// Kernel points no larger than `tau_max` together with all their offspring
/// `τ₀ + 2kπ/ω ≤ tau_max`, sorted by delay.
pub fn offspring(kernel: &[KernelPoint], tau_max: f64) -> Vec<CrossingPoint> {
    let mut out = Vec::new();
    for point in kernel {
        let period = 2.0 * PI / point.omega;
        let mut k = 0usize;
        loop {
            let tau = point.tau + k as f64 * period;
            if tau > tau_max {
                break;
            }
            out.push(CrossingPoint {
                tau,
                omega: point.omega,
                root_tendency: point.root_tendency,
                lambda: point.lambda,
                multiplicity: point.multiplicity,
                kind: if k == 0 {
                    CrossingKind::Kernel
                } else {
                    CrossingKind::Offspring
                },
                period: k,
            });
            k += 1;
        }
    }
    out.sort_by(|a, b| a.tau.total_cmp(&b.tau));
    out
}
