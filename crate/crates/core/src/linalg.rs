//! Small dense linear-algebra helpers shared by the analysis modules.

use nalgebra::{ComplexField, DMatrix, Schur};
use num_complex::Complex64;

use crate::error::{Error, Result};

const SCHUR_EPS: f64 = 1e-15;
const SCHUR_MAX_ITER: usize = 10_000;
const POLISH_ITERATIONS: usize = 8;

/// Kronecker sum `m1 ⊗ I + I ⊗ m2`.
///
/// The spectrum of the result is the set of all pairwise sums of the
/// spectra of the operands.
pub fn kron_sum<T: ComplexField>(m1: &DMatrix<T>, m2: &DMatrix<T>) -> Result<DMatrix<T>> {
    ensure_square(m1)?;
    ensure_square(m2)?;
    let left = m1.kronecker(&DMatrix::<T>::identity(m2.nrows(), m2.nrows()));
    let right = DMatrix::<T>::identity(m1.nrows(), m1.nrows()).kronecker(m2);
    Ok(left + right)
}

pub(crate) fn ensure_square<T: nalgebra::Scalar>(m: &DMatrix<T>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::NonSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(())
}

pub(crate) fn to_complex(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|v| Complex64::new(v, 0.0))
}

/// Eigenvalues of a complex square matrix via the complex Schur form.
pub fn complex_eigenvalues(m: &DMatrix<Complex64>) -> Result<Vec<Complex64>> {
    ensure_square(m)?;
    let n = m.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    if n == 1 {
        return Ok(vec![m[(0, 0)]]);
    }
    let schur = Schur::try_new(m.clone(), SCHUR_EPS, SCHUR_MAX_ITER)
        .ok_or_else(|| Error::DecompositionFailed("complex Schur iteration did not converge".into()))?;
    let (_, t) = schur.unpack();
    Ok((0..n).map(|i| t[(i, i)]).collect())
}

/// Eigenvalues of a real square matrix, as complex numbers.
pub fn real_matrix_eigenvalues(m: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    ensure_square(m)?;
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    let schur = Schur::try_new(m.clone(), SCHUR_EPS, SCHUR_MAX_ITER)
        .ok_or_else(|| Error::DecompositionFailed("real Schur iteration did not converge".into()))?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

/// Classical adjugate `adj(m)`, so that `adj(m) * m = det(m) * I`.
pub fn adjugate(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let n = m.nrows();
    if n == 1 {
        return DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0));
    }
    let mut adj = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let minor = m.clone().remove_row(i).remove_column(j);
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            adj[(j, i)] = minor.determinant() * sign;
        }
    }
    adj
}

/// Evaluates a polynomial with ascending coefficients at `z` (Horner).
pub fn poly_eval(coefficients: &[f64], z: Complex64) -> Complex64 {
    coefficients
        .iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
}

fn poly_eval_with_derivative(coefficients: &[f64], z: Complex64) -> (Complex64, Complex64) {
    let zero = Complex64::new(0.0, 0.0);
    coefficients.iter().rev().fold((zero, zero), |(p, dp), &c| (p * z + c, dp * z + p))
}

/// Roots of a real polynomial (ascending coefficients) from the eigenvalues
/// of its companion matrix, each polished by a few Newton steps.
///
/// Leading zero coefficients must already be trimmed.
pub fn poly_roots(coefficients: &[f64]) -> Result<Vec<Complex64>> {
    let degree = coefficients.len().saturating_sub(1);
    if degree == 0 {
        return Ok(Vec::new());
    }
    let lead = coefficients[degree];
    if lead == 0.0 {
        return Err(Error::InvalidArgument(
            "polynomial leading coefficient is zero".into(),
        ));
    }
    let mut companion = DMatrix::<Complex64>::zeros(degree, degree);
    for i in 1..degree {
        companion[(i, i - 1)] = Complex64::new(1.0, 0.0);
    }
    for i in 0..degree {
        companion[(i, degree - 1)] = Complex64::new(-coefficients[i] / lead, 0.0);
    }
    let roots = complex_eigenvalues(&companion)?;
    Ok(roots.into_iter().map(|r| polish_root(coefficients, r)).collect())
}

fn polish_root(coefficients: &[f64], mut z: Complex64) -> Complex64 {
    let mut residual = poly_eval(coefficients, z).norm();
    for _ in 0..POLISH_ITERATIONS {
        let (p, dp) = poly_eval_with_derivative(coefficients, z);
        if dp.norm() == 0.0 || p.norm() == 0.0 {
            break;
        }
        let candidate = z - p / dp;
        let candidate_residual = poly_eval(coefficients, candidate).norm();
        if !(candidate_residual < residual) {
            break;
        }
        z = candidate;
        residual = candidate_residual;
    }
    z
}
