//! Communication graphs, Laplacian spectra and the decoupling of the
//! networked dynamics into one delayed subsystem per Laplacian eigenvalue.
//!
//! With `T` the orthogonal eigenvector matrix of the Laplacian `L`, the change
//! of variables `ξ = (Tᵀ ⊗ I_p) x` turns
//!
//! ```text
//! ẋ(t) = (I_n ⊗ A) x(t) − (L ⊗ BK) x(t − τ)
//! ```
//!
//! into `n` independent systems `ξ̇ᵢ(t) = A ξᵢ(t) − λᵢ BK ξᵢ(t − τ)`. The
//! `λ₁ = 0` block carries the group average and is delay free; the remaining
//! blocks are the disagreement dynamics.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::linalg::{ensure_square, real_matrix_eigenvalues};

/// Default relative tolerance for merging repeated Laplacian eigenvalues.
pub const DEFAULT_EIGEN_TOL: f64 = 1e-8;

/// Dynamics `ẋᵢ = A xᵢ + B uᵢ` of one agent together with its feedback gain `K`.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentDynamics {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    k: DMatrix<f64>,
}

impl AgentDynamics {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, k: DMatrix<f64>) -> Result<Self> {
        ensure_square(&a)?;
        let p = a.nrows();
        if b.nrows() != p {
            return Err(Error::DimensionMismatch {
                what: "rows of B",
                expected: p,
                found: b.nrows(),
            });
        }
        let q = b.ncols();
        if k.nrows() != q {
            return Err(Error::DimensionMismatch {
                what: "rows of K",
                expected: q,
                found: k.nrows(),
            });
        }
        if k.ncols() != p {
            return Err(Error::DimensionMismatch {
                what: "columns of K",
                expected: p,
                found: k.ncols(),
            });
        }
        let dynamics = AgentDynamics { a, b, k };
        if dynamics.is_hurwitz() {
            log::warn!(
                "agent state matrix A is Hurwitz; agents can converge to the origin without cooperation"
            );
        }
        Ok(dynamics)
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn k(&self) -> &DMatrix<f64> {
        &self.k
    }

    /// State dimension.
    pub fn p(&self) -> usize {
        self.a.nrows()
    }

    /// Input dimension.
    pub fn q(&self) -> usize {
        self.b.ncols()
    }

    /// The product `BK`.
    pub fn gain_product(&self) -> DMatrix<f64> {
        &self.b * &self.k
    }

    /// True when every eigenvalue of `A` has a strictly negative real part.
    pub fn is_hurwitz(&self) -> bool {
        real_matrix_eigenvalues(&self.a)
            .map(|eig| eig.iter().all(|s| s.re < 0.0))
            .unwrap_or(false)
    }
}

/// An undirected, possibly weighted, communication graph and its Laplacian.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    adjacency: DMatrix<f64>,
    laplacian: DMatrix<f64>,
}

impl Topology {
    pub fn adjacency(&self) -> &DMatrix<f64> {
        &self.adjacency
    }

    pub fn laplacian(&self) -> &DMatrix<f64> {
        &self.laplacian
    }

    /// Number of agents.
    pub fn n(&self) -> usize {
        self.adjacency.nrows()
    }
}

/// Validates an adjacency matrix and builds its Laplacian.
///
/// The adjacency must be exactly symmetric with a zero diagonal and
/// nonnegative entries. Each diagonal Laplacian entry is the negated sum of
/// the off-diagonal entries of its row, so row sums cancel to zero.
pub fn build_topology(adjacency: DMatrix<f64>) -> Result<Topology> {
    ensure_square(&adjacency)?;
    let n = adjacency.nrows();
    for i in 0..n {
        if adjacency[(i, i)] != 0.0 {
            return Err(Error::NonzeroDiagonal { index: i });
        }
        for k in 0..n {
            let w = adjacency[(i, k)];
            if !(w >= 0.0) || !w.is_finite() {
                return Err(Error::NegativeWeight { row: i, col: k });
            }
            if w != adjacency[(k, i)] {
                return Err(Error::Asymmetric { row: i, col: k });
            }
        }
    }

    let mut laplacian = -adjacency.clone();
    for i in 0..n {
        let off_diagonal: f64 = (0..n).filter(|&k| k != i).map(|k| laplacian[(i, k)]).sum();
        laplacian[(i, i)] = -off_diagonal;
    }
    Ok(Topology {
        adjacency,
        laplacian,
    })
}

/// A distinct Laplacian eigenvalue and how many times it repeats.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistinctEigenvalue {
    pub value: f64,
    pub multiplicity: usize,
}

/// Sorted Laplacian spectrum with an orthogonal eigenvector matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition {
    eigenvalues: Vec<f64>,
    t_matrix: DMatrix<f64>,
    distinct: Vec<DistinctEigenvalue>,
    tol: f64,
}

impl SpectralDecomposition {
    /// Eigenvalues in nondecreasing order.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Orthogonal matrix whose columns are the normalized eigenvectors.
    pub fn t_matrix(&self) -> &DMatrix<f64> {
        &self.t_matrix
    }

    /// Distinct eigenvalues in ascending order with their multiplicities.
    pub fn distinct(&self) -> &[DistinctEigenvalue] {
        &self.distinct
    }

    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Tolerance used when the decomposition was computed.
    pub fn tol(&self) -> f64 {
        self.tol
    }
}

/// Diagonalizes a Laplacian with a symmetric eigensolver.
///
/// Eigenvalues closer than `tol · max(1, λₙ)` are merged into one distinct
/// value. Eigenvector columns are signed so that their largest-magnitude
/// entry is positive.
pub fn spectral_decompose(topology: &Topology, tol: f64) -> Result<SpectralDecomposition> {
    let n = topology.n();
    if n == 0 {
        return Err(Error::DecompositionFailed("empty topology".into()));
    }
    let eig = SymmetricEigen::try_new(topology.laplacian.clone(), 1e-15, 100_000)
        .ok_or_else(|| Error::DecompositionFailed("symmetric eigensolver did not converge".into()))?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &k| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[k]));

    let mut eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut t_matrix = DMatrix::zeros(n, n);
    for (col, &src) in order.iter().enumerate() {
        let mut v = eig.eigenvectors.column(src).into_owned();
        let norm = v.norm();
        if norm > 0.0 {
            v /= norm;
        }
        let pivot = largest_magnitude_index(&v);
        if v[pivot] < 0.0 {
            v = -v;
        }
        t_matrix.set_column(col, &v);
    }

    if eigenvalues[0].abs() < tol {
        eigenvalues[0] = 0.0;
    }

    let scale = tol * eigenvalues[n - 1].abs().max(1.0);
    let mut distinct: Vec<DistinctEigenvalue> = Vec::new();
    let mut cluster_sum = eigenvalues[0];
    let mut cluster_start = 0;
    for i in 1..=n {
        let split = i == n || (eigenvalues[i] - eigenvalues[i - 1]).abs() >= scale;
        if split {
            let count = i - cluster_start;
            let value = if cluster_start == 0 && eigenvalues[0] == 0.0 {
                0.0
            } else {
                cluster_sum / count as f64
            };
            distinct.push(DistinctEigenvalue {
                value,
                multiplicity: count,
            });
            if i < n {
                cluster_start = i;
                cluster_sum = eigenvalues[i];
            }
        } else {
            cluster_sum += eigenvalues[i];
        }
    }

    Ok(SpectralDecomposition {
        eigenvalues,
        t_matrix,
        distinct,
        tol,
    })
}

fn largest_magnitude_index(v: &DVector<f64>) -> usize {
    let max = v.amax();
    // first index within rounding of the maximum, so ties resolve deterministically
    v.iter()
        .position(|x| x.abs() >= max * (1.0 - 1e-12))
        .unwrap_or(0)
}

/// True when the algebraic connectivity `λ₂` exceeds `tol`.
///
/// A single agent counts as connected.
pub fn is_connected(decomp: &SpectralDecomposition, tol: f64) -> bool {
    decomp.eigenvalues.get(1).is_none_or(|&l2| l2 > tol)
}

/// One disagreement subsystem `ẋ = A x + C x(t − τ)` with `C = −λ B K`.
#[derive(Debug, Clone, PartialEq)]
pub struct Subsystem {
    lambda: f64,
    a_matrix: DMatrix<f64>,
    c_matrix: DMatrix<f64>,
    multiplicity: usize,
}

impl Subsystem {
    pub fn new(lambda: f64, dynamics: &AgentDynamics, multiplicity: usize) -> Self {
        Subsystem {
            lambda,
            a_matrix: dynamics.a.clone(),
            c_matrix: dynamics.gain_product() * (-lambda),
            multiplicity,
        }
    }

    /// A generic single-delay system with explicit `A` and `C`, tagged with
    /// `lambda` for reporting.
    pub fn from_matrices(
        lambda: f64,
        a_matrix: DMatrix<f64>,
        c_matrix: DMatrix<f64>,
        multiplicity: usize,
    ) -> Result<Self> {
        ensure_square(&a_matrix)?;
        if c_matrix.shape() != a_matrix.shape() {
            return Err(Error::DimensionMismatch {
                what: "order of C",
                expected: a_matrix.nrows(),
                found: c_matrix.nrows(),
            });
        }
        Ok(Subsystem {
            lambda,
            a_matrix,
            c_matrix,
            multiplicity,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn a_matrix(&self) -> &DMatrix<f64> {
        &self.a_matrix
    }

    pub fn c_matrix(&self) -> &DMatrix<f64> {
        &self.c_matrix
    }

    pub fn multiplicity(&self) -> usize {
        self.multiplicity
    }

    /// Order of the subsystem.
    pub fn p(&self) -> usize {
        self.a_matrix.nrows()
    }
}

/// Result of decoupling: the delay-free group-decision dynamics and one
/// delayed subsystem per distinct nonzero Laplacian eigenvalue.
#[derive(Debug, Clone, PartialEq)]
pub struct Decoupled {
    /// `A`, governing `ξ̇₁ = A ξ₁` for the scaled state average.
    pub group_decision: DMatrix<f64>,
    pub subsystems: Vec<Subsystem>,
}

/// Splits the networked dynamics into disagreement subsystems.
pub fn decouple(dynamics: &AgentDynamics, decomp: &SpectralDecomposition) -> Result<Decoupled> {
    if !is_connected(decomp, decomp.tol) {
        return Err(Error::Disconnected {
            algebraic_connectivity: decomp.eigenvalues[1],
        });
    }
    let subsystems = decomp
        .distinct
        .iter()
        .skip(1)
        .map(|d| Subsystem::new(d.value, dynamics, d.multiplicity))
        .collect();
    Ok(Decoupled {
        group_decision: dynamics.a.clone(),
        subsystems,
    })
}

/// Applies `ξ = (Tᵀ ⊗ I_p) x` to a stacked state vector.
pub fn transform_state(
    x: &DVector<f64>,
    decomp: &SpectralDecomposition,
    p: usize,
) -> Result<DVector<f64>> {
    let n = decomp.n();
    if x.len() != n * p {
        return Err(Error::DimensionMismatch {
            what: "stacked state length",
            expected: n * p,
            found: x.len(),
        });
    }
    let t = &decomp.t_matrix;
    let mut xi = DVector::zeros(n * p);
    for i in 0..n {
        for k in 0..n {
            let w = t[(k, i)];
            if w == 0.0 {
                continue;
            }
            for r in 0..p {
                xi[i * p + r] += w * x[k * p + r];
            }
        }
    }
    Ok(xi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ring5() -> DMatrix<f64> {
        DMatrix::from_row_slice(
            5,
            5,
            &[
                0., 1., 0., 0., 1., //
                1., 0., 1., 0., 0., //
                0., 1., 0., 1., 0., //
                0., 0., 1., 0., 1., //
                1., 0., 0., 1., 0.,
            ],
        )
    }

    fn path3() -> DMatrix<f64> {
        DMatrix::from_row_slice(3, 3, &[0., 1., 0., 1., 0., 1., 0., 1., 0.])
    }

    fn ring5_dynamics() -> AgentDynamics {
        let a = DMatrix::from_row_slice(3, 3, &[0.2, 0., 0., 0., 0., 1., 1., -1., 0.]);
        let b = DMatrix::from_row_slice(3, 2, &[1., 0., 0., 1., 1., 0.]);
        let k = -DMatrix::from_row_slice(
            2,
            3,
            &[-0.2694, 0.0402, -0.0899, 0.0386, -0.2857, -0.1238],
        );
        AgentDynamics::new(a, b, k).unwrap()
    }

    #[test]
    fn ring5_laplacian() {
        let top = build_topology(ring5()).unwrap();
        let l = top.laplacian();
        for i in 0..5 {
            assert_eq!(l[(i, i)], 2.0);
            assert_eq!(l[(i, (i + 1) % 5)], -1.0);
            assert_eq!(l[(i, (i + 4) % 5)], -1.0);
            assert_eq!(l.row(i).sum(), 0.0);
        }
    }

    #[test]
    fn single_agent_laplacian_is_zero() {
        let top = build_topology(DMatrix::zeros(1, 1)).unwrap();
        assert_eq!(top.laplacian()[(0, 0)], 0.0);
    }

    #[test]
    fn rejects_invalid_adjacency() {
        let mut asym = DMatrix::zeros(2, 2);
        asym[(0, 1)] = 1.0;
        assert_eq!(
            build_topology(asym).unwrap_err(),
            Error::Asymmetric { row: 0, col: 1 }
        );

        let mut diag = DMatrix::zeros(2, 2);
        diag[(1, 1)] = 1.0;
        assert_eq!(
            build_topology(diag).unwrap_err(),
            Error::NonzeroDiagonal { index: 1 }
        );

        let mut neg = DMatrix::zeros(2, 2);
        neg[(0, 1)] = -1.0;
        neg[(1, 0)] = -1.0;
        assert_eq!(
            build_topology(neg).unwrap_err(),
            Error::NegativeWeight { row: 0, col: 1 }
        );

        assert_eq!(
            build_topology(DMatrix::zeros(2, 3)).unwrap_err(),
            Error::NonSquare { rows: 2, cols: 3 }
        );
    }

    #[test]
    fn ring5_spectrum() {
        let d = spectral_decompose(&build_topology(ring5()).unwrap(), DEFAULT_EIGEN_TOL).unwrap();
        let distinct = d.distinct();
        assert_eq!(distinct.len(), 3);
        assert_eq!(distinct[0].value, 0.0);
        assert_eq!(distinct[0].multiplicity, 1);
        assert!((distinct[1].value - 1.3820).abs() < 1e-4);
        assert_eq!(distinct[1].multiplicity, 2);
        assert!((distinct[2].value - 3.6180).abs() < 1e-4);
        assert_eq!(distinct[2].multiplicity, 2);
    }

    #[test]
    fn complete_graph_k3_spectrum() {
        let k3 = DMatrix::from_row_slice(3, 3, &[0., 1., 1., 1., 0., 1., 1., 1., 0.]);
        let d = spectral_decompose(&build_topology(k3).unwrap(), DEFAULT_EIGEN_TOL).unwrap();
        assert_eq!(d.distinct().len(), 2);
        assert_eq!(d.distinct()[1].multiplicity, 2);
        assert!((d.distinct()[1].value - 3.0).abs() < 1e-12);
    }

    #[test]
    fn path3_spectrum_matches_characteristic_polynomial() {
        // det(λI − L) = λ(λ² − 4λ + 3) has roots 0, 1, 3
        let d = spectral_decompose(&build_topology(path3()).unwrap(), DEFAULT_EIGEN_TOL).unwrap();
        let values: Vec<f64> = d.distinct().iter().map(|e| e.value).collect();
        assert_eq!(values.len(), 3);
        for (v, e) in values.iter().zip([0.0, 1.0, 3.0]) {
            assert!((v - e).abs() < 1e-12);
        }
    }

    #[test]
    fn first_eigenvector_is_normalized_ones() {
        let d = spectral_decompose(&build_topology(ring5()).unwrap(), DEFAULT_EIGEN_TOL).unwrap();
        let t1 = d.t_matrix().column(0);
        for v in t1.iter() {
            assert!((v - 1.0 / 5f64.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn connectivity() {
        let ring = spectral_decompose(&build_topology(ring5()).unwrap(), DEFAULT_EIGEN_TOL).unwrap();
        assert!(is_connected(&ring, 1e-8));
        let p3 = spectral_decompose(&build_topology(path3()).unwrap(), DEFAULT_EIGEN_TOL).unwrap();
        assert!(is_connected(&p3, 1e-8));

        let mut two_edges = DMatrix::zeros(4, 4);
        two_edges[(0, 1)] = 1.0;
        two_edges[(1, 0)] = 1.0;
        two_edges[(2, 3)] = 1.0;
        two_edges[(3, 2)] = 1.0;
        let d = spectral_decompose(&build_topology(two_edges).unwrap(), DEFAULT_EIGEN_TOL).unwrap();
        assert!(!is_connected(&d, 1e-8));
        assert_eq!(d.distinct()[0].multiplicity, 2);
    }

    #[test]
    fn decouple_ring5() {
        let d = spectral_decompose(&build_topology(ring5()).unwrap(), DEFAULT_EIGEN_TOL).unwrap();
        let dec = decouple(&ring5_dynamics(), &d).unwrap();
        assert_eq!(dec.subsystems.len(), 2);
        assert!((dec.subsystems[0].lambda() - 1.3820).abs() < 1e-4);
        assert!((dec.subsystems[1].lambda() - 3.6180).abs() < 1e-4);
        assert!(dec.subsystems.iter().all(|s| s.multiplicity() == 2));
        let dyn4 = ring5_dynamics();
        let s = &dec.subsystems[1];
        assert_eq!(s.c_matrix(), &(dyn4.gain_product() * (-s.lambda())));
    }

    #[test]
    fn decouple_single_agent_is_empty() {
        let d = spectral_decompose(&build_topology(DMatrix::zeros(1, 1)).unwrap(), DEFAULT_EIGEN_TOL).unwrap();
        assert!(decouple(&ring5_dynamics(), &d).unwrap().subsystems.is_empty());
    }

    #[test]
    fn decouple_path3() {
        let d = spectral_decompose(&build_topology(path3()).unwrap(), DEFAULT_EIGEN_TOL).unwrap();
        let dec = decouple(&ring5_dynamics(), &d).unwrap();
        let lambdas: Vec<f64> = dec.subsystems.iter().map(|s| s.lambda()).collect();
        assert_eq!(lambdas.len(), 2);
        assert!((lambdas[0] - 1.0).abs() < 1e-12 && (lambdas[1] - 3.0).abs() < 1e-12);
        assert!(dec.subsystems.iter().all(|s| s.multiplicity() == 1));
    }

    #[test]
    fn decouple_refuses_disconnected() {
        let d = spectral_decompose(&build_topology(DMatrix::zeros(3, 3)).unwrap(), DEFAULT_EIGEN_TOL).unwrap();
        assert!(matches!(
            decouple(&ring5_dynamics(), &d),
            Err(Error::Disconnected { .. })
        ));
    }

    #[test]
    fn transform_consensus_state() {
        let d = spectral_decompose(&build_topology(ring5()).unwrap(), DEFAULT_EIGEN_TOL).unwrap();
        let v = [0.3, -1.2, 2.0];
        let x = DVector::from_iterator(15, (0..15).map(|i| v[i % 3]));
        let xi = transform_state(&x, &d, 3).unwrap();
        for r in 0..3 {
            assert!((xi[r] - 5f64.sqrt() * v[r]).abs() < 1e-12);
        }
        assert!(xi.rows(3, 12).amax() < 1e-12);
    }

    #[test]
    fn transform_identity_for_single_agent() {
        let d = spectral_decompose(&build_topology(DMatrix::zeros(1, 1)).unwrap(), DEFAULT_EIGEN_TOL).unwrap();
        let x = DVector::from_vec(vec![1.0, -2.0]);
        assert_eq!(transform_state(&x, &d, 2).unwrap(), x);
    }

    #[test]
    fn transform_rejects_wrong_length() {
        let d = spectral_decompose(&build_topology(ring5()).unwrap(), DEFAULT_EIGEN_TOL).unwrap();
        assert!(matches!(
            transform_state(&DVector::zeros(14), &d, 3),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn dynamics_shape_checks() {
        let a = DMatrix::<f64>::zeros(2, 2);
        assert!(AgentDynamics::new(a.clone(), DMatrix::zeros(3, 1), DMatrix::zeros(1, 2)).is_err());
        assert!(AgentDynamics::new(a.clone(), DMatrix::zeros(2, 1), DMatrix::zeros(2, 2)).is_err());
        assert!(AgentDynamics::new(a.clone(), DMatrix::zeros(2, 1), DMatrix::zeros(1, 3)).is_err());
        let ok = AgentDynamics::new(a, DMatrix::zeros(2, 1), DMatrix::zeros(1, 2)).unwrap();
        assert_eq!((ok.p(), ok.q()), (2, 1));
    }
}
