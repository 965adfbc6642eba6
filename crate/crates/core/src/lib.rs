//! Exact delay stability bounds for consensus of linear multi-agent systems
//! with a uniform communication delay over an undirected graph.
//!
//! The pipeline is:
//!
//! 1. [`graph`]: validate the graph, diagonalize its Laplacian and split the
//!    network into one delayed subsystem per distinct nonzero eigenvalue.
//! 2. [`ctcr`]: locate every imaginary-axis crossing of each subsystem from
//!    the unit-circle roots of its Kronecker-sum auxiliary polynomial.
//! 3. [`stability`]: step the unstable-root count along the delay axis and
//!    read off the stable pockets and the delay bound.
//! 4. [`sim`]: simulate the delayed network to check the result.

pub mod ctcr;
pub mod error;
pub mod graph;
pub mod linalg;
pub mod sim;
pub mod stability;

pub use ctcr::{
    build_ace, crossing_frequencies, kernel_points, kernel_points_with, offspring, root_tendency,
    AcePolynomial, Crossing, CrossingKind, CrossingPoint, CtcrOptions, KernelPoint, LaurentMatrix,
};
pub use error::{Error, Result};
pub use graph::{
    build_topology, decouple, is_connected, spectral_decompose, transform_state, AgentDynamics,
    Decoupled, DistinctEigenvalue, SpectralDecomposition, Subsystem, Topology, DEFAULT_EIGEN_TOL,
};
pub use linalg::kron_sum;
pub use sim::{
    classify, disagreement_norms, simulate_full, simulate_subsystem, Classification, History,
    SimConfig, Thresholds, Trajectory, Verdict,
};
pub use stability::{
    analyze_topology, build_map, build_map_with, delay_bound, nu_at_zero, switching_bound,
    switching_bound_with, AnalyzedEigenvalue, DelayBound, NuStep, Pocket, StabilityMap,
};
