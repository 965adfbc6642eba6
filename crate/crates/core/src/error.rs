use thiserror::Error;

/// Errors raised by the analysis and simulation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not square ({rows}x{cols})")]
    NonSquare { rows: usize, cols: usize },

    #[error("adjacency matrix is not symmetric at ({row}, {col})")]
    Asymmetric { row: usize, col: usize },

    #[error("adjacency matrix has a nonzero diagonal entry at ({index}, {index})")]
    NonzeroDiagonal { index: usize },

    #[error("adjacency matrix has a negative or non-finite weight at ({row}, {col})")]
    NegativeWeight { row: usize, col: usize },

    #[error("eigendecomposition failed: {0}")]
    DecompositionFailed(String),

    #[error("communication graph is disconnected (algebraic connectivity {algebraic_connectivity:.3e})")]
    Disconnected { algebraic_connectivity: f64 },

    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("auxiliary characteristic polynomial vanishes identically for lambda = {lambda}")]
    DegenerateAce { lambda: f64 },

    #[error("auxiliary characteristic polynomial has non-negligible imaginary coefficients (relative {relative:.3e})")]
    AceNotReal { relative: f64 },

    #[error("unit-circle root z = {re}{im:+}j yields no imaginary characteristic root")]
    NoImaginaryRoot { re: f64, im: f64 },

    #[error(
        "tangential crossing for lambda = {lambda} at tau = {tau}, omega = {omega} \
         (Re ds/dtau = {derivative:.3e})"
    )]
    TangentialCrossing {
        lambda: f64,
        tau: f64,
        omega: f64,
        derivative: f64,
    },

    #[error("subsystem lambda = {lambda} has a root on the imaginary axis at zero delay (Re = {real_part:.3e})")]
    MarginalAtZero { lambda: f64, real_part: f64 },

    #[error("number of unstable roots became negative at tau = {tau}; a crossing was missed")]
    NegativeNuInternal { tau: f64 },

    #[error("topology {index} has {found} agents, expected {expected}")]
    MixedSizes {
        index: usize,
        expected: usize,
        found: usize,
    },

    #[error("invalid simulation config: {0}")]
    InvalidSimConfig(String),

    #[error("run of {duration} s is too short to classify; need at least {required} s")]
    TooShort { duration: f64, required: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    /// True for numerical degeneracies of the analysis, as opposed to bad input.
    pub fn is_degenerate(&self) -> bool {
        matches!(
            self,
            Error::TangentialCrossing { .. }
                | Error::MarginalAtZero { .. }
                | Error::DegenerateAce { .. }
                | Error::AceNotReal { .. }
                | Error::NegativeNuInternal { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
