//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the numerical laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported tensor rank {rank} (supported: {supported})")]
    UnsupportedRank { rank: usize, supported: &'static str },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("null vector constraint violated: {0}")]
    NullVectorConstraint(String),

    #[error("probe matrix is rank-deficient (rank {rank}, expected {expected}); this violates the injectivity guarantee and indicates a bug")]
    RankDeficientProbe { rank: usize, expected: usize },

    #[error("evaluations are inconsistent with the assumed tensor form: {0}")]
    InconsistentOracle(String),

    #[error("grid too small: {0}")]
    GridTooSmall(String),

    #[error("invalid domain setup: {0}")]
    InvalidDomain(String),

    #[error("linear system is singular or not positive definite (pivot {pivot:.3e} at row {row})")]
    SingularSystem { row: usize, pivot: f64 },

    #[error("direct solve residual {residual:.3e} exceeds tolerance {tol:.3e}")]
    ResidualTooLarge { residual: f64, tol: f64 },

    #[error("ill-conditioned fit (condition number {cond:.3e}); widen the h spread")]
    IllConditionedFit { cond: f64 },

    #[error("remainder decay violated between h={h_coarse:.4} and h={h_fine:.4} ({w_coarse:.3e} -> {w_fine:.3e}); discretization is likely too coarse")]
    DecayViolation {
        h_coarse: f64,
        h_fine: f64,
        w_coarse: f64,
        w_fine: f64,
    },

    #[error("Picard iteration did not converge in {max_iter} iterations (last update {last:.3e}); reduce the boundary-data amplitude")]
    Divergence { max_iter: usize, last: f64 },

    #[error("boundary data violates constraint: {0}")]
    BoundaryData(String),

    #[error("test function is not admissible: {0}")]
    InvalidTestFunction(String),

    #[error("coefficient basis is under-determined: {0}")]
    UnderDetermined(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("serialization error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
