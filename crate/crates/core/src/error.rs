use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("eigensolver did not converge")]
    NoConvergence,

    #[error("matrix is not positive semidefinite (min eigenvalue {0:e})")]
    NotPsd(f64),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("unknown subsystem label `{0}`")]
    UnknownLabel(String),

    #[error("invalid subsystem layout: {0}")]
    InvalidLayout(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("total dimension {dim} exceeds the cap {cap}")]
    DimensionCap { dim: usize, cap: usize },

    #[error("antisymmetric subspace is empty: {copies} copies of C^{dim}")]
    TooManyCopies { dim: usize, copies: usize },

    #[error("Markov block mismatch: {0}")]
    BlockMismatch(String),

    #[error("state is not symmetric under exchange of B factors (deviation {0:e})")]
    NotSymmetric(f64),

    #[error("label sets overlap: `{0}`")]
    OverlappingLabels(String),

    #[error("map is not trace preserving (deviation {0:e})")]
    NotTracePreserving(f64),

    #[error("symmetrization over {0} factors is not supported (max 8)")]
    TooManyFactors(usize),

    #[error("argument outside its domain: {0}")]
    DomainError(String),

    #[error("decomposition does not reproduce the state: {0}")]
    BadDecomposition(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed document: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
