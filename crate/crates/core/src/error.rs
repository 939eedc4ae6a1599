use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("matrix is not Hermitian (max asymmetry {0:e})")]
    NotHermitian(f64),

    #[error("row {row} is not stochastic (row sum {sum}, min entry {min_entry})")]
    NotStochastic { row: usize, sum: f64, min_entry: f64 },

    #[error("node {0} has no incident weight")]
    IsolatedNode(usize),

    #[error("chain is reducible: nodes {0:?} are not mutually reachable with node 0")]
    Reducible(Vec<usize>),

    #[error("chain is not reversible (detailed balance residual {0:e})")]
    NotReversible(f64),

    #[error("chain has no unique stationary distribution")]
    NoUniqueStationary,

    #[error("eigensolver failed to converge (residual {0:e})")]
    Eigensolver(f64),

    #[error("singular linear system")]
    Singular,

    #[error("operator is not an orthogonal projector (residual {0:e})")]
    NotProjector(f64),

    #[error("ancilla grid too coarse: need at least {required} points")]
    GridTooCoarse { required: usize },

    #[error("post-selection probability {0:e} is degenerate")]
    DegeneratePostSelection(f64),

    #[error("invariant violated: {what} (residual {residual:e})")]
    Invariant { what: String, residual: f64 },

    #[error(
        "n = {n} exceeds the full-space simulation cap of {cap} nodes; \
         use the bound-based path (`fastforward` / `scaling`, or expected_bound_over_schedule)"
    )]
    TooLarge { n: usize, cap: usize },

    #[error("initial state has no overlap with the ground space")]
    NoGroundOverlap,

    #[error("negative probability {0:e}")]
    NegativeProbability(f64),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
