use thiserror::Error;

/// Errors produced by the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid cone: {0}")]
    InvalidCone(String),

    #[error("empty slab: no lattice points with e1 in [{lo}, {hi}]")]
    EmptySlab { lo: String, hi: String },

    #[error("slab bounds out of order: lo = {lo} > hi = {hi}")]
    SlabOrder { lo: String, hi: String },

    #[error("unbounded slab: {0}")]
    UnboundedSlab(String),

    #[error("non-simplicial cone in dimension {0} is not supported")]
    NonSimplicial(usize),

    #[error("invalid window: {0}")]
    InvalidWindow(String),

    #[error("element {a:?} is not transversely hyperbolic: {detail}")]
    NotHyperbolic { a: Vec<i64>, detail: String },

    #[error("eigen-decomposition failed: {0}")]
    Eigen(String),

    #[error("degenerate action: {0}")]
    Degenerate(String),

    #[error("iteration did not converge: {0}")]
    NonConvergence(String),

    #[error("budget exceeded: {0}")]
    Budget(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
