use thiserror::Error;

/// Errors raised by the geometry, detector and evaluation layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("non-finite value in numeric input")]
    NonFinite,
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not symmetric: |a[{i}][{j}] - a[{j}][{i}]| = {gap:e}")]
    NotSymmetric { i: usize, j: usize, gap: f64 },
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("matrix is ill-conditioned: smallest/largest eigenvalue = {ratio:e}")]
    IllConditioned { ratio: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("metric mismatch between log-images")]
    MetricMismatch,
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("degenerate window starting at index {start}: correlation matrix not SPD after jitter {jitter:e}")]
    DegenerateWindow { start: usize, jitter: f64 },
    #[error("detector history too short to score ({have} < {need})")]
    NotReady { have: usize, need: usize },
    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
