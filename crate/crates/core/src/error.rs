use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid mismatch: operands live on different torus grids")]
    GridMismatch,
    #[error("field is not divergence-free")]
    NotDivergenceFree,
    #[error("stress modulus alpha must be nonnegative, got {0}")]
    NegativeAlpha(f64),
    #[error("time {t} lies outside the horizon [0, {horizon}]")]
    OutsideHorizon { t: f64, horizon: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("non-finite state at t = {t} (step {step}): {detail}")]
    BlowUp { t: f64, step: usize, detail: String },
    #[error("trajectory has no stored field snapshots (or they are decimated)")]
    MissingSnapshots,
    #[error("config error at line {line}, column {column}: {message}")]
    Config {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("snapshot format: {0}")]
    Snapshot(String),
    #[error("sweep failed: {0}")]
    Sweep(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
