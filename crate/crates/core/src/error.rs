use std::path::PathBuf;

use thiserror::Error;

use crate::classifier::SvmModel;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("Hilbert dimension {local_dim}^{n} exceeds the configured cap of {cap}")]
    DimensionCap { n: usize, local_dim: usize, cap: usize },

    #[error("bad local term: {0}")]
    BadTerm(String),

    #[error("iterative eigensolver did not converge after {iterations} iterations (residual {residual:e})")]
    ConvergenceFailure { iterations: usize, residual: f64 },

    #[error("operation requires qubits, got local dimension {0}")]
    UnsupportedLocalDim(usize),

    #[error("subsystem of {size} sites exceeds the cap of {cap}")]
    SubsystemTooLarge { size: usize, cap: usize },

    #[error("invalid subsystem: {0}")]
    InvalidSubsystem(String),

    #[error("classical shadow has no snapshots")]
    EmptyShadow,

    #[error("malformed shadow header: {0}")]
    MalformedHeader(String),

    #[error("truncated shadow payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },

    #[error("invalid snapshot symbol byte {0}")]
    InvalidSymbol(u8),

    #[error("wavevector count for m={m}, cutoff={cutoff} may reach the bound (2m+1)^(cutoff^2) = {bound:e}, above the cap of {cap}")]
    CountCapExceeded {
        m: usize,
        cutoff: f64,
        bound: f64,
        cap: usize,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("shadow shapes differ: ({0} qubits, {1} snapshots) vs ({2} qubits, {3} snapshots)")]
    ShapeMismatch(usize, usize, usize, usize),

    #[error("excluding equal snapshot indices needs at least two snapshots")]
    NeedTwoSnapshots,

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("Gram matrix has a nonpositive diagonal entry at index {0}")]
    NonpositiveDiagonal(usize),

    #[error("kernel {0} cannot be used here")]
    UnsupportedKernel(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parameter vector component {index} = {value} lies outside [-1, 1]")]
    OutOfBox { index: usize, value: f64 },

    #[error("K + lambda I is numerically singular (lambda = {lambda})")]
    FactorizationFailure { lambda: f64 },

    #[error("SVM training stopped at {} iterations with training error {}", .best.iterations, .best.training_error)]
    NotConverged { best: Box<SvmModel> },

    #[error("embedding is degenerate: all points coincide")]
    DegenerateEmbedding,

    #[error("Gram matrix must be standardized")]
    NotStandardized,

    #[error("chain of {n} sites is too short (need at least {min})")]
    ChainTooShort { n: usize, min: usize },

    #[error("correlator sites must differ (got {0} twice)")]
    SameSite(usize),

    #[error("reflection intervals must be adjacent and of equal length")]
    NonAdjacent,

    #[error("twist window for ell={ell} does not fit in {n} sites")]
    IntervalOutOfRange { ell: usize, n: usize },

    #[error("twist operator needs spin-1 sites (local dimension 3), got {0}")]
    WrongLocalDim(usize),

    #[error("config error: {0}")]
    Config(String),

    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
