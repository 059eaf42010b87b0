//! Error type shared by all modules of the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by matrix construction, pricing, simulation and estimation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not symmetric: relative asymmetry {asymmetry:.3e} exceeds tolerance {tol:.3e}")]
    NotSymmetric { asymmetry: f64, tol: f64 },

    #[error("matrix is indefinite: min eigenvalue {min_eig:.3e} below -{tol:.3e}")]
    IndefiniteInput { min_eig: f64, tol: f64 },

    #[error("matrix is zero: cannot form an inverse factor")]
    ZeroMatrix,

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("projector basis contains only zero vectors")]
    ZeroBasis,

    #[error("basis vector {index} is not in the kernel: |Sigma v| = {residual:.3e} exceeds {tol:.3e}")]
    NotInKernel {
        index: usize,
        residual: f64,
        tol: f64,
    },

    #[error("instrument {id} is expired at t = {t} (maturity {maturity})")]
    ExpiredInstrument { id: String, t: f64, maturity: f64 },

    #[error("instrument {id} has non-positive implied volatility {vol:.6} at the given state")]
    NegativeVol { id: String, vol: f64 },

    #[error("invalid instrument {id}: {reason}")]
    InvalidInstrument { id: String, reason: String },

    #[error("invalid universe: {0}")]
    InvalidUniverse(String),

    #[error("finite-difference repricing failed for {id}: {source}")]
    FiniteDifferenceFailure {
        id: String,
        #[source]
        source: Box<Error>,
    },

    #[error("factor loading matrix is rank deficient: numerical rank {rank} < {factors} factors")]
    RankDeficientLoadings { rank: usize, factors: usize },

    #[error("universe unsupported by model {model}: {reason}")]
    UnsupportedUniverse { model: String, reason: String },

    #[error("non-positive aggregated liquidity: {0}")]
    NonPositiveLiquidity(String),

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("simulation state invalid at bar {bar}: {source}")]
    StateInvalid {
        bar: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("insufficient data: {got} bars, need at least {need}")]
    InsufficientData { got: usize, need: usize },

    #[error("bar columns do not match universe: {0}")]
    ColumnMismatch(String),

    #[error("volatility surface fit failed at bar {bar}: {source}")]
    SurfaceFitFailure {
        bar: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("observables are missing the {0} coordinate")]
    MissingCoordinate(String),

    #[error("generalized R^2 denominator is zero under the supplied weight matrix")]
    ZeroDenominator,

    #[error("degenerate flow: var(u^T flow) = {0:.3e}")]
    DegenerateFlow(f64),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("malformed input file {path}: {reason}")]
    MalformedFile { path: String, reason: String },
}

impl Error {
    /// True for failures of numerical preconditions rather than I/O or format
    /// problems; the CLI maps these to a dedicated exit code.
    pub fn is_numerical(&self) -> bool {
        !matches!(
            self,
            Error::Io(_) | Error::Csv(_) | Error::Json(_) | Error::MalformedFile { .. }
        )
    }
}
