use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("sequence must hold at least {min} values, got {got}")]
    TooShort { min: usize, got: usize },
    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },
    #[error("values not strictly increasing at index {index}: {prev} >= {next}")]
    NonMonotone { index: usize, prev: f64, next: f64 },
    #[error("negative ground value {0}")]
    NegativeGround(f64),
    #[error("scale must be positive, got {0}")]
    BadScale(f64),
    #[error("factorial product overflows at index {index}; use the log-domain accessor")]
    Overflow { index: usize },

    #[error("index out of range: sector {sector} level {level} in {sectors}x{dim} space")]
    IndexOutOfRange {
        sector: usize,
        level: usize,
        sectors: usize,
        dim: usize,
    },
    #[error("invalid sector space: {0}")]
    BadSpace(String),
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("regime error: {0}")]
    RegimeError(String),
    #[error("deformation parameter q must lie in (0, 1], got {0}")]
    BadDeformation(f64),
    #[error("superpotential derivative not positive at x = {x} (W' = {derivative})")]
    NonPositiveDerivative { x: f64, derivative: f64 },
    #[error("invalid grid: {0}")]
    BadGrid(String),
    #[error("operator is not hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("J = {j} lies outside the convergence disc of radius {radius}")]
    OutOfDisc { j: f64, radius: f64 },
    #[error("truncated tail bound {bound:e} exceeds {limit:e}")]
    TailTooLarge { bound: f64, limit: f64 },
    #[error("spectra are not essentially disjoint: collision at ({n}, {m}) with gap {gap:e}")]
    NotEds { n: usize, m: usize, gap: f64 },
    #[error("delta must be strictly positive, got {0}")]
    NonPositiveDelta(f64),
    #[error("invalid parameter: {0}")]
    BadParameter(String),

    #[error("weight cannot be verified: {0}")]
    UnverifiableWeight(String),
    #[error("moment check failed at order {order}: relative error {error:e}")]
    MomentMismatch { order: usize, error: f64 },

    #[error("intertwining hypothesis violated: {what} (residual {residual:e})")]
    HypothesisViolated { what: String, residual: f64 },
    #[error("closed form mismatch in {what}: deviation {deviation:e} at level {level}")]
    ClosedFormMismatch { what: String, deviation: f64, level: usize },

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
