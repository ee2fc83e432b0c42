use thiserror::Error;

/// Errors raised by kernel construction, likelihood evaluation, the solvers
/// and dataset handling.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter `{name}` = {value} is outside its domain ({domain})")]
    ParamOutOfDomain {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("dimension mismatch: expected {expected}, got {got} ({what})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("partial derivative w.r.t. `{name}` is undefined at the boundary value 0")]
    DerivativeUndefined { name: &'static str },

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("insufficient data: record length {len} must exceed model order {order}")]
    InsufficientData { len: usize, order: usize },

    #[error("Cholesky factorization of {0} failed")]
    FactorizationFailure(&'static str),

    #[error("non-finite value in {0}")]
    NonFiniteValue(&'static str),

    #[error("Hessian requires the factor cache of a nonzero-prior evaluation")]
    CacheMissing,

    #[error("could not draw a usable system after {0} attempts")]
    UnstableSystem(usize),

    #[error("true impulse response is constant; fit is undefined")]
    DegenerateTruth,

    #[error("invalid bounds at index {index}: lower {lower} must be < upper {upper}")]
    InvalidBounds { index: usize, lower: f64, upper: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
