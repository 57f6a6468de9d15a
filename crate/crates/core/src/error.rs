use crate::dsl::{EvalError, FieldError, ParseError};
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("evaluation failed: {0}")]
    Eval(#[from] EvalError),
    #[error("{0}")]
    Validation(String),
    #[error("{count} non-finite values of {what}")]
    NonFinite { what: String, count: usize },
    #[error("stiffness precondition violated: dt = {dt:e} exceeds alpha^2/20 = {limit:e}")]
    Stiffness { dt: f64, limit: f64 },
    #[error("path exploded at step {step} ({context})")]
    Explosion { step: usize, context: String },
    #[error("exploded fraction {fraction:.4} exceeds the 5% cap at eps = {eps:e}")]
    ExplosionCap { eps: f64, fraction: f64 },
    #[error("centering violation ({level}): residual {residual:e} exceeds tolerance {tol:e}")]
    CenteringViolation { level: String, residual: f64, tol: f64 },
    #[error("boundary-unclassifiable: {0}")]
    BoundaryUnclassifiable(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("need >= 3 points for a rate fit, got {found}")]
    InsufficientPoints { found: usize },
    #[error("error value at row {index} is not positive ({value:e})")]
    NonPositiveError { index: usize, value: f64 },
    #[error("missing component for {tag}: {what}")]
    MissingComponent { tag: String, what: String },
    #[error("matrix is not positive semidefinite: clamped mass {clamped:e} of {total:e}")]
    NotPsd { clamped: f64, total: f64 },
    #[error("regime mismatch: expected {expected}, classifier says {found}")]
    RegimeMismatch { expected: String, found: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    /// Process exit code: 1 for invalid input, 2 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse(_)
            | Error::Field(_)
            | Error::Validation(_)
            | Error::Stiffness { .. }
            | Error::BoundaryUnclassifiable(_)
            | Error::RegimeMismatch { .. }
            | Error::Config(_)
            | Error::InsufficientPoints { .. }
            | Error::MissingComponent { .. }
            | Error::GridMismatch(_) => 1,
            Error::Eval(_)
            | Error::NonFinite { .. }
            | Error::Explosion { .. }
            | Error::ExplosionCap { .. }
            | Error::CenteringViolation { .. }
            | Error::NonPositiveError { .. }
            | Error::NotPsd { .. }
            | Error::Io(_) => 2,
        }
    }

    /// Short machine-readable tag used in `errors.csv`.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parse(_) => "parse",
            Error::Field(_) => "field",
            Error::Eval(_) => "eval",
            Error::Validation(_) => "validation",
            Error::NonFinite { .. } => "non-finite",
            Error::Stiffness { .. } => "stiffness",
            Error::Explosion { .. } => "explosion",
            Error::ExplosionCap { .. } => "explosion-cap",
            Error::CenteringViolation { .. } => "centering-violation",
            Error::BoundaryUnclassifiable(_) => "boundary-unclassifiable",
            Error::GridMismatch(_) => "grid-mismatch",
            Error::InsufficientPoints { .. } => "insufficient-points",
            Error::NonPositiveError { .. } => "nonpositive-error",
            Error::MissingComponent { .. } => "missing-component",
            Error::NotPsd { .. } => "not-psd",
            Error::RegimeMismatch { .. } => "regime-mismatch",
            Error::Io(_) => "io",
            Error::Config(_) => "config",
        }
    }
}
