use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("outcome has probability {0:.3e}, below the observability cutoff")]
    ZeroProbabilityOutcome(f64),
    #[error("gate is not unitary (deviation {0:.3e})")]
    NonUnitaryGate(f64),
    #[error("size mismatch: {0}")]
    SizeMismatch(String),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid probability {0}")]
    InvalidProbability(f64),
    #[error("too large to enumerate: {0}")]
    TooLargeToEnumerate(String),
    #[error("too large: {0}")]
    TooLarge(String),
    #[error("unsupported size: {0}")]
    UnsupportedSize(String),
    #[error("zero gap{}", .0.as_ref().map(|s| format!(" ({s})")).unwrap_or_default())]
    ZeroGap(Option<String>),
    #[error("ground space is {}-fold degenerate", .basis.len())]
    DegenerateGroundSpace {
        energy: f64,
        /// Orthonormal basis of the ground space.
        basis: Vec<crate::qstate::PureState>,
        /// Physically distinguished states spanning the same space (for the
        /// Majumdar-Ghosh point, the two dimer coverings); otherwise `basis`.
        representatives: Vec<crate::qstate::PureState>,
    },
    #[error("invalid geometry: {0}")]
    GeometryInvalid(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("eigensolver did not converge: {0}")]
    NoConvergence(String),
    #[error("config error at `{path}`: {msg}")]
    Config { path: String, msg: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
