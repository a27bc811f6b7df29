use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid Fock dimension {0} (need at least 2 levels)")]
    InvalidDimension(usize),

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("truncation risk: {what} = {value} exceeds the safe bound {bound} at dim {dim}")]
    TruncationRisk {
        what: &'static str,
        value: f64,
        bound: f64,
        dim: usize,
    },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("two-mode squeezing parameter {0} is not normalizable (need 0 <= lambda < 1)")]
    NonNormalizable(f64),

    #[error("herald never clicks (click probability {0:e})")]
    DegenerateHerald(f64),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("time grid mismatch: {0}")]
    GridMismatch(String),

    #[error("temporal mode is ambiguous: {0}")]
    AmbiguousMode(String),

    #[error("too few measurement phases: {0}")]
    TooFewPhases(String),

    #[error("too few samples: {got} < {needed}")]
    TooFewSamples { got: usize, needed: usize },

    #[error("loss is undefined without a single-photon reference (beta = 0)")]
    UndefinedLoss,

    #[error("0/1 subspace carries only {0:.4} of the weight")]
    UnreliableSubspace(f64),

    #[error("phase-space point ({x}, {p}) lies outside the truncation-safe region")]
    OutsideSafeRegion { x: f64, p: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
