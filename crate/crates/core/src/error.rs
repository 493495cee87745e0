use thiserror::Error;

pub type Result<T> = std::result::Result<T, LabError>;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid damping coefficient: {0}")]
    InvalidDamping(String),

    #[error("invalid damping support: {0}")]
    InvalidSupport(String),

    #[error("structural check not applicable: {0}")]
    NotApplicable(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is singular at pivot {pivot}")]
    Singular { pivot: usize },

    #[error("i·{lambda} lies on the spectrum of the generator (singular shifted operator)")]
    AxisEigenvalue { lambda: f64 },

    #[error("dense eigensolve refused: dimension {dim} exceeds cap {cap}; use resolvent sweeps instead")]
    DenseCapExceeded { dim: usize, cap: usize },

    #[error("non-finite state at step {step}")]
    NonFinite { step: usize },

    #[error("too few samples: need {needed}, have {have}")]
    TooFewSamples { needed: usize, have: usize },

    #[error("non-positive energy in fit window at t = {t}")]
    NonPositiveEnergy { t: f64 },

    #[error("empty spectrum")]
    EmptySpectrum,

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl LabError {
    pub(crate) fn param(name: &str, reason: impl Into<String>) -> Self {
        LabError::InvalidParameter {
            name: name.to_string(),
            reason: reason.into(),
        }
    }
}
