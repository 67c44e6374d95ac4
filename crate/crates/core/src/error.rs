use thiserror::Error;

/// Errors produced by the tomography library.
#[derive(Debug, Error)]
pub enum TomoError {
    #[error("invalid qubit state: |s|^2 = {norm_sq} exceeds 1")]
    InvalidState { norm_sq: f64 },

    #[error("non-finite value in {what}")]
    NonFinite { what: &'static str },

    #[error("invalid sphere coordinate: {0}")]
    InvalidSphereCoord(String),

    #[error("invalid POVM: {0}")]
    InvalidPovm(String),

    #[error("invalid measurement axis: {0}")]
    InvalidAxis(String),

    #[error("invalid noise model: {0}")]
    InvalidNoise(String),

    #[error("degenerate noise model: outcome probabilities have zero normalization")]
    DegenerateModel,

    #[error("outcome count length {got} does not match {expected} outcomes")]
    OutcomeMismatch { expected: usize, got: usize },

    #[error("invalid count: {0}")]
    InvalidCount(String),

    #[error("empty selection: no samples inside the slab")]
    EmptySelection,

    #[error(
        "particle filter degenerated at measurement {step}: every particle has zero likelihood; \
         restart with more particles or a noise floor"
    )]
    FilterDegenerate { step: u64 },

    #[error("pilot estimation failed: {0}")]
    EstimationFailed(String),

    #[error("power-law fit: {0}")]
    Fit(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("snapshot: {0}")]
    Snapshot(String),

    #[error("run {run} failed at measurement {step}: {message}")]
    RunFailed {
        run: usize,
        step: u64,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = TomoError> = std::result::Result<T, E>;
