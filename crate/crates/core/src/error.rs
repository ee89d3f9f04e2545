use thiserror::Error;

/// Errors raised across the modelling, inference and calibration pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("model is invalid: {}", .0.join("; "))]
    InvalidModel(Vec<String>),

    #[error("reaction index {index} out of range (model has {count} reactions)")]
    ReactionIndex { index: usize, count: usize },

    #[error("syntax error at offset {position}: {message}")]
    Syntax { position: usize, message: String },

    #[error("unbound identifier `{0}` in formula")]
    UnboundIdentifier(String),

    #[error("formula needs a horizon of {required} but the trajectory only covers {available}")]
    HorizonTooShort { required: f64, available: f64 },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("Cholesky factorization failed: {0}")]
    Factorization(String),

    #[error("non-finite objective: {0}")]
    NonFinite(String),

    #[error("degenerate normalizer: posterior std is zero at calibration point {0}")]
    DegenerateNormalizer(usize),

    #[error("trials mismatch: calibration uses {calibration} trials per point but training used {training}")]
    TrialsMismatch { calibration: u32, training: u32 },

    #[error("empty dataset")]
    EmptyDataset,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
