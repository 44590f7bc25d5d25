use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("rejection sampling failed after {attempts} attempts: {reason}")]
    SamplingFailed { attempts: usize, reason: String },

    #[error("shape '{shape}' has no points tagged {role}")]
    MissingRole { shape: String, role: &'static str },

    #[error("point at radial distance {radial:.6e} m lies outside tube of radius {radius:.6e} m")]
    OutsideTube { radial: f64, radius: f64 },

    #[error("point {index} of shape '{shape}' is not covered by any centerline segment")]
    Unassignable { shape: String, index: usize },

    #[error("requested {requested} selections but only {available} candidates are available")]
    NotEnoughCandidates { requested: usize, available: usize },

    #[error("field length {field} does not match point count {points}")]
    LengthMismatch { field: usize, points: usize },

    #[error("non-finite loss at step {step} (shape '{shape_id}')")]
    NonFiniteLoss { step: usize, shape_id: String },

    #[error("ground-truth field is identically zero; approximation disparity undefined")]
    ZeroDenominator,

    #[error("rank correlation undefined for constant input")]
    ConstantInput,

    #[error("id '{0}' missing from distance matrix")]
    UnknownId(String),

    #[error("empty point set")]
    EmptyPointSet,

    #[error("malformed {format} data: {reason}")]
    Format { format: &'static str, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
