use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("agents {i} and {j} are coincident")]
    Coincident { i: usize, j: usize },

    #[error("coincident positions at ({x}, {y})")]
    CoincidentPositions { x: f64, y: f64 },

    #[error("robot at ({x}, {y}) is on or inside obstacle {obstacle}")]
    InsideObstacle { obstacle: usize, x: f64, y: f64 },

    #[error("non-finite state at step {step}")]
    NonFinite { step: usize },

    #[error("scenario rejected ({}): {detail}", .reason.code())]
    Rejected {
        reason: crate::scenario::RejectReason,
        detail: String,
    },

    #[error("trace format: {0}")]
    TraceFormat(String),

    #[error("empty trace")]
    EmptyTrace,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}
