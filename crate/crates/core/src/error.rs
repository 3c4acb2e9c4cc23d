use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("mode set must declare at least one mode")]
    EmptyModeSet,

    #[error("mode {0} declared twice")]
    DuplicateMode(String),

    #[error("mode {0} is not declared in the mode set")]
    UndeclaredMode(String),

    #[error("operands live on different mode sets")]
    ModeSetMismatch,

    #[error("transform columns are not orthonormal (max deviation {0:e})")]
    NotIsometric(f64),

    #[error("loss mode {0} collides with an occupied or acted-on mode")]
    LossModeCollision(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown detector `{0}`")]
    UnknownDetector(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("malformed scan record: {0}")]
    Record(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
