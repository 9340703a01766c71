use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{0} is outside the supported domain")]
    Domain(String),

    #[error("enumeration length {requested} exceeds the cap {cap}")]
    EnumerationCap { requested: u32, cap: u32 },

    #[error("profile window is clipped: {0}")]
    ClippedProfile(String),

    #[error("goodness-of-fit refused: {0}")]
    GoodnessOfFit(String),

    #[error("linear solve failed: {0}")]
    Solve(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
