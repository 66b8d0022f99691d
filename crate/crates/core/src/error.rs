use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),

    /// No increment equals zero, so the intensity estimate is undefined.
    #[error("no zero increments in sample of size {n}")]
    NoZeroIncrements { n: usize },

    /// Consecutive ECF values too far apart to unwrap, even after refinement.
    #[error("phase step too large at xi = {xi} (|ratio - 1| = {gap})")]
    PhaseStepTooLarge { xi: f64, gap: f64 },

    #[error("ECF vanishes at xi = {xi}")]
    VanishingEcf { xi: f64 },

    #[error("insufficient points: need at least {need} distinct, got {got}")]
    InsufficientPoints { need: usize, got: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short tag used in the CLI's one-line error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::GridTooCoarse(_) => "grid_too_coarse",
            Error::NoZeroIncrements { .. } => "no_zero_increments",
            Error::PhaseStepTooLarge { .. } => "phase_step_too_large",
            Error::VanishingEcf { .. } => "vanishing_ecf",
            Error::InsufficientPoints { .. } => "insufficient_points",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
