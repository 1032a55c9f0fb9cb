use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("episode budget exhausted: {used} used + {requested} requested exceeds cap {cap}")]
    BudgetExhausted {
        used: usize,
        requested: usize,
        cap: usize,
    },

    #[error("ill-posed cost: {0}")]
    IllPosedCost(String),

    #[error("no stabilizing Riccati solution after {iterations} iterations (residual {residual:e})")]
    NoStabilizingSolution { iterations: usize, residual: f64 },

    #[error("closed loop is unstable (spectral radius {0})")]
    Unstable(f64),

    #[error("insufficient excitation: {0}")]
    InsufficientExcitation(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("greedy policy cannot be extracted: {0}")]
    NonExtractablePolicy(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
