use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("input error: {0}")]
    Input(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Divergence { epoch: usize, loss: f64 },

    #[error("stale pool-gradient cache: max deviation {deviation:e}")]
    StaleCache { deviation: f64 },

    #[error("approximation ratio undefined: set-level change is zero")]
    RatioUndefined,

    #[error("kendall tau undefined: {0}")]
    TauUndefined(String),

    #[error("aggregation error: {0}")]
    Aggregation(String),

    #[error("run error: {0}")]
    Run(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
