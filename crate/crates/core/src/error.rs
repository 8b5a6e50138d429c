use thiserror::Error;

/// Errors produced by table handling, distributions, synthesis and metrics.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("row {row}, column `{column}`: {message}")]
    Record {
        row: usize,
        column: String,
        message: String,
    },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("tables are not aligned: {0}")]
    Alignment(String),

    #[error("arithmetic overflow: {0}")]
    Overflow(String),

    #[error("infeasible request: {0}")]
    Infeasible(String),

    #[error("{routine} did not converge after {iterations} iterations")]
    Convergence {
        routine: &'static str,
        iterations: usize,
    },

    #[error("target {target} is outside the attainable range [{low}, {high}]")]
    Unattainable { target: f64, low: f64, high: f64 },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn param_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Parameter(msg.into()))
}
