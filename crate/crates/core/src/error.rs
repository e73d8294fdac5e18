use thiserror::Error;

/// Errors raised anywhere in the estimation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("SVD of a {rows}x{cols} matrix did not converge")]
    SvdNoConvergence { rows: usize, cols: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("system matrix is not stable: operator norm {0} >= 1")]
    Unstable(f64),

    #[error("matrix is not symmetric positive definite")]
    NotPositiveDefinite,

    #[error("operator would need {requested} bytes, budget is {budget} bytes")]
    MemoryBudget { requested: u64, budget: u64 },

    #[error("objective became non-finite at iteration {0}; use a smaller step size")]
    Diverged(usize),

    #[error("malformed file: {0}")]
    Format(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("plot: {0}")]
    Plot(String),
}

pub type Result<T> = std::result::Result<T, Error>;
