use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("no feasible starting point found: {0}")]
    FeasibilityPhaseFailed(String),
    #[error("conic solver failed at iteration {iteration}: {status}")]
    SolverFailure { iteration: usize, status: String, trace: Vec<f64> },
    #[error("config error at line {line}: {msg}")]
    Config { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
