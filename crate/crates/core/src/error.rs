use thiserror::Error;

/// Errors produced by the library and mapped onto CLI exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("non-finite values in {0}")]
    NonFinite(&'static str),
    #[error("degenerate input: {0}")]
    Degenerate(&'static str),
    #[error("energy {energy:.6e} fell below floor {floor:.3e} at iteration {iteration}; the problem appears unbounded below")]
    Unbounded { energy: f64, floor: f64, iteration: usize },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("non-finite quotient at ascent step {iteration}")]
    Ascent { iteration: usize, trace: Vec<(usize, f64)> },
    #[error("malformed snapshot: {0}")]
    Parse(String),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code used by the `sps` binary.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Parse(_) | Error::Json(_) => 2,
            Error::NonFinite(_) | Error::Degenerate(_) | Error::Numerical(_) | Error::Ascent { .. } | Error::Io(_) => 3,
            Error::Unbounded { .. } => 4,
            Error::Verification(_) => 5,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
