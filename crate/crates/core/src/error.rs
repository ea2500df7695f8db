use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: expected {expected}, got {got}")]
    Dimension {
        op: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("set is empty")]
    EmptySet,

    #[error("LP solver failure: {0}")]
    SolverFailure(String),

    #[error("{what} has {count} binary factors, above the cap of {cap}")]
    ResourceCap {
        what: &'static str,
        count: usize,
        cap: usize,
    },

    #[error("estimate became empty at step {step}: model and measurement are inconsistent")]
    Inconsistent { step: usize },

    #[error("error bound is sampled, not certified (eps = {eps}); pass an override to use it")]
    Uncertified { eps: f64 },

    #[error("training diverged: {0}")]
    Training(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn dim(op: &'static str, expected: usize, got: usize) -> Self {
        Error::Dimension { op, expected, got }
    }
}
