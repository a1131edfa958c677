use thiserror::Error;

/// Errors raised across the library. The CLI maps each variant to an exit code.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid construction: {0}")]
    Construction(String),

    #[error("multiplicity error: {found} eigenvalue(s) in window ({lo}, {hi}) for sector m = {m}")]
    Multiplicity { m: i64, found: usize, lo: f64, hi: f64 },

    #[error("no convergence: {0}")]
    Convergence(String),

    #[error("singular structure: {0}")]
    Structure(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("malformed input: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code: 2 for validation failures, 3 for solver failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain(_)
            | Error::Precondition(_)
            | Error::Construction(_)
            | Error::Json(_)
            | Error::Io(_) => 2,
            Error::Multiplicity { .. }
            | Error::Convergence(_)
            | Error::Structure(_)
            | Error::Infeasible(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
