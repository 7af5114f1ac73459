use thiserror::Error;

/// Errors produced by the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid covariance matrix: {reason} (min eigenvalue {min_eig:.3e})")]
    InvalidCovariance { reason: String, min_eig: f64 },

    #[error("matrix is not symplectic (residual {residual:.3e})")]
    NotSymplectic { residual: f64 },

    #[error("matrix is not unitary (residual {residual:.3e})")]
    NotUnitary { residual: f64 },

    #[error("matrix is not positive definite (min eigenvalue {min_eig:.3e})")]
    NotPositiveDefinite { min_eig: f64 },

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eig:.3e})")]
    NotPositiveSemidefinite { min_eig: f64 },

    #[error("covariance is not pure (max |nu - 1| = {deviation:.3e})")]
    NotPure { deviation: f64 },

    #[error("parameter out of range: {0}")]
    OutOfRange(String),

    #[error("hafnian size {size} exceeds configured maximum {max}{}", context.as_deref().map(|c| format!(" ({c})")).unwrap_or_default())]
    HafnianTooLarge { size: usize, max: usize, context: Option<String> },

    #[error("oracle scale exceeded: {0}")]
    OracleScale(String),

    #[error("integer overflow: {0}")]
    Overflow(String),

    #[error("solver did not converge after {iterations} iterations ({detail})")]
    NonConvergence { iterations: usize, detail: String },

    #[error("conditional probability mass {mass:.3e} at mode {mode} is below threshold (local cutoff too small)")]
    CutoffStarvation { mode: usize, mass: f64 },

    #[error("no samples in photon sector {0}")]
    EmptySector(usize),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("stage '{stage}' failed: {source}")]
    Stage { stage: String, source: Box<Error> },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Stage { source, .. } => source.exit_code(),
            Error::NonConvergence { .. } | Error::CutoffStarvation { .. } => 3,
            Error::HafnianTooLarge { .. } | Error::OracleScale(_) | Error::Overflow(_) => 4,
            Error::Io(_) => 1,
            _ => 2,
        }
    }
}
