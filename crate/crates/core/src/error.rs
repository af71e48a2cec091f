use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum IqcError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("singular evaluation: {0}")]
    Singularity(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    /// A necessary condition of the theorem fails before any SDP is solved.
    #[error("infeasible precondition: {0}")]
    InfeasiblePrecondition(String),
    #[error("structure error: {0}")]
    Structure(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("not certifiable: {0}")]
    NotCertifiable(String),
    #[error("solver error: {0}")]
    Solver(String),
    #[error("trajectory diverged at step {step}")]
    Divergence { step: usize },
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, IqcError>;
