use thiserror::Error;

/// Errors surfaced by solvers, simulators and the archive pipeline.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A parameter or configuration value failed validation.
    #[error("invalid parameter: {0}")]
    Validation(String),
    /// An argument lies outside the domain an operation is defined on.
    #[error("out of domain: {0}")]
    Domain(String),
    /// The requested computation is not defined for this configuration.
    #[error("unsupported configuration: {0}")]
    Unsupported(String),
    /// A root bracket failed its sign conditions.
    #[error("interior regime violated: {0}")]
    Bracket(String),
    /// A price archive was rejected as a whole.
    #[error("archive rejected: {0}")]
    Archive(String),
}

pub type Result<T> = std::result::Result<T, Error>;
