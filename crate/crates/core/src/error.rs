use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid distribution spec: {0}")]
    InvalidSpec(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    /// Exhaustive enumeration would visit more candidates than allowed.
    #[error("enumeration of {count} candidates exceeds the cap of {cap}; {hint}")]
    TooLarge {
        count: f64,
        cap: u64,
        hint: &'static str,
    },

    /// A bound was queried outside the range where its premises hold.
    #[error("domain violation: {0}")]
    Domain(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    /// The solver stopped early; `best` is the last iterate it produced.
    #[error("solver did not converge ({reason})")]
    NonConvergence { reason: String, best: Vec<f64> },

    #[error("configuration field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn arg<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Argument(msg.into()))
}
