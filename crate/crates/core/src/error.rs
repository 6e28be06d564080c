//! Error type shared by every module of the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// The framework references joints or labels that do not exist.
    #[error("structural error: {0}")]
    Structural(String),

    /// A caller supplied an invalid argument (bad parameter, empty input).
    #[error("argument error: {0}")]
    Argument(String),

    /// An input lies outside the admissible range of a gadget or driver.
    #[error("range error: {0}")]
    Range(String),

    /// A forward placement has no real solution. This signals a bug in a
    /// construction rather than a user mistake.
    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("no certificate: {0}")]
    NoCertificate(String),

    #[error("approximation error: {0}")]
    Approximation(String),

    #[error("newton projection diverged: {0}")]
    Divergence(String),

    #[error("parse error at line {line}, column {col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
