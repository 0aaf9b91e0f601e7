use thiserror::Error;

/// Errors raised across the library.
///
/// Variants map onto the CLI exit codes: `Domain`, `Config`, `Rank` and
/// `Size` are usage problems (exit 2), `Io` is exit 3 and `Numeric` is
/// exit 4.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("rank error: {0}")]
    Rank(String),

    #[error("size error: {0}")]
    Size(String),

    #[error("numeric non-convergence: {0}")]
    Numeric(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}

impl Error {
    /// Process exit code for the `ew` binary.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) => 3,
            Error::Numeric(_) => 4,
            _ => 2,
        }
    }
}
