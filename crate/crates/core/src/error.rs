use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An input lies outside the mathematical or physical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// An input lies outside the validity window of an empirical correlation.
    #[error("range error: {0}")]
    Range(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// The Gauss-Newton normal matrix is singular at the evaluated point.
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("initial guess failed: {0}; supply initial parameters manually")]
    GuessFailure(String),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// Short machine-readable category used in `ERROR[<category>]:` prefixes.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Range(_) => "range",
            Error::Validation(_) => "validation",
            Error::Parse { .. } => "parse",
            Error::DegenerateFit(_) => "fit",
            Error::GuessFailure(_) => "guess",
            Error::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Domain(msg()))
    }
}
