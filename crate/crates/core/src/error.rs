use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("precondition violated: {message}")]
    Precondition { message: String, evidence: Vec<String> },

    #[error("numeric failure at {location}: {message}")]
    Numeric { message: String, location: String },

    #[error("enumeration of {atoms} atoms exceeds the cap of {cap}; use Monte Carlo instead")]
    Resource { atoms: u128, cap: u128 },

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn arg<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Argument(msg.into()))
}
