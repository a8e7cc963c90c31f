use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Io(_) => 2,
            CliError::Config(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }
}

/// Argument errors from the library stem from configured values; resource and
/// numeric errors surface as numeric failures.
impl From<nts_core::Error> for CliError {
    fn from(e: nts_core::Error) -> Self {
        match e {
            nts_core::Error::Argument(m) => CliError::Config(m),
            nts_core::Error::Resource(m) | nts_core::Error::Numeric(m) => CliError::Numeric(m),
        }
    }
}
