use std::fmt;
use std::io;

/// Harness-level error, split by exit code: validation problems (bad
/// flags, malformed config, missing files) exit 1, numerical failures
/// inside a fit exit 2.
#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Numeric(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(msg) => write!(f, "{msg}"),
            CliError::Numeric(msg) => write!(f, "numerical failure: {msg}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<pcl_core::Error> for CliError {
    fn from(e: pcl_core::Error) -> Self {
        match e {
            pcl_core::Error::InvalidArgument(msg) => CliError::Validation(msg),
            other => CliError::Numeric(other.to_string()),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Validation(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub(crate) fn validation(msg: impl fmt::Display) -> CliError {
    CliError::Validation(msg.to_string())
}
