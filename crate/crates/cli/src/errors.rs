use anyhow::Error;

/// Failures split by who has to fix them: the caller (bad flags, bad files,
/// impossible requests) or us (violated invariants).
#[derive(Debug)]
pub enum CliError {
    Validation(Error),
    Internal(Error),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Internal(_) => 2,
        }
    }

    pub fn inner(&self) -> &Error {
        match self {
            CliError::Validation(e) | CliError::Internal(e) => e,
        }
    }
}

/// Shorthand for `return Err(CliError::Validation(anyhow!(...)))`.
macro_rules! bail_invalid {
    ($($arg:tt)*) => {
        return Err(crate::errors::CliError::Validation(anyhow::anyhow!($($arg)*)))
    };
}

pub(crate) use bail_invalid;
