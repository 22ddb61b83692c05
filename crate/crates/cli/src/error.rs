use std::fmt;
use std::io;

/// Process exit codes.
pub const EXIT_IO: i32 = 2;
pub const EXIT_ARGS: i32 = 3;
pub const EXIT_DIVERGED: i32 = 4;

#[derive(Debug)]
pub enum CliError {
    Io(String),
    Args(String),
    Diverged(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Io(_) => EXIT_IO,
            CliError::Args(_) => EXIT_ARGS,
            CliError::Diverged(_) => EXIT_DIVERGED,
        }
    }

    pub fn args(msg: impl Into<String>) -> Self {
        CliError::Args(msg.into())
    }

    pub fn io(context: impl fmt::Display, err: impl fmt::Display) -> Self {
        CliError::Io(format!("{context}: {err}"))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Io(m) | CliError::Args(m) | CliError::Diverged(m) => f.write_str(m),
        }
    }
}

impl From<iadmm::Error> for CliError {
    fn from(err: iadmm::Error) -> Self {
        use iadmm::Error as E;
        let msg = err.to_string();
        match err {
            E::Io(_) | E::Format { .. } => CliError::Io(msg),
            E::InvalidSize { .. } | E::Shape { .. } | E::InvalidArgument(_) | E::UnsupportedVariant => {
                CliError::Args(msg)
            }
            E::Estimation(_) | E::SolveFailed { .. } | E::Divergence { .. } => CliError::Diverged(msg),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(err: io::Error) -> Self {
        CliError::Io(err.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(err: csv::Error) -> Self {
        CliError::Io(err.to_string())
    }
}
