use std::fmt;
use std::path::Path;

/// Process exit codes. Stable; documented in the README and `--help`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum ExitCode {
    Usage = 2,
    Input = 3,
    Output = 4,
    Divergence = 5,
    NotConverged = 6,
    MissingBackground = 7,
    ShapeMismatch = 8,
}

#[derive(Debug)]
pub struct CliError {
    pub code: ExitCode,
    pub message: String,
}

impl CliError {
    pub fn new(code: ExitCode, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self::new(ExitCode::Usage, message)
    }

    pub fn output(path: &Path, err: impl fmt::Display) -> Self {
        Self::new(ExitCode::Output, format!("cannot write {}: {err}", path.display()))
    }

    pub fn shape(message: impl Into<String>) -> Self {
        Self::new(ExitCode::ShapeMismatch, message)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<backdrop::Error> for CliError {
    fn from(e: backdrop::Error) -> Self {
        use backdrop::Error as E;
        let code = match &e {
            E::InvalidArgument(_) => ExitCode::Usage,
            E::Data(_) | E::Ingestion { .. } => ExitCode::Input,
            E::Divergence { .. } => ExitCode::Divergence,
            E::Io { .. } => ExitCode::Output,
        };
        Self::new(code, e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
