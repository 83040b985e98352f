//! Error taxonomy of the command-line layer, keyed to exit codes.
//!
//! Three buckets: `Usage` for anything the caller can fix by changing flags
//! or config (exit 2), `Io` for anything the filesystem or a file's bytes
//! did wrong (exit 3), and `Run` for failures inside the pipeline itself,
//! such as a numeric abort (exit 1).

use std::fmt::Display;
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flag values, bad config keys, violated preconditions.
    #[error("{0}")]
    Usage(String),
    /// Filesystem failures and malformed file contents.
    #[error("{0}")]
    Io(String),
    /// Pipeline failures after inputs were accepted.
    #[error("{0}")]
    Run(String),
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn io(msg: impl Into<String>) -> Self {
        CliError::Io(msg.into())
    }

    pub fn run(msg: impl Into<String>) -> Self {
        CliError::Run(msg.into())
    }

    /// Process exit code for this failure: 2 usage, 3 I/O, 1 runtime.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
            CliError::Run(_) => 1,
        }
    }
}

impl From<visage_core::error::CoreError> for CliError {
    fn from(e: visage_core::error::CoreError) -> Self {
        CliError::Run(e.to_string())
    }
}

/// Attach the offending path to a filesystem error.
pub fn io_at(path: &Path, e: impl Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// Malformed content inside an otherwise readable file.
pub fn bad_file(path: &Path, what: impl Display) -> CliError {
    CliError::Io(format!("{}: {what}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_match_the_contract() {
        assert_eq!(CliError::usage("x").exit_code(), 2);
        assert_eq!(CliError::io("x").exit_code(), 3);
        assert_eq!(CliError::run("x").exit_code(), 1);
    }

    #[test]
    fn core_errors_surface_as_runtime_failures() {
        let core = visage_core::error::CoreError::contract("broken");
        let cli: CliError = core.into();
        assert_eq!(cli.exit_code(), 1);
        assert!(cli.to_string().contains("broken"));
    }
}
