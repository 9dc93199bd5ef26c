use std::fmt::Display;
use std::path::Path;

/// Command failure, split by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags, config or missing inputs. Exit code 1.
    #[error("{0}")]
    Validation(String),
    /// Data or I/O failure while running. Exit code 2.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

pub fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

pub fn runtime(e: impl Display) -> CliError {
    CliError::Runtime(e.to_string())
}

pub fn io_at(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Runtime(format!("{}: {e}", path.display()))
}

pub fn require<T>(value: Option<T>, flag: &str) -> Result<T> {
    value.ok_or_else(|| invalid(format!("missing required option --{flag}")))
}

pub fn require_dir(path: &Path, what: &str) -> Result<()> {
    if !path.is_dir() {
        return Err(invalid(format!("{what} directory {} does not exist", path.display())));
    }
    Ok(())
}

pub fn require_file(path: &Path, what: &str) -> Result<()> {
    if !path.is_file() {
        return Err(invalid(format!("{what} file {} does not exist", path.display())));
    }
    Ok(())
}
