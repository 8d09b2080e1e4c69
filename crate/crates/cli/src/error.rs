use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use reprostitch::io::IoError;

#[derive(Debug)]
pub enum CliError {
    /// Environment or filesystem failure, exit 2.
    Env(String),
    /// Unparseable or inconsistent input file, exit 3.
    Malformed { path: PathBuf, reason: String },
    /// Invalid flag or config value, exit 3.
    Invalid(String),
    /// Required inputs are missing, exit 4.
    Incomplete(Vec<String>),
    /// The computation itself failed, exit 1.
    Failed(String),
}

impl CliError {
    pub fn malformed(path: &Path, reason: impl Display) -> Self {
        CliError::Malformed { path: path.to_path_buf(), reason: reason.to_string() }
    }

    pub fn write(path: &Path, reason: impl Display) -> Self {
        CliError::Env(format!("{}: {reason}", path.display()))
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Failed(_) => 1,
            CliError::Env(_) => 2,
            CliError::Malformed { .. } | CliError::Invalid(_) => 3,
            CliError::Incomplete(_) => 4,
        })
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        if e.is_malformed() {
            let path = e.path().to_path_buf();
            CliError::Malformed { reason: e.to_string(), path }
        } else {
            CliError::Env(e.to_string())
        }
    }
}

impl Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Env(m) | CliError::Invalid(m) | CliError::Failed(m) => f.write_str(m),
            CliError::Malformed { path, reason } => {
                let p = path.display().to_string();
                if reason.starts_with(&p) {
                    f.write_str(reason)
                } else {
                    write!(f, "{p}: {reason}")
                }
            }
            CliError::Incomplete(missing) => {
                write!(f, "{} missing input(s):", missing.len())?;
                for m in missing {
                    write!(f, "\n  {m}")?;
                }
                Ok(())
            }
        }
    }
}
