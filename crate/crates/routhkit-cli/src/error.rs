use routhkit::RouthError;
use thiserror::Error;

/// Everything a command can fail with, mapped onto exit codes.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{0}")]
    Tolerance(String),

    #[error(transparent)]
    Pipeline(#[from] RouthError),

    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Tolerance(_) => 1,
            CliError::Usage(_) | CliError::Io { .. } => 2,
            CliError::Pipeline(e) if e.is_numerical() => 3,
            CliError::Pipeline(_) => 2,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Tolerance(_) => "tolerance",
            CliError::Pipeline(e) => e.kind(),
            CliError::Io { .. } => "io",
        }
    }

    /// `{"error": {"kind", "message", "exit_code"}}`
    pub fn to_json(&self) -> String {
        serde_json::json!({
            "error": { "kind": self.kind(), "message": self.to_string(), "exit_code": self.exit_code() }
        })
        .to_string()
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        CliError::Io { path: path.as_ref().display().to_string(), source }
    }
}

pub type CliResult<T> = Result<T, CliError>;
