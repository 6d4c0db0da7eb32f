use serde::Serialize;
use thiserror::Error;

use crate::config::ConfigError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error at {0}")]
    Config(ConfigError),
    #[error("usage error: {0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] planar_dpp::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialisation error: {0}")]
    Json(#[from] serde_json::Error),
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl CliError {
    /// 2 for usage and configuration problems, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Usage(_) => 2,
            CliError::Core(e) if e.is_numerical() => 3,
            CliError::Core(_) => 2,
            CliError::Io(_) | CliError::Json(_) => 3,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Usage(_) => "usage",
            CliError::Core(e) if e.is_numerical() => "numerical",
            CliError::Core(_) => "argument",
            CliError::Io(_) => "io",
            CliError::Json(_) => "serialisation",
        }
    }

    pub fn report(&self) -> ErrorReport {
        let (line, key) = match self {
            CliError::Config(c) => (c.line, Some(c.key.clone())),
            _ => (None, None),
        };
        ErrorReport {
            kind: self.kind(),
            exit_code: self.exit_code(),
            message: self.to_string(),
            line,
            key,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct ErrorReport {
    pub kind: &'static str,
    pub exit_code: i32,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub line: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub key: Option<String>,
}
