//! Batch front end: configuration and preset loading, incidence CSV
//! ingestion, subcommand pipelines and atomic artifact output.

mod artifacts;
mod commands;
mod config;
mod data;
mod presets;

use std::fmt;
use std::path::PathBuf;

pub use artifacts::ArtifactWriter;
pub use commands::{run_subcommand, Command};
pub use config::{
    load_config, parse_config, parse_week_window, ControlSection, FitSection, ParamSource, RtSection, RunConfig,
    SensitivitySection, TimeSection,
};
pub use data::{export_incidence_csv, load_incidence_csv, parse_incidence_csv, write_incidence_csv, DataBundle};
pub use presets::{builtin_preset_text, load_preset, parse_preset, PRESET_NAMES};

/// Errors of the batch front end. Each variant has its own exit code;
/// model errors keep the code of the underlying variant.
#[derive(Debug, Clone, PartialEq)]
pub enum AppError {
    Config(String),
    Parse { path: PathBuf, line: usize, message: String },
    Validation { path: PathBuf, message: String },
    Io { path: PathBuf, message: String },
    UnknownPreset(String),
    Model(crate::Error),
}

impl AppError {
    pub fn kind(&self) -> &'static str {
        match self {
            AppError::Config(_) => "config",
            AppError::Parse { .. } => "parse",
            AppError::Validation { .. } => "validation",
            AppError::Io { .. } => "io",
            AppError::UnknownPreset(_) => "unknown_preset",
            AppError::Model(e) => e.kind(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Config(_) => 3,
            AppError::Parse { .. } => 4,
            AppError::Validation { .. } => 5,
            AppError::Io { .. } => 6,
            AppError::UnknownPreset(_) => 7,
            AppError::Model(e) => e.exit_code(),
        }
    }

    /// `error code=N kind=K message="..."` on one line.
    pub fn machine_line(&self) -> String {
        let msg = serde_json::to_string(&self.to_string()).unwrap_or_else(|_| "\"\"".into());
        format!("error code={} kind={} message={msg}", self.exit_code(), self.kind())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, e: std::io::Error) -> Self {
        AppError::Io { path: path.into(), message: e.to_string() }
    }
}

impl fmt::Display for AppError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AppError::Config(m) => write!(f, "config: {m}"),
            AppError::Parse { path, line, message } => write!(f, "{}:{line}: {message}", path.display()),
            AppError::Validation { path, message } => write!(f, "{}: {message}", path.display()),
            AppError::Io { path, message } => write!(f, "{}: {message}", path.display()),
            AppError::UnknownPreset(name) => {
                write!(f, "unknown preset `{name}` (known: {})", PRESET_NAMES.join(", "))
            }
            AppError::Model(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for AppError {}

impl From<crate::Error> for AppError {
    fn from(e: crate::Error) -> Self {
        AppError::Model(e)
    }
}

pub type AppResult<T> = std::result::Result<T, AppError>;
