//! Library side of the `spdc` command: scenario configs, presets, the
//! subcommand implementations and their CSV/JSON rendering.

pub mod commands;
pub mod config;
pub mod output;

pub use config::{Scenario, ScenarioConfig, Thickness};
pub use output::{Format, Report};

/// Version of the CSV/JSON output layout.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    /// A library error caused by invalid input values.
    #[error("{0}")]
    Input(spdc_core::Error),
    #[error("{0}")]
    Compute(#[from] spdc_core::Error),
    #[error("i/o: {0}")]
    Io(String),
}

impl CliError {
    /// 2 for usage and config problems, 1 for failures during computation.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) | CliError::Input(_) => 2,
            CliError::Compute(_) | CliError::Io(_) => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Config(_) => "config",
            CliError::Input(e) | CliError::Compute(e) => e.kind(),
            CliError::Io(_) => "io",
        }
    }

    /// `{"error": {"kind": ..., "message": ...}}`
    pub fn to_json(&self) -> String {
        serde_json::json!({
            "error": { "kind": self.kind(), "message": self.to_string() }
        })
        .to_string()
    }
}
