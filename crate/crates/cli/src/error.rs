//! Command errors and their exit codes.

use prszz_core::eval::EvalError;
use prszz_core::forge::ForgeError;
use prszz_core::reconstruct::ReconstructError;
use prszz_core::trace::TraceError;
use prszz_core::vcs::VcsError;
use serde_json::json;
use thiserror::Error;

use crate::config::ConfigError;
use crate::fixture::FixtureError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("no ground truth for {0}")]
    MissingTruth(String),
    #[error("missing pipeline input {0}; run the earlier stages first")]
    MissingInput(String),
    #[error(transparent)]
    Vcs(#[from] VcsError),
    #[error(transparent)]
    Forge(#[from] ForgeError),
    #[error(transparent)]
    Reconstruct(#[from] ReconstructError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Eval(EvalError),
    #[error(transparent)]
    Fixture(#[from] FixtureError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::MissingTruth(key) => CliError::MissingTruth(key),
            other => CliError::Eval(other),
        }
    }
}

impl CliError {
    /// 2 for usage and configuration problems, 1 for pipeline failures.
    pub fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) | CliError::MissingTruth(_) => 2,
            CliError::Eval(EvalError::InvalidTruth(_)) => 2,
            _ => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "Usage",
            CliError::Config(_) => "Config",
            CliError::MissingTruth(_) => "MissingTruth",
            CliError::MissingInput(_) => "MissingInput",
            CliError::Vcs(_) => "Vcs",
            CliError::Forge(_) => "Forge",
            CliError::Reconstruct(_) => "Reconstruct",
            CliError::Trace(_) => "Trace",
            CliError::Eval(_) => "Eval",
            CliError::Fixture(_) => "Fixture",
            CliError::Io(_) => "Io",
            CliError::Json(_) => "Json",
        }
    }

    /// One-line JSON report for stderr.
    pub fn to_json(&self) -> String {
        json!({ "error": self.kind(), "message": self.to_string() }).to_string()
    }
}
