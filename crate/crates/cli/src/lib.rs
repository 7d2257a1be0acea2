//! Configuration, dataset ingestion, checkpoints and the pipeline commands
//! behind the `lardo` binary.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod ingest;

use lardo_core::downstream::DownstreamError;
use lardo_core::prompting::PromptingError;
use thiserror::Error;

pub use checkpoint::{config_digest, load_checkpoint, save_checkpoint, Checkpoint, CheckpointError};
pub use config::RunConfig;
pub use ingest::{ingest_csv, IngestReport};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Prompting(#[from] PromptingError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("{0}")]
    Training(String),
    #[error(transparent)]
    Downstream(#[from] DownstreamError),
    #[error(transparent)]
    Gateway(#[from] lardo_llm::GatewayError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// Short label printed in front of the error line.
    pub fn category(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Input(_) => "input",
            CliError::Prompting(PromptingError::Gateway { .. }) | CliError::Gateway(_) => "llm",
            CliError::Prompting(PromptingError::Io(_)) | CliError::Io(_) => "io",
            CliError::Prompting(_) => "input",
            CliError::Checkpoint(_) => "checkpoint",
            CliError::Downstream(DownstreamError::Record { .. } | DownstreamError::UnlabelledTask { .. }) => "input",
            CliError::Downstream(DownstreamError::Config(_)) => "config",
            CliError::Downstream(DownstreamError::Io(_)) => "io",
            CliError::Downstream(_) | CliError::Training(_) => "training",
        }
    }
}
