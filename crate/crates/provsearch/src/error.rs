use thiserror::Error;

use provsearch_core::corpus::CorpusError;
use provsearch_core::embedding::EmbedError;
use provsearch_core::eval::EvalError;
use provsearch_core::index::IndexError;
use provsearch_core::pipeline::{GenerateError, PipelineError};

/// Failure of a CLI command, mapped onto the process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Auth(String),
    #[error("cannot bind {addr}: {reason}")]
    Bind { addr: String, reason: String },
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) | Self::Input(_) => 2,
            Self::Auth(_) => 3,
            Self::Bind { .. } => 4,
            Self::Runtime(_) => 1,
        }
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        Self::Input(e.to_string())
    }
}

impl From<IndexError> for CliError {
    fn from(e: IndexError) -> Self {
        Self::Input(e.to_string())
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        Self::Input(e.to_string())
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match &e {
            PipelineError::Embedding(EmbedError::Auth(_)) | PipelineError::Generation(GenerateError::Auth(_)) => {
                Self::Auth(e.to_string())
            }
            PipelineError::Config(_) => Self::Usage(e.to_string()),
            PipelineError::MissingDocument(_) => Self::Input(format!("{e}; rebuild the index with `provsearch index`")),
            _ => Self::Runtime(e.to_string()),
        }
    }
}
