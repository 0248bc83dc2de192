use std::path::{Path, PathBuf};

use gridcast::ingest::IngestError;
use gridcast::mlp::MlpError;
use gridcast::pipeline::PipelineError;
use gridcast::regression::FitError;
use gridcast::synth::SynthError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags, unreadable or invalid inputs.
    #[error("{0}")]
    Usage(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("every weather parameter failed to fit: {0}")]
    AllFeaturesFailed(String),
    #[error("training failed: {0}")]
    Training(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io { .. } | CliError::Ingest(_) => 2,
            CliError::AllFeaturesFailed(_) => 3,
            CliError::Training(_) => 4,
        }
    }
}

impl From<FitError> for CliError {
    fn from(e: FitError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<MlpError> for CliError {
    fn from(e: MlpError) -> Self {
        match e {
            MlpError::InvalidConfig(_) | MlpError::MissingCatalogEntry(_) | MlpError::Empty(_) => {
                CliError::Usage(e.to_string())
            }
            other => CliError::Training(other.to_string()),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Ingest(e) => e.into(),
            PipelineError::Fit(e) => e.into(),
            PipelineError::AllFeaturesFailed(t) => CliError::AllFeaturesFailed(format!("target {t}")),
            PipelineError::Training(e) => e.into(),
            PipelineError::Version(_) => CliError::Usage(e.to_string()),
        }
    }
}
