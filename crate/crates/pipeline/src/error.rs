use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    /// A core routine failed; `stage` names the pipeline step.
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: physid_core::Error,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid band: {0}")]
    InvalidBand(String),
    #[error("{path}: line {line}: {msg}")]
    Parse { path: String, line: usize, msg: String },
    #[error("{path}: missing column `{column}`")]
    MissingColumn { path: String, column: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, PipelineError>;

/// Attaches a stage label to core errors.
pub trait Stage<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> Stage<T> for physid_core::Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|source| PipelineError::Stage { stage, source })
    }
}
