use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("cannot ingest image {path}: {reason}")]
    Ingest { path: String, reason: String },
    #[error("the {0} split is empty")]
    EmptySplit(&'static str),
    #[error("invalid training config: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ris_sense_core::Error),
    #[error(transparent)]
    Checkpoint(#[from] ris_sense_core::checkpoint::CheckpointError),
    #[error(transparent)]
    Dataset(#[from] ris_sense_dataset::DatasetError),
    #[error(transparent)]
    Channel(#[from] ris_sense_channel::ChannelError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, HarnessError>;

impl HarnessError {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        HarnessError::Io { path: path.display().to_string(), source }
    }
}
