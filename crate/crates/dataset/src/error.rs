use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("CIR has {len} taps, shorter than the {window}-tap STFT window")]
    Length { len: usize, window: usize },
    #[error("augmentation parameter out of range: {0}")]
    Param(String),
    #[error("not enough campaign data: {0}")]
    Capacity(String),
    #[error("bad image {path}: {reason}")]
    Image { path: String, reason: String },
    #[error("bad manifest {path}: {reason}")]
    Manifest { path: String, reason: String },
    #[error("unknown {kind} {name:?}")]
    Unknown { kind: &'static str, name: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Channel(#[from] ris_sense_channel::ChannelError),
}

pub type Result<T> = std::result::Result<T, DatasetError>;

impl DatasetError {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        DatasetError::Io { path: path.display().to_string(), source }
    }
}
