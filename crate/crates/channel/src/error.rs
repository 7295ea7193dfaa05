use thiserror::Error;

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("invalid sweep config: {0}")]
    Config(String),
    #[error("turntable angle {0} outside [0, 360)")]
    Angle(f64),
    #[error("unknown {kind} {name:?}")]
    Unknown { kind: &'static str, name: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("bad sweep file {path}: {reason}")]
    Format { path: String, reason: String },
}

pub type Result<T> = std::result::Result<T, ChannelError>;

impl ChannelError {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        ChannelError::Io { path: path.display().to_string(), source }
    }

    pub(crate) fn format(path: &std::path::Path, reason: impl Into<String>) -> Self {
        ChannelError::Format { path: path.display().to_string(), reason: reason.into() }
    }
}
