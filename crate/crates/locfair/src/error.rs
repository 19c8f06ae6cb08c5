use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] locfair_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{what}: {source}")]
    TomlRead {
        what: String,
        #[source]
        source: toml::de::Error,
    },
    #[error("cannot serialize {what}: {source}")]
    TomlWrite {
        what: &'static str,
        #[source]
        source: toml::ser::Error,
    },
    #[error("checkpoint: {0}")]
    Checkpoint(#[from] CheckpointError),
    /// Bad command-line input; the binary exits with status 2.
    #[error("{0}")]
    Usage(String),
    #[error("{failed} of {total} sweep cells failed")]
    Sweep { failed: usize, total: usize },
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum CheckpointError {
    #[error("not a locfair checkpoint")]
    BadMagic,
    #[error("unsupported format version {0}")]
    Version(u32),
    #[error("checksum mismatch (stored {stored:#010x}, computed {computed:#010x})")]
    Checksum { stored: u32, computed: u32 },
    #[error("file ends early")]
    Truncated,
    #[error("malformed section: {0}")]
    Malformed(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
    let path = path.into();
    move |source| Error::Io { path, source }
}
