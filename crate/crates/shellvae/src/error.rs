use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: bad magic number: expected {expected:#010x}, found {actual:#010x}", path.display())]
    BadMagic {
        path: PathBuf,
        expected: u32,
        actual: u32,
    },
    #[error("{}: truncated: need {expected} bytes, file has {actual}", path.display())]
    Truncated {
        path: PathBuf,
        expected: u64,
        actual: u64,
    },
    #[error("{images} images but {labels} labels")]
    CountMismatch { images: usize, labels: usize },
    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },
    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("{}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },
    #[error("directory {} does not exist (pass --create-dirs to create it)", .0.display())]
    MissingDirectory(PathBuf),
    #[error("region was computed for dataset {region_hash}, but {} hashes to {data_hash}", data_path.display())]
    FingerprintMismatch {
        data_path: PathBuf,
        region_hash: String,
        data_hash: String,
    },
    #[error("checkpoint does not fit this dataset: {0}")]
    Incompatible(String),
    #[error(transparent)]
    Core(#[from] shellvae_core::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub(crate) fn format_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        message: message.into(),
    }
}
