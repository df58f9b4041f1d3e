use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read image {path}: {source}")]
    ImageRead {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error("cannot write image {path}: {source}")]
    ImageWrite {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),
    #[error("degenerate histogram: image has a single intensity")]
    DegenerateHistogram,
    #[error("invalid dimensions {width}x{height}")]
    InvalidDimensions { width: usize, height: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("sample {id}: {source}")]
    Sample {
        id: String,
        #[source]
        source: Box<Error>,
    },
    #[error("no training patterns for key year {0}")]
    MissingYear(i32),
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least two classes, found {0}")]
    SingleClass(usize),
    #[error("class {class} has {count} samples, fewer than k = {k}")]
    ClassTooSmall { class: i32, count: usize, k: usize },
    #[error("augmented sample {0} in a test set")]
    AugmentedInTest(String),
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("format: {0}")]
    Format(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn for_sample(self, id: impl Into<String>) -> Self {
        Error::Sample {
            id: id.into(),
            source: Box::new(self),
        }
    }
}
