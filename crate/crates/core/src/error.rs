use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("panorama must have a 2:1 aspect ratio, got {width}x{height}")]
    BadAspect { width: usize, height: usize },

    #[error("bin scale {bin_scale} does not divide map size {h}x{w}")]
    BinScale { bin_scale: usize, h: usize, w: usize },

    #[error("border index {idx} out of range for {count} center bins")]
    BorderIndex { idx: usize, count: usize },

    #[error("invalid layout: {0}")]
    InvalidLayout(String),

    #[error("layout initialization failed: {0}")]
    Initialization(String),

    #[error("failed to read or write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image error for {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("malformed JSON in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}
