use std::path::PathBuf;

use crate::volume::Dims;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid volume: {0}")]
    InvalidVolume(String),

    #[error("invalid displacement field: {0}")]
    InvalidField(String),

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(Dims, Dims),

    #[error("degenerate intensity range")]
    DegenerateRange,

    #[error("image has zero intensity variance")]
    ZeroVariance,

    #[error("input is not normalized to [0, 1]: {0}")]
    NotNormalized(String),

    #[error("{window}-voxel window does not fit inside volume {dims}")]
    WindowTooLarge { window: usize, dims: Dims },

    #[error("unsupported datatype (code {0})")]
    UnsupportedDatatype(i16),

    #[error("malformed header in {path}: {reason}")]
    MalformedHeader { path: PathBuf, reason: String },

    #[error("size mismatch in {path}: header implies {expected} bytes, found {actual}")]
    SizeMismatch {
        path: PathBuf,
        expected: u64,
        actual: u64,
    },

    #[error("unrecognised volume format for {0} (expected .nii or .f32raw)")]
    UnknownFormat(PathBuf),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
