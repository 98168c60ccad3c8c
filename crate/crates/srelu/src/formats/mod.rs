//! On-disk formats: MNIST IDX files, CIFAR-10 binary batches and the model
//! parameter file.

pub mod cifar;
pub mod idx;
pub mod params;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{what}: bad magic number {found:#010x}, expected {expected:#010x}")]
    BadMagic { what: String, found: u32, expected: u32 },
    #[error("{what}: truncated, need {expected} bytes, have {found}")]
    Truncated { what: String, expected: usize, found: usize },
    #[error("{what}: {extra} trailing bytes after the declared payload")]
    TrailingBytes { what: String, extra: usize },
    #[error("{what}: length {len} is not a whole number of {record}-byte records")]
    RecordLength { what: String, len: usize, record: usize },
    #[error("{images} images but {labels} labels")]
    CountMismatch { images: usize, labels: usize },
    #[error("{what}: label {label} at record {index} is outside 0..=9")]
    BadLabel { what: String, label: u8, index: usize },
    #[error("{what}: unsupported version {found}")]
    Version { what: String, found: u32 },
    #[error("{what}: {detail}")]
    Malformed { what: String, detail: String },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Core(#[from] srelu_core::Error),
}

pub type Result<T, E = FormatError> = std::result::Result<T, E>;

pub(crate) fn read_file(path: &std::path::Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|source| FormatError::Io { path: path.display().to_string(), source })
}

pub(crate) fn write_file(path: &std::path::Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|source| FormatError::Io { path: path.display().to_string(), source })
}

/// `[0, 1]` pixel back to its byte value.
pub(crate) fn to_byte(v: f32) -> u8 {
    (v * 255.0).round().clamp(0.0, 255.0) as u8
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}
