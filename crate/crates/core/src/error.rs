use thiserror::Error;

/// Errors raised anywhere in the selection engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not symmetric: |a[{row},{col}] - a[{col},{row}]| = {gap:e}")]
    NotSymmetric { row: usize, col: usize, gap: f64 },

    #[error("matrix is not positive definite: pivot {pivot} = {value:e}")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("non-finite value at position {0}")]
    NonFinite(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("training loss became non-finite at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },

    #[error("layer traces come from different proxy snapshots ({0} vs {1})")]
    SnapshotMismatch(u64, u64),

    #[error("insufficient pool: requested {requested}, available {available}")]
    InsufficientPool { requested: usize, available: usize },

    #[error("index {index} out of range for {len} samples")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error("bad magic bytes in tensor file")]
    BadMagic,

    #[error("tensor payload checksum mismatch")]
    BadCrc,

    #[error("unsupported tensor file version {0}")]
    UnsupportedVersion(u16),

    #[error("unsupported tensor dtype code {0}")]
    UnsupportedDtype(u8),

    #[error("malformed data: {0}")]
    Malformed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable identifier of the variant, used by foreign callers and CLI messages.
    pub fn code(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::NotSymmetric { .. } => "NotSymmetric",
            Error::NotPositiveDefinite { .. } => "NotPositiveDefinite",
            Error::NonFinite(_) => "NonFinite",
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::NonFiniteLoss { .. } => "NonFiniteLoss",
            Error::SnapshotMismatch(..) => "SnapshotMismatch",
            Error::InsufficientPool { .. } => "InsufficientPool",
            Error::IndexOutOfRange { .. } => "IndexOutOfRange",
            Error::ConfigInvalid(_) => "ConfigInvalid",
            Error::BadMagic => "BadMagic",
            Error::BadCrc => "BadCrc",
            Error::UnsupportedVersion(_) => "UnsupportedVersion",
            Error::UnsupportedDtype(_) => "UnsupportedDtype",
            Error::Malformed(_) => "Malformed",
            Error::Io(_) => "Io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
