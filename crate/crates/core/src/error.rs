use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("dimension {0} is not a power of two")]
    NotQubitRegister(usize),
    #[error("matrix is not Hermitian (max |A - A†| = {0:e})")]
    NotHermitian(f64),
    #[error("matrix is not unitary (max |U†U - I| = {0:e})")]
    NotUnitary(f64),
    #[error("density matrix trace is {0}, expected 1")]
    BadTrace(f64),
    #[error("density matrix has negative eigenvalue {0:e}")]
    NotPositive(f64),
    #[error("index {index} out of range for register of {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("partial trace would leave no qubits")]
    EmptyRemainder,
    #[error("eigendecomposition failed (non-finite input)")]
    Eigensolver,
    #[error("dephasing rate {0} outside [0, 1]")]
    RateOutOfRange(f64),
    #[error("regressor ({j},{k}) has zero coefficient at p = 0; exponent undefined")]
    ZeroCoefficient { j: usize, k: usize },
    #[error("feature value {0} outside [0, 1]")]
    FeatureOutOfRange(f64),

    #[error("invalid topology: {0}")]
    InvalidTopology(String),
    #[error("live register width {width} exceeds cap {cap} qubits")]
    WidthCapExceeded { width: usize, cap: usize },
    #[error("parameter mismatch: {0}")]
    ParameterMismatch(String),
    #[error("sample has {found} features, network expects {expected}")]
    FeatureCount { expected: usize, found: usize },

    #[error("{path}: bad IDX magic {found:#010x}, expected {expected:#010x}")]
    BadMagic { path: PathBuf, expected: u32, found: u32 },
    #[error("{path}: truncated file (needed {needed} bytes, have {have})")]
    Truncated { path: PathBuf, needed: usize, have: usize },
    #[error("image count {images} does not match label count {labels}")]
    CountMismatch { images: usize, labels: usize },
    #[error("degenerate covariance: {samples} samples for {components} components")]
    DegenerateCovariance { samples: usize, components: usize },
    #[error("invalid class grouping: {0}")]
    InvalidGrouping(String),
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("bad file format: {0}")]
    Format(String),

    #[error("training diverged at epoch {epoch}: non-finite loss")]
    Diverged { epoch: usize },
    #[error("gradient self-test failed: relative error {0:e}")]
    GradientCheck(f64),
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
