use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("invalid bin spec: {0}")]
    InvalidBins(String),

    #[error("cannot quantize a NaN value")]
    NanValue,

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("distribution is not normalized (sum = {sum})")]
    NotNormalized { sum: f64 },

    #[error("length mismatch for {what}: expected {expected}, found {found}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("median decoding is undefined for circular bins")]
    CircularMedian,

    #[error("invalid network config: {0}")]
    InvalidConfig(String),

    #[error("image of {width}x{height} is smaller than the network's minimum input {min}x{min}")]
    ImageTooSmall {
        width: usize,
        height: usize,
        min: usize,
    },

    #[error("location ({x}, {y}) is outside the {width}x{height} image")]
    OutOfBounds {
        x: f64,
        y: f64,
        width: usize,
        height: usize,
    },

    #[error("non-finite loss at image {image}, sample {sample} (pixel {x},{y})")]
    NonFiniteLoss {
        image: usize,
        sample: usize,
        x: usize,
        y: usize,
    },

    #[error("non-finite energy at iteration {iteration}")]
    NonFiniteEnergy { iteration: usize },

    #[error("rebalance statistics must be positive, got {value} for tap {tap}")]
    NonPositiveStats { tap: String, value: f64 },

    #[error("missing channel `{0}`")]
    MissingChannel(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("bad magic")]
    BadMagic,

    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("unexpected end of file")]
    UnexpectedEof,

    #[error("config line {line}: {reason}")]
    ConfigParse { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
