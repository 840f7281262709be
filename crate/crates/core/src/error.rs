//! Crate-wide error type.

use std::fmt;
use std::io;

#[derive(Debug)]
pub enum Error {
    /// Matrix/vector dimensions incompatible with the requested operation.
    ShapeMismatch {
        op: &'static str,
        detail: String,
    },
    /// An operation produced or would propagate a NaN/Inf entry.
    NonFinite {
        op: &'static str,
    },
    /// A quantization scheme with invalid parameters (lo >= hi, zero levels).
    InvalidScheme(String),
    /// Pulse encoding requested for a continuous scheme.
    ContinuousPulses,
    /// Pulse trains from different protocol phases cannot coincide.
    PhaseMismatch,
    /// Pulse protocol amplitudes violate the device's write thresholds.
    ProtocolViolation(String),
    /// Device learning cycle called with a negative presynaptic signal.
    NegativeActivation(f64),
    /// Cross-entropy requested for outputs outside the open interval (0, 1).
    LogDomain(f64),
    /// Const backward mode requested but the network has no backward matrices.
    MissingBackwardMatrices,
    /// Bad network/experiment configuration.
    InvalidConfig(String),
    /// IDX container holds a different record type than requested.
    IdxMagic {
        expected: u32,
        found: u32,
        hint: &'static str,
    },
    /// IDX payload shorter or longer than the header promises.
    IdxLength {
        expected: usize,
        found: usize,
    },
    /// A label byte outside 0..=9.
    LabelOutOfRange {
        index: usize,
        value: u8,
    },
    /// Image and label files disagree on the sample count.
    CountMismatch {
        images: usize,
        labels: usize,
    },
    /// Checkpoint bytes do not parse.
    BadCheckpoint(String),
    /// Dataset files absent; lists the paths that were tried.
    MissingData {
        dir: String,
        missing: Vec<String>,
    },
    Io(io::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::ShapeMismatch { op, detail } => write!(f, "{op}: shape mismatch: {detail}"),
            Error::NonFinite { op } => write!(f, "{op}: non-finite value produced"),
            Error::InvalidScheme(msg) => write!(f, "invalid quantization scheme: {msg}"),
            Error::ContinuousPulses => {
                write!(f, "pulse encoding is undefined for a continuous scheme")
            }
            Error::PhaseMismatch => write!(f, "pulse trains belong to different phases"),
            Error::ProtocolViolation(msg) => write!(f, "pulse protocol violation: {msg}"),
            Error::NegativeActivation(x) => write!(
                f,
                "learning cycle requires a non-negative presynaptic signal, got {x}"
            ),
            Error::LogDomain(y) => write!(
                f,
                "cross-entropy requires outputs strictly inside (0, 1), got {y}"
            ),
            Error::MissingBackwardMatrices => {
                write!(f, "const backward mode needs fixed backward matrices")
            }
            Error::InvalidConfig(msg) => write!(f, "invalid configuration: {msg}"),
            Error::IdxMagic {
                expected,
                found,
                hint,
            } => write!(
                f,
                "bad IDX magic: expected 0x{expected:08x}, found 0x{found:08x} ({hint})"
            ),
            Error::IdxLength { expected, found } => write!(
                f,
                "IDX payload length mismatch: header promises {expected} bytes, found {found}"
            ),
            Error::LabelOutOfRange { index, value } => {
                write!(f, "label {value} at index {index} outside 0..=9")
            }
            Error::CountMismatch { images, labels } => {
                write!(
                    f,
                    "sample count mismatch: {images} images vs {labels} labels"
                )
            }
            Error::BadCheckpoint(msg) => write!(f, "bad checkpoint: {msg}"),
            Error::MissingData { dir, missing } => write!(
                f,
                "MNIST files not found under '{dir}': missing {} (raw or .gz); \
                 pass --data-dir or set MNIST_DATA_DIR",
                missing.join(", ")
            ),
            Error::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<io::Error> for Error {
    fn from(e: io::Error) -> Self {
        Error::Io(e)
    }
}

pub type Result<T> = std::result::Result<T, Error>;
