//! Error type shared across the toolkit.

use std::path::PathBuf;

/// Errors produced by simulation, DSP, quantization, and I/O routines.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A configuration value failed validation before any work started.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Source or microphone placed outside the room, or coincident.
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    /// The requested RT60 would need wall absorption greater than one.
    #[error("infeasible room: {0}")]
    InfeasibleRoom(String),

    /// Schroeder curve never spans the -5..-35 dB fit range.
    #[error("insufficient decay: {0}")]
    InsufficientDecay(String),

    /// An operation was handed a silent signal where power is required.
    #[error("zero-power input: {0}")]
    ZeroPower(String),

    /// Sample-rate mismatch between two waveforms.
    #[error("sample-rate mismatch: {left} Hz vs {right} Hz")]
    SampleRateMismatch { left: u32, right: u32 },

    /// Matrix or waveform shapes disagree.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// Non-finite sample or matrix entry where finiteness is an invariant.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// A serialized file has the wrong magic bytes.
    #[error("bad file format in {path}: {detail}")]
    BadFormat { path: PathBuf, detail: String },

    /// A serialized file has a version this build does not understand.
    #[error("unsupported version {version} in {path}")]
    UnsupportedVersion { path: PathBuf, version: u16 },

    /// Payload CRC does not match the trailing checksum.
    #[error("checksum mismatch in {path}")]
    ChecksumMismatch { path: PathBuf },

    /// A code index fell outside its codebook.
    #[error("code index {index} out of range (codebook size {size})")]
    CodeOutOfRange { index: usize, size: usize },

    /// Required input file is missing or a directory is unusable.
    #[error("missing input: {0}")]
    MissingInput(String),

    /// Manifest or report line failed to parse.
    #[error("parse error in {path}: {detail}")]
    Parse { path: PathBuf, detail: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Wav(#[from] hound::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code the CLI maps this error to: 2 for configuration
    /// problems caught before execution, 1 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::InvalidGeometry(_)
            | Error::InfeasibleRoom(_)
            | Error::ShapeMismatch(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
