use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the noise PSD estimation pipeline.
#[derive(Error, Debug)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("signal too short: {len} samples, need at least {needed}")]
    SignalTooShort { len: usize, needed: usize },

    #[error("insufficient history: window ends at frame {l_end}, need at least {needed} frames")]
    InsufficientHistory { l_end: usize, needed: usize },

    #[error("signal too short for sliding-window estimation: {frames} frames, need {needed}")]
    InsufficientLength { frames: usize, needed: usize },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unsupported sample rate {found} Hz (expected {expected} Hz)")]
    SampleRate { found: u32, expected: u32 },

    #[error("unsupported WAV encoding: {0}")]
    WavEncoding(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("unsupported format version {found} (expected {expected})")]
    UnsupportedVersion { found: u32, expected: u32 },

    #[error("training diverged: {0}")]
    Divergence(String),

    #[error("empty selection: {0}")]
    EmptySelection(String),

    #[error("file not found: {0}")]
    FileNotFound(PathBuf),

    #[error("{path}: {source}")]
    Wav {
        path: PathBuf,
        source: hound::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
