use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported sample rate {0} Hz (expected 8000 or 16000)")]
    UnsupportedSampleRate(u32),
    #[error("invalid audio signal: {0}")]
    InvalidSignal(String),
    #[error("signal shorter than frame: need at least {required} samples, got {actual}")]
    SignalTooShort { required: usize, actual: usize },
    #[error("silent utterance: every frame has zero energy")]
    SilentUtterance,
    #[error("degenerate frame: zero-lag autocorrelation is {0}")]
    DegenerateFrame(f64),
    #[error("unstable reflection coefficient k[{index}] = {value}")]
    UnstableReflection { index: usize, value: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("cannot drop {k} coefficients from a {dim}-dimensional feature")]
    DropTooMany { k: usize, dim: usize },
    #[error("invalid parameterization chain {text:?}: {reason}")]
    ChainSyntax { text: String, reason: String },
    #[error("too few frames to train a covariance model: {0} (need at least 2)")]
    TooFewFrames(usize),
    #[error("degenerate model: covariance is zero (all frames identical)")]
    DegenerateModel,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("{0} is not symmetric positive definite")]
    NotPositiveDefinite(String),
    #[error("chain mismatch: model uses {model}, features use {features}")]
    ChainMismatch { model: String, features: String },
    #[error("no model for {0}")]
    MissingModel(String),
    #[error("no features for utterance {0}")]
    MissingUtterance(String),
    #[error("no threshold for claimed speaker {0}")]
    MissingThreshold(String),
    #[error("speaker {speaker} has no {kind} scores")]
    EmptyScores { speaker: String, kind: &'static str },
    #[error("invalid condition notation {text:?}: {reason}")]
    Condition { text: String, reason: String },
    #[error("manifest line {line}: {reason}")]
    Manifest { line: u64, reason: String },
    #[error("duplicate utterance_id {id:?} on lines {first} and {second}")]
    DuplicateUtterance { id: String, first: u64, second: u64 },
    #[error("malformed WAV: {0}")]
    MalformedWav(String),
    #[error("mono required, file has {0} channels")]
    MonoRequired(u16),
    #[error("unsupported WAV encoding: format tag {format}, {bits} bits per sample (only PCM16 is read)")]
    UnsupportedEncoding { format: u16, bits: u16 },
    #[error("malformed model file: {0}")]
    ModelFile(String),
    #[error("malformed threshold file line {line}: {reason}")]
    ThresholdFile { line: usize, reason: String },
    #[error("invalid synthesis spec: {0}")]
    SynthSpec(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
