use alloc::string::String;
use alloc::vec::Vec;

use crate::score::NoteDynamicLabel;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Errors raised by the core algorithms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("score has no parts")]
    EmptyScore,
    #[error("score has no vocal notes")]
    EmptyVocalPart,
    #[error("invalid score: {0}")]
    InvalidScore(String),
    #[error("{} vocal note(s) precede the first absolute dynamic marking", notes.len())]
    UnlabeledPrefix {
        /// Vocal note indices without a label.
        notes: Vec<usize>,
        /// Labels for the remaining notes, for callers that drop the prefix.
        labeled: Vec<NoteDynamicLabel>,
    },

    #[error("invalid audio: {0}")]
    InvalidAudio(String),
    #[error("sample rate {actual} Hz not supported here, expected {expected} Hz")]
    SampleRate { expected: u32, actual: u32 },
    #[error("non-positive sample rate")]
    NonPositiveRate,
    #[error("third-octave level {level:.1} dB above the 120 dB validity limit of the loudness model")]
    LevelOutOfRange { level: f64 },
    #[error("expected {expected} features, got {actual}")]
    WrongFeatureKind { expected: &'static str, actual: &'static str },
    #[error("downsampling factor must be at least 1")]
    ZeroFactor,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("cost matrix cell ({rows}, {cols}) unreachable under the step rule")]
    InfeasiblePath { rows: usize, cols: usize },
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("f0 rows are not sorted by time at row {0}")]
    UnsortedRows(usize),
    #[error("negative frequency {freq} at row {row}")]
    NegativeFrequency { row: usize, freq: f64 },
    #[error("no voiced f0 frames fall inside aligned notes")]
    UndefinedScore,

    #[error("category {0} has no absolute class")]
    UnresolvedCategory(&'static str),
    #[error("label hop {label_hop} s does not match feature hop {feature_hop} s")]
    HopMismatch { label_hop: f64, feature_hop: f64 },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("all frames are masked")]
    AllMasked,
    #[error("input has {actual} bins, model expects {expected}")]
    BinMismatch { expected: usize, actual: usize },
    #[error("missing or malformed tensor {0}")]
    BadTensor(String),
    #[error("empty dataset")]
    EmptyDataset,
    #[error("tolerance {0} not in 0..=2")]
    BadTolerance(u8),
}
