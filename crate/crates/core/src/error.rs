use std::path::PathBuf;

use crate::dataset::Modality;

/// Which side of the trigger ran short of frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Before,
    After,
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Side::Before => f.write_str("before"),
            Side::After => f.write_str("after"),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("vector has (near) zero length")]
    ZeroVector,
    #[error("zero-length vector in row {0}")]
    ZeroVectorRow(usize),
    #[error("no valid {0} frame in recording")]
    AllMissing(Modality),
    #[error("fewer than 4 frames {side} trigger time (found {found})")]
    InsufficientFrames { side: Side, found: usize },
    #[error("timestamps are not strictly increasing at frame {0}")]
    UnorderedTimestamps(usize),
    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unsupported schema version {found} (expected {expected})")]
    SchemaVersionMismatch { found: u32, expected: u32 },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("invalid model spec: {0}")]
    InvalidSpec(String),
    #[error("empty {0} split")]
    EmptySplit(&'static str),
    #[error("modality mask keeps no modality")]
    EmptyMask,
    #[error("AOI set is empty")]
    EmptyAoiSet,
    #[error("unknown AOI id {0}")]
    UnknownAoi(u32),
    #[error("duplicate AOI id {0}")]
    DuplicateAoi(u32),
    #[error("too few drivers to split ({0})")]
    TooFewDrivers(usize),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    Empty,
    #[error("sample {0} has an invalid frame; preprocess the dataset first")]
    NotPreprocessed(usize),
    #[error("invalid cross-validation plan: {0}")]
    InvalidPlan(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}
