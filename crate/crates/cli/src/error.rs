use std::fmt;

use pointfuse::Error;

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    /// Bad flags, config file or missing input paths.
    Config = 2,
    /// Input files that exist but cannot be used.
    Data = 3,
    /// Anything that fails while running.
    Runtime = 4,
}

impl Kind {
    fn label(self) -> &'static str {
        match self {
            Kind::Config => "config",
            Kind::Data => "data",
            Kind::Runtime => "runtime",
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub kind: Kind,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError {
            kind: Kind::Config,
            message: message.into(),
        }
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        CliError {
            kind: Kind::Runtime,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "error[{}]: {}", self.kind.label(), self.message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let kind = match &e {
            Error::Config(_)
            | Error::InvalidSpec(_)
            | Error::InvalidPlan(_)
            | Error::EmptyMask
            | Error::TooFewDrivers(_) => Kind::Config,
            Error::Parse { .. }
            | Error::SchemaVersionMismatch { .. }
            | Error::UnknownAoi(_)
            | Error::DuplicateAoi(_)
            | Error::EmptyAoiSet
            | Error::EmptyDataset
            | Error::AllMissing(_)
            | Error::InsufficientFrames { .. }
            | Error::UnorderedTimestamps(_)
            | Error::NotPreprocessed(_)
            | Error::ZeroVector => Kind::Data,
            _ => Kind::Runtime,
        };
        CliError {
            kind,
            message: e.to_string(),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
