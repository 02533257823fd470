use std::fmt;

use serde::Serialize;

use crate::path::DataType;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Where in an input file a parse problem was found. Rows and columns are
/// 1-based; `row == 0` means the header record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Location {
    pub row: Option<usize>,
    pub column: Option<usize>,
}

impl Location {
    pub fn row(row: usize) -> Self {
        Location { row: Some(row), column: None }
    }

    pub fn cell(row: usize, column: usize) -> Self {
        Location { row: Some(row), column: Some(column) }
    }
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.row, self.column) {
            (Some(r), Some(c)) => write!(f, "row {r}, column {c}"),
            (Some(r), None) => write!(f, "row {r}"),
            (None, Some(c)) => write!(f, "column {c}"),
            (None, None) => write!(f, "input"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("malformed input at {location}: {message}")]
    MalformedInput { location: Location, message: String },

    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },

    #[error("unknown module `{0}`")]
    UnknownModule(String),

    #[error("module `{module}` takes {expected} argument(s), found {found}")]
    ArityMismatch { module: String, expected: usize, found: usize },

    #[error("argument {position} of `{module}`: expected {expected}, found {found}")]
    TypeMismatch { module: String, position: usize, expected: DataType, found: DataType },

    #[error("unknown column `{0}`")]
    UnknownColumn(String),

    #[error("column `{0}` is not numeric")]
    NonNumericColumn(String),

    #[error("`{0}` needs at least one non-empty row")]
    EmptyTable(String),

    #[error("module `{0}` is neural and cannot be executed symbolically")]
    NotExecutable(String),

    #[error("while evaluating `{path}`: {source}")]
    Evaluation { path: String, source: Box<Error> },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("instance too large for exhaustive enumeration: {0}")]
    InstanceTooLarge(String),

    #[error("no reasoning path found")]
    NoPathFound,

    #[error("invalid gold path `{path}`: {reason}")]
    InvalidGoldPath { path: String, reason: String },

    #[error("prompt slot `{0}` is missing")]
    MissingSlot(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("backend returned an empty generation")]
    EmptyGeneration,

    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),

    #[error("backend protocol error: {0}")]
    BackendProtocol(String),

    #[error("{hyps} hypotheses but {refs} reference sets")]
    LengthMismatch { hyps: usize, refs: usize },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Stable identifier used in structured error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::MalformedInput { .. } => "MalformedInput",
            Error::Syntax { .. } => "SyntaxError",
            Error::UnknownModule(_) => "UnknownModule",
            Error::ArityMismatch { .. } => "ArityMismatch",
            Error::TypeMismatch { .. } => "TypeMismatch",
            Error::UnknownColumn(_) => "UnknownColumn",
            Error::NonNumericColumn(_) => "NonNumericColumn",
            Error::EmptyTable(_) => "EmptyTable",
            Error::NotExecutable(_) => "NotExecutable",
            Error::Evaluation { source, .. } => source.kind(),
            Error::EmptyInput(_) => "EmptyInput",
            Error::InvalidInput(_) => "InvalidInput",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::InstanceTooLarge(_) => "InstanceTooLarge",
            Error::NoPathFound => "NoPathFound",
            Error::InvalidGoldPath { .. } => "InvalidGoldPath",
            Error::MissingSlot(_) => "MissingSlot",
            Error::Unsupported(_) => "Unsupported",
            Error::EmptyGeneration => "EmptyGeneration",
            Error::BackendUnavailable(_) => "BackendUnavailable",
            Error::BackendProtocol(_) => "BackendProtocolError",
            Error::LengthMismatch { .. } => "LengthMismatch",
            Error::Io(_) => "Io",
        }
    }

    /// The innermost error, skipping evaluation context wrappers.
    pub fn root_cause(&self) -> &Error {
        match self {
            Error::Evaluation { source, .. } => source.root_cause(),
            other => other,
        }
    }

    pub fn is_backend(&self) -> bool {
        matches!(self.root_cause(), Error::BackendUnavailable(_) | Error::BackendProtocol(_) | Error::EmptyGeneration)
    }

    pub fn record(&self) -> ErrorRecord {
        ErrorRecord { error: self.kind().to_string(), message: self.to_string() }
    }

    pub(crate) fn malformed(location: Location, message: impl Into<String>) -> Self {
        Error::MalformedInput { location, message: message.into() }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

/// Single-line structured error written by the command-line tool.
#[derive(Debug, Clone, Serialize)]
pub struct ErrorRecord {
    pub error: String,
    pub message: String,
}
