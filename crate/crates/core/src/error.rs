use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("label partition has an empty {0} subset")]
    EmptyPartition(&'static str),
    #[error("label `{0}` appears in both the normal and the fault subset")]
    Overlap(String),
    #[error("label `{0}` is listed more than once")]
    DuplicateLabel(String),
    #[error("label partition does not cover `{0}`")]
    UncoveredLabel(String),
    #[error("unknown label `{label}`{}", fmt_line(*.line))]
    UnknownLabel { label: String, line: Option<usize> },
    #[error("record `{0}` has no true label")]
    MissingLabel(String),
    #[error("calibration set is empty")]
    EmptyCalibration,
    #[error("evaluation set is empty")]
    EmptyEvaluation,
    #[error("no outcomes with a normal true label")]
    NoNormalSamples,
    #[error("record `{id}` has {got} scores, expected {expected}")]
    ScoreArity {
        id: String,
        got: usize,
        expected: usize,
    },
    #[error("non-finite value in `{0}`")]
    NonFinite(String),
    #[error("significance level {0} is outside (0, 1)")]
    AlphaOutOfRange(String),
    #[error("invalid alpha `{0}`: expected a decimal with at most 18 fractional digits")]
    AlphaFormat(String),
    #[error("need at least 2 records to split, got {0}")]
    TooFewRecords(usize),
    #[error("training data holds a single class")]
    DegenerateData,
    #[error("feature dimension {got} does not match model dimension {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("label space of the calibration artifact differs from the score file")]
    LabelSpaceMismatch,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("parse error{}: {msg}", fmt_line(*.line))]
    ParseError { line: Option<usize>, msg: String },
    #[error("non-finite score `{value}`{}", fmt_line(Some(*.line)))]
    NonFiniteScore { line: usize, value: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn fmt_line(line: Option<usize>) -> String {
    match line {
        Some(l) => format!(" at line {l}"),
        None => String::new(),
    }
}

impl Error {
    /// Stable machine-readable identifier, printed by the CLI.
    pub fn code(&self) -> &'static str {
        match self {
            Error::EmptyPartition(_) => "EmptyPartition",
            Error::Overlap(_) => "Overlap",
            Error::DuplicateLabel(_) => "DuplicateLabel",
            Error::UncoveredLabel(_) => "UncoveredLabel",
            Error::UnknownLabel { .. } => "UnknownLabel",
            Error::MissingLabel(_) => "MissingLabel",
            Error::EmptyCalibration => "EmptyCalibration",
            Error::EmptyEvaluation => "EmptyEvaluation",
            Error::NoNormalSamples => "NoNormalSamples",
            Error::ScoreArity { .. } => "ScoreArity",
            Error::NonFinite(_) => "NonFinite",
            Error::AlphaOutOfRange(_) => "AlphaOutOfRange",
            Error::AlphaFormat(_) => "AlphaFormat",
            Error::TooFewRecords(_) => "TooFewRecords",
            Error::DegenerateData => "DegenerateData",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::LabelSpaceMismatch => "LabelSpaceMismatch",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::ParseError { .. } => "ParseError",
            Error::NonFiniteScore { .. } => "NonFiniteScore",
            Error::Io { .. } => "IoError",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(line: Option<usize>, msg: impl Into<String>) -> Self {
        Error::ParseError {
            line,
            msg: msg.into(),
        }
    }
}
