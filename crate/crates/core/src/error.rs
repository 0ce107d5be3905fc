use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: malformed csv: {message}")]
    MalformedCsv {
        path: String,
        line: u64,
        message: String,
    },
    #[error("{path}: missing day between {before} and {after}")]
    GapInDates {
        path: String,
        before: String,
        after: String,
    },
    #[error("{path}:{line}: negative cumulative count {value} for {country}")]
    NegativeCumulative {
        path: String,
        line: u64,
        country: String,
        value: i64,
    },
    #[error("{path}: header {header:?} has no canonical static feature name")]
    UnmappableHeader { path: String, header: String },
    #[error("{path}: invalid value {value} for {feature} ({country})")]
    InvalidStaticValue {
        path: String,
        country: String,
        feature: String,
        value: f64,
    },
    #[error("no country is present in every input table")]
    EmptyIntersection,
    #[error("series tables disagree on the date axis: {0}")]
    SeriesLengthMismatch(String),
    #[error("no country has enough history: need {needed} days, longest is {longest}")]
    SeriesTooShort { needed: usize, longest: usize },
    #[error("training row set is empty")]
    EmptyTrainingSet,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("too few samples: need at least {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("zero variance in {0}")]
    ZeroVariance(&'static str),
    #[error("training target is constant")]
    DegenerateTarget,
    #[error("training diverged: non-finite loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("input has {got} columns, model mask expects {expected}")]
    MaskMismatch { expected: usize, got: usize },
    #[error("invalid selection mask: {0}")]
    InvalidMask(String),
    #[error("every grid cell failed")]
    AllCellsFailed,
    #[error("unknown country {0:?}")]
    UnknownCountry(String),
    #[error("country {country:?} has {days} days, needs at least {needed}")]
    InsufficientHistory {
        country: String,
        days: usize,
        needed: usize,
    },
    #[error("missing sweep cells: {0}")]
    MissingCells(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("unsupported model document version {0}")]
    UnsupportedVersion(u32),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Failures confined to one fit, recorded per repetition rather than
    /// aborting a whole cell.
    pub fn is_training_failure(&self) -> bool {
        matches!(
            self,
            Error::NonFiniteLoss { .. }
                | Error::DegenerateTarget
                | Error::ZeroVariance(_)
                | Error::TooFewSamples { .. }
                | Error::EmptyTrainingSet
        )
    }

    /// Whether the error comes from the input data rather than from
    /// configuration or training.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::MalformedCsv { .. }
                | Error::GapInDates { .. }
                | Error::NegativeCumulative { .. }
                | Error::UnmappableHeader { .. }
                | Error::InvalidStaticValue { .. }
                | Error::EmptyIntersection
                | Error::SeriesLengthMismatch(_)
                | Error::SeriesTooShort { .. }
                | Error::UnknownCountry(_)
                | Error::InsufficientHistory { .. }
                | Error::Io { .. }
                | Error::Json { .. }
        )
    }
}
