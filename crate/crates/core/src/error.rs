use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("row {row}, column {column}: cannot parse {value:?} as a finite number")]
    NonNumeric {
        row: usize,
        column: usize,
        value: String,
    },

    #[error("row {row}: expected {expected} fields, found {found}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("fewer than 2 classes in label column")]
    TooFewClasses,

    #[error("need at least {needed} rows, found {found}")]
    TooFewRows { needed: usize, found: usize },

    #[error("table has no feature columns")]
    NoFeatures,

    #[error("unknown label {0:?}")]
    UnknownLabel(String),

    #[error("fold count {k} out of range [2, {rows}]")]
    FoldCount { k: usize, rows: usize },

    #[error("{what}: expected {expected}, found {found}")]
    Shape {
        what: &'static str,
        expected: String,
        found: String,
    },

    #[error("value {value} outside the open domain ({lo}, {hi}) of the inverse transfer")]
    Domain { value: f64, lo: f64, hi: f64 },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("non-finite activation at iteration {iteration}")]
    NonFinite { iteration: usize },

    #[error("non-finite regression target for feature {feature}")]
    NonFiniteTarget { feature: usize },

    #[error("singular value decomposition did not converge")]
    SvdFailed,

    #[error("operation requires the recurrence-aware decision head")]
    UnsupportedHead,

    #[error("model format version {found} is not supported (this build reads up to {supported})")]
    ModelVersion { found: u32, supported: u32 },

    #[error("malformed model file: {0}")]
    ModelFormat(String),

    #[error("empty parameter grid: {0}")]
    EmptyGrid(&'static str),

    #[error("label vectors must be non-empty and of equal length (got {left} and {right})")]
    LabelLength { left: usize, right: usize },
}

impl Error {
    /// Stable snake_case tag for machine-readable error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Csv(_) => "csv",
            Error::NonNumeric { .. } => "non_numeric",
            Error::RaggedRow { .. } => "ragged_row",
            Error::TooFewClasses => "too_few_classes",
            Error::TooFewRows { .. } => "too_few_rows",
            Error::NoFeatures => "no_features",
            Error::UnknownLabel(_) => "unknown_label",
            Error::FoldCount { .. } => "fold_count",
            Error::Shape { .. } => "shape",
            Error::Domain { .. } => "domain",
            Error::InvalidParameter { .. } => "invalid_parameter",
            Error::NonFinite { .. } => "non_finite",
            Error::NonFiniteTarget { .. } => "non_finite_target",
            Error::SvdFailed => "svd_failed",
            Error::UnsupportedHead => "unsupported_head",
            Error::ModelVersion { .. } => "model_version",
            Error::ModelFormat(_) => "model_format",
            Error::EmptyGrid(_) => "empty_grid",
            Error::LabelLength { .. } => "label_length",
        }
    }

    pub(crate) fn shape(what: &'static str, expected: impl ToString, found: impl ToString) -> Self {
        Error::Shape {
            what,
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }

    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
