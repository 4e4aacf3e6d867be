use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the core library.
///
/// Variants are split into user/input errors and internal invariant
/// failures; see [`Error::is_internal`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv row {row}, column {column}: {message}")]
    Cell { row: usize, column: usize, message: String },

    #[error("csv row {row} has {found} columns, expected {expected}")]
    RaggedRow { row: usize, expected: usize, found: usize },

    #[error("csv: {0}")]
    Csv(String),

    #[error("dataset has fewer than 2 classes (found {0})")]
    TooFewClasses(usize),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("sample has {got} features, expected at least {expected}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid tree: {0}")]
    InvalidTree(String),

    #[error("tree has no comparators")]
    NoComparators,

    #[error("chromosome has {got} genes, tree has {expected} comparators")]
    ChromosomeLength { expected: usize, got: usize },

    #[error("gene {index} out of bounds: {message}")]
    GeneOutOfBounds { index: usize, message: String },

    #[error("threshold code {threshold} out of range for {precision}-bit comparator")]
    ThresholdOutOfRange { precision: u32, threshold: u64 },

    #[error("area lut: {0}")]
    Lut(String),

    #[error("area lut has no entry for precision {precision}, threshold {threshold}")]
    LutMissing { precision: u32, threshold: u64 },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("selection: {0}")]
    Selection(String),

    #[error("netlist disagrees with quantized tree on {mismatches} of {rows} samples")]
    Equivalence { mismatches: usize, rows: usize },

    #[error("internal invariant violated: {0}")]
    Internal(String),
}

impl Error {
    /// True for failures that indicate a bug rather than bad input.
    pub fn is_internal(&self) -> bool {
        matches!(self, Error::Equivalence { .. } | Error::Internal(_))
    }

    /// Stable short name, used on the wire.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Cell { .. } | Error::RaggedRow { .. } | Error::Csv(_) => "csv",
            Error::TooFewClasses(_) | Error::EmptyDataset => "dataset",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::InvalidTree(_) => "invalid_tree",
            Error::NoComparators => "no_comparators",
            Error::ChromosomeLength { .. } | Error::GeneOutOfBounds { .. } => "chromosome",
            Error::ThresholdOutOfRange { .. } => "threshold",
            Error::Lut(_) | Error::LutMissing { .. } => "area_lut",
            Error::Json(_) => "json",
            Error::Selection(_) => "selection",
            Error::Equivalence { .. } => "equivalence",
            Error::Internal(_) => "internal",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
