use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("disjoint label spaces")]
    DisjointLabels,

    #[error("unknown class in restriction: {0}")]
    UnknownClass(u64),

    #[error("labels required: dataset `{0}` is unlabeled")]
    LabelsRequired(String),

    #[error("empty view: no rows left after restriction")]
    EmptyView,

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid label space: {0}")]
    InvalidLabelSpace(String),

    #[error("invalid dataset `{name}`: {reason}")]
    InvalidDataset { name: String, reason: String },

    #[error("row-count mismatch in `{name}`: {what} has {got} rows, expected {expected}")]
    RowCountMismatch {
        name: String,
        what: &'static str,
        got: usize,
        expected: usize,
    },

    #[error("rows must sum to 1: dataset `{name}` row {row} sums to {sum}")]
    RowSum { name: String, row: usize, sum: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("need at least two samples")]
    NeedTwoSamples,

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    Asymmetric(f64),

    #[error("single class present; need at least two")]
    SingleClass,

    #[error("singular system; use ridge > 0")]
    Singular,

    #[error("too few instances to split: {0} < 10")]
    TooFewToSplit(usize),

    #[error("invalid split fractions: {0}")]
    InvalidSplit(String),

    #[error("bad magic in tensor file {0}")]
    BadMagic(PathBuf),

    #[error("unknown dtype code {code} in tensor file {path}")]
    UnknownDtype { path: PathBuf, code: u8 },

    #[error("unsupported tensor rank {ndim} in {path}")]
    BadRank { path: PathBuf, ndim: u8 },

    #[error("truncated tensor file {0}")]
    Truncated(PathBuf),

    #[error("trailing bytes after payload in tensor file {0}")]
    TrailingBytes(PathBuf),

    #[error("tensor dtype mismatch in {path}: expected {expected}")]
    DtypeMismatch { path: PathBuf, expected: &'static str },

    #[error("manifest error: {0}")]
    Manifest(String),

    #[error("{method} requires {what}")]
    MissingModality { method: String, what: &'static str },

    #[error("measurement for `{target}` lacks feature `{method}`")]
    MissingFeature { target: String, method: String },

    #[error("unknown method `{0}`")]
    UnknownMethod(String),

    #[error("need ≥ 2 calibration shifts for {0}")]
    NeedCalibration(String),

    #[error("calibration/validation leakage: {0}")]
    Leakage(String),

    #[error("infeasible task: {0}")]
    Infeasible(String),

    #[error("invalid predictor file: {0}")]
    BadPredictor(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by how the tool was invoked rather than by the data.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Leakage(_) | Error::UnknownMethod(_) | Error::InvalidArgument(_)
        )
    }
}
