use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid cost matrix: {0}")]
    InvalidCostMatrix(String),

    #[error("label {label} is outside 1..={k}")]
    LabelOutOfRange { label: usize, k: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("vector does not sum to zero (sum {sum:e}); not a margin vector")]
    NotMarginVector { sum: f64 },

    #[error("probability vector is not normalized (sum {sum})")]
    NotNormalized { sum: f64 },

    #[error("empty data set")]
    EmptyData,

    #[error("all sample weights are zero")]
    ZeroWeights,

    /// The weak learner made no costly mistakes, so the step size is unbounded.
    #[error("weak learner makes no costly errors; step size is unbounded")]
    NoErrors,

    /// No positive step size decreases the loss.
    #[error("weak learner too weak: no positive step size reduces the loss")]
    TooWeak,

    #[error("classes {classes:?} have fewer than {folds} samples")]
    ClassTooSmall { classes: Vec<usize>, folds: usize },

    #[error("class {0} has no samples in the confusion matrix")]
    EmptyConfusionRow(usize),

    #[error("baseline classifier made no errors; its confusion matrix yields a zero cost matrix (fall back to 0|1 costs)")]
    PerfectBaseline,

    #[error("no positive samples retained for calibration ({excluded} excluded)")]
    NoCalibrationPositives { excluded: usize },

    #[error("{}: row {row}, column {column}: {message}", path.display())]
    Parse {
        path: PathBuf,
        row: usize,
        column: usize,
        message: String,
    },

    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },

    #[error("unsupported model format version {found} (expected {expected})")]
    VersionMismatch { found: u64, expected: u64 },

    #[error("model file is truncated")]
    Truncated,

    #[error("model checksum mismatch: recorded {recorded}, computed {computed}")]
    Checksum { recorded: String, computed: String },

    #[error("malformed model: {0}")]
    Model(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
