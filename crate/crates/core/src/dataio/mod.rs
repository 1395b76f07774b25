//! Data ingestion, return computation, labeling, features and augmentation.

mod augment;
mod csv_io;
mod features;
mod frame;
mod garch;
mod labels;
mod returns;

pub use augment::{augment_jitter, augment_window_slice};
pub use csv_io::{load_csv, write_csv, ColumnSchema};
pub use features::{sma, SmaWarmup};
pub use frame::Frame;
pub use garch::{fit_garch11, garch_log_likelihood, garch_variance, GarchParams};
pub use labels::{
    apply_thresholds, label_by_quantiles, quantile_type7, shift_labels, shift_series,
    LabelThresholds,
};
pub use returns::{compute_returns, ReturnKind};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DataError {
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("unparsable cell at row {row}, column `{col}`")]
    UnparsableCell { row: usize, col: String },
    #[error("timestamps are not strictly increasing (duplicate at {0})")]
    NonMonotonicTimestamps(String),
    #[error("non-positive price at index {0}")]
    NonPositivePrice(usize),
    #[error("empty series")]
    EmptySeries,
    #[error("series too short: need at least {need}, got {got}")]
    TooShort { need: usize, got: usize },
    #[error("invalid quantiles ({0}, {1})")]
    InvalidQuantiles(f64, f64),
    #[error("window {window} larger than series length {len}")]
    WindowTooLarge { window: usize, len: usize },
    #[error("invalid GARCH parameters: {0}")]
    InvalidParams(String),
    #[error("GARCH fit did not converge after {0} iterations")]
    DidNotConverge(usize),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("slice [{start}, {start}+{len}) out of range for length {n}")]
    OutOfRange { start: usize, len: usize, n: usize },
    #[error("series `{name}` has length {got}, expected {expected}")]
    LengthMismatch { name: String, expected: usize, got: usize },
    #[error("label {0} outside {{-1, 0, 1}}")]
    InvalidLabel(i64),
    #[error("csv: {0}")]
    Csv(String),
}

impl DataError {
    pub fn code(&self) -> &'static str {
        match self {
            DataError::MissingColumn(_) => "MISSING_COLUMN",
            DataError::UnparsableCell { .. } => "UNPARSABLE_CELL",
            DataError::NonMonotonicTimestamps(_) => "NON_MONOTONIC_TIMESTAMPS",
            DataError::NonPositivePrice(_) => "NON_POSITIVE_PRICE",
            DataError::EmptySeries => "EMPTY_SERIES",
            DataError::TooShort { .. } => "TOO_SHORT",
            DataError::InvalidQuantiles(..) => "INVALID_QUANTILES",
            DataError::WindowTooLarge { .. } => "WINDOW_TOO_LARGE",
            DataError::InvalidParams(_) => "INVALID_PARAMS",
            DataError::DidNotConverge(_) => "DID_NOT_CONVERGE",
            DataError::DegenerateInput(_) => "DEGENERATE_INPUT",
            DataError::OutOfRange { .. } => "OUT_OF_RANGE",
            DataError::LengthMismatch { .. } => "LENGTH_MISMATCH",
            DataError::InvalidLabel(_) => "INVALID_LABEL",
            DataError::Csv(_) => "CSV",
        }
    }
}
