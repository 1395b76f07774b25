//! Standardization, expanding-window cross-validation and grid search.
//!
//! Two leak policies are supported. [`Mode::PaperFaithful`] computes the
//! scaler, label quantiles and SMA warm-up fill from the whole series, as the
//! reference notebooks do. [`Mode::LeakFree`] computes them from past rows
//! only: per fold for the scaler and quantiles, causally for features.

mod dataset;
mod grid;
mod scaler;
mod split;

pub use dataset::{Dataset, FeatureSpec, LabelSource, LabelSpec};
pub use grid::{grid_search, CandidateResult, GridBest, GridResult, Learner};
pub use scaler::Scaler;
pub use split::{time_series_split, Fold, FoldPlan};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataio::DataError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    PaperFaithful,
    LeakFree,
}

impl Mode {
    pub fn tag(self) -> &'static str {
        match self {
            Mode::PaperFaithful => "paper",
            Mode::LeakFree => "leakfree",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "paper" | "paper_faithful" => Ok(Mode::PaperFaithful),
            "leakfree" | "leak_free" => Ok(Mode::LeakFree),
            other => Err(format!("unknown mode `{other}` (expected paper|leakfree)")),
        }
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("dimension mismatch: expected {expected} columns, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("too few samples: n = {n} with k = {k} needs n >= {need}")]
    TooFewSamples { n: usize, k: usize, need: usize },
    #[error("n_splits must be at least 2 (got {0})")]
    InvalidSplits(usize),
    #[error("empty hyperparameter grid")]
    EmptyGrid,
    #[error("candidate {candidate} failed on fold {fold}")]
    FitFailure { candidate: usize, fold: usize },
    #[error("dataset is not labeled")]
    Unlabeled,
    #[error(transparent)]
    Data(#[from] DataError),
}

impl PipelineError {
    pub fn code(&self) -> &'static str {
        match self {
            PipelineError::DimensionMismatch { .. } => "DIMENSION_MISMATCH",
            PipelineError::TooFewSamples { .. } => "TOO_FEW_SAMPLES",
            PipelineError::InvalidSplits(_) => "INVALID_SPLITS",
            PipelineError::EmptyGrid => "EMPTY_GRID",
            PipelineError::FitFailure { .. } => "FIT_FAILURE",
            PipelineError::Unlabeled => "UNLABELED",
            PipelineError::Data(e) => e.code(),
        }
    }
}
