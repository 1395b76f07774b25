//! Classic classifiers behind one fit/predict contract.
//!
//! The kernel SVM is solved with SMO ([`smo_solve`]); the other families are
//! compact reference implementations. Margin models are made multiclass by
//! one-vs-rest, kNN, naive Bayes and trees are natively multiclass.

mod knn;
mod linear;
mod model;
mod nb;
mod params;
mod smo;
mod tree;

pub mod kernel;

pub use kernel::{gram_matrix, kernel_eval, Kernel};
pub use model::{fit_classic, ClassicLearner, ModelState, TrainedModel, MODEL_FORMAT_VERSION};
pub use params::{default_grid, expand_grid, Family, GridDecl, ModelSpec, ParamSet, ParamValue};
pub use smo::{smo_solve, svm_decision, SmoOptions, SvmModel};
pub use tree::{Tree, TreeParams};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClassicError {
    #[error("training labels contain a single class")]
    SingleClassInput,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("linear system is singular after regularization retries")]
    SingularSystem,
    #[error("invalid parameter `{key}`: {reason}")]
    InvalidParam { key: String, reason: String },
    #[error("unknown family `{0}`")]
    UnknownFamily(String),
    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("label count {labels} does not match row count {rows}")]
    LabelMismatch { labels: usize, rows: usize },
    #[error("non-finite value in input")]
    NonFinite,
    #[error("model document: {0}")]
    Format(String),
}

impl ClassicError {
    pub fn code(&self) -> &'static str {
        match self {
            ClassicError::SingleClassInput => "SINGLE_CLASS_INPUT",
            ClassicError::DimensionMismatch { .. } => "DIMENSION_MISMATCH",
            ClassicError::SingularSystem => "SINGULAR_SYSTEM",
            ClassicError::InvalidParam { .. } => "INVALID_PARAM",
            ClassicError::UnknownFamily(_) => "UNKNOWN_FAMILY",
            ClassicError::TooFewSamples { .. } => "TOO_FEW_SAMPLES",
            ClassicError::LabelMismatch { .. } => "LABEL_MISMATCH",
            ClassicError::NonFinite => "NON_FINITE",
            ClassicError::Format(_) => "MODEL_FORMAT",
        }
    }
}

/// Index of the largest value; ties go to the earliest index.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}
