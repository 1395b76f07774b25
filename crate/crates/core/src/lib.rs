//! Multivariate financial time-series classification.
//!
//! The crate is organised around the stages of a classification experiment:
//!
//! - [`dataio`]: CSV ingestion, returns, quantile labels, SMA/GARCH features, augmentation
//! - [`pipeline`]: standardization, expanding-window folds, grid search with leak policies
//! - [`classic`]: the classic model zoo behind one fit/predict contract (SMO kernel SVM et al.)
//! - [`neural`]: dense tensors, a small conv net and an LSTM with hand-written gradients
//! - [`evalbt`]: confusion matrices, Sharpe ratio, signal backtests
//! - [`bench`]: run configuration, synthetic data, scenario and size-sweep drivers, plots

pub mod bench;
pub mod classic;
pub mod dataio;
pub mod error;
pub mod evalbt;
pub mod matrix;
pub mod neural;
pub mod pipeline;
pub mod seed;

pub use error::{Error, Result};
pub use matrix::Matrix;
