//! Classification metrics, Sharpe ratio, signal backtests and small
//! portfolio arithmetic.

mod backtest;
mod finance;
mod metrics;

pub use backtest::{backtest, cumulative, write_curves_csv, BacktestReport};
pub use finance::{portfolio_variance, sharpe_ratio, trade_profit, trade_profit_total};
pub use metrics::{
    classification_report, confusion_matrix, macro_f1, ClassMetrics, ClassificationReport,
    ConfusionMatrix, Metric,
};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("label {0} not in class order")]
    UnknownLabel(i64),
    #[error("confusion matrix is empty")]
    EmptyMatrix,
    #[error("zero volatility: standard deviation of excess returns is 0")]
    ZeroVolatility,
    #[error("need at least {need} observations, got {got}")]
    TooShort { need: usize, got: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("covariance matrix is not symmetric at ({0}, {1})")]
    Asymmetric(usize, usize),
    #[error("invalid signal {0}; expected -1, 0 or 1")]
    InvalidSignal(i64),
}

impl EvalError {
    pub fn code(&self) -> &'static str {
        match self {
            EvalError::LengthMismatch { .. } => "LENGTH_MISMATCH",
            EvalError::UnknownLabel(_) => "UNKNOWN_LABEL",
            EvalError::EmptyMatrix => "EMPTY_MATRIX",
            EvalError::ZeroVolatility => "ZERO_VOLATILITY",
            EvalError::TooShort { .. } => "TOO_SHORT",
            EvalError::DimensionMismatch(_) => "DIMENSION_MISMATCH",
            EvalError::Asymmetric(..) => "ASYMMETRIC",
            EvalError::InvalidSignal(_) => "INVALID_SIGNAL",
        }
    }
}
