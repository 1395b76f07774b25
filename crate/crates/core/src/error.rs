use thiserror::Error;

use crate::bench::BenchError;
use crate::classic::ClassicError;
use crate::dataio::DataError;
use crate::evalbt::EvalError;
use crate::neural::NeuralError;
use crate::pipeline::PipelineError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Crate-level error, one variant per subsystem.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Classic(#[from] ClassicError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Bench(#[from] BenchError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Process exit category used by the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    Config = 2,
    Data = 3,
    Numeric = 4,
}

impl Error {
    pub fn exit_kind(&self) -> ExitKind {
        match self {
            Error::Data(_) | Error::Io(_) | Error::Json(_) => ExitKind::Data,
            Error::Pipeline(e) => match e {
                PipelineError::FitFailure { .. } => ExitKind::Numeric,
                PipelineError::InvalidSplits(_) | PipelineError::EmptyGrid => ExitKind::Config,
                _ => ExitKind::Data,
            },
            Error::Classic(e) => match e {
                ClassicError::InvalidParam { .. } | ClassicError::UnknownFamily(_) => ExitKind::Config,
                ClassicError::DimensionMismatch { .. }
                | ClassicError::LabelMismatch { .. }
                | ClassicError::Format(_)
                | ClassicError::SingleClassInput
                | ClassicError::TooFewSamples { .. } => ExitKind::Data,
                ClassicError::SingularSystem | ClassicError::NonFinite => ExitKind::Numeric,
            },
            Error::Neural(e) => match e {
                NeuralError::InvalidConfig(_) | NeuralError::InvalidP(_) => ExitKind::Config,
                NeuralError::NonFinite(_) | NeuralError::DegenerateBatch => ExitKind::Numeric,
                _ => ExitKind::Data,
            },
            Error::Eval(e) => match e {
                EvalError::ZeroVolatility => ExitKind::Numeric,
                _ => ExitKind::Data,
            },
            Error::Bench(e) => match e {
                BenchError::Config(_) => ExitKind::Config,
                BenchError::GradCheck(_) => ExitKind::Numeric,
                BenchError::EmptyData | BenchError::Format(_) => ExitKind::Data,
            },
        }
    }

    /// Short stable identifier for machine-readable error lines.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Data(e) => e.code(),
            Error::Pipeline(e) => e.code(),
            Error::Classic(e) => e.code(),
            Error::Neural(e) => e.code(),
            Error::Eval(e) => e.code(),
            Error::Bench(e) => e.code(),
            Error::Io(_) => "IO",
            Error::Json(_) => "JSON",
        }
    }
}
