//! Dense tensors, ConvTimeNet-lite and an LSTM classifier with hand-written
//! backward passes, Adam, gradient checking and checkpoints.
//!
//! Conv inputs are `(batch, channels, time)`; LSTM inputs are one
//! `(time, features)` tensor per sequence.

mod adam;
mod checkpoint;
mod convnet;
mod gradcheck;
pub mod layers;
mod lstm;
mod tensor;
mod train;
mod transfer;

pub use adam::Adam;
pub use checkpoint::{
    decode_f64_le, encode_f64_le, load_checkpoint, save_checkpoint, CheckpointManifest, TensorEntry,
    CHECKPOINT_VERSION,
};
pub use convnet::{ConvCache, ConvTimeNetLite, CONV1_CHANNELS, CONV2_CHANNELS};
pub use gradcheck::{gradcheck_convnet, gradcheck_lstm, relative_error, GradCheckReport, TensorCheck, FD_STEP, REL_FLOOR};
pub use lstm::{LstmClassifier, LstmTrace, GATE_WEIGHTS};
pub use tensor::Tensor;
pub use train::{
    decode_label, encode_label, predict_convnet, predict_lstm, train_convnet, ConvTrainer, train_lstm, windows_to_sequences,
    windows_to_tensor, NetConfig, NetKind, NeuralLearner,
};
pub use transfer::{fine_tune, frame_sequences, pretrain, train_from_scratch, transfer_learn, TransferConfig, TransferResult};

use thiserror::Error;

/// Named parameter access shared by the optimizer, checkpoints and the
/// gradient checker. Trainable tensors are listed in gradient order.
pub trait Parameters {
    fn kind(&self) -> &'static str;
    fn trainable(&self) -> Vec<(String, &Tensor)>;
    fn trainable_mut(&mut self) -> Vec<(String, &mut Tensor)>;
    fn buffers(&self) -> Vec<(String, &Tensor)> {
        vec![]
    }
    fn buffers_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        vec![]
    }
    fn frozen(&self) -> Vec<String> {
        vec![]
    }
    fn hyperparameters(&self) -> serde_json::Value;
    fn from_hyperparameters(h: &serde_json::Value) -> Result<Self, NeuralError>
    where
        Self: Sized;
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NeuralError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite values in {0}")]
    NonFinite(String),
    #[error("batch statistics need at least two values per channel")]
    DegenerateBatch,
    #[error("dropout probability must lie in [0, 1), got {0}")]
    InvalidP(f64),
    #[error("target index {0} out of range")]
    BadTargetIndex(usize),
    #[error("class sets differ: {0}")]
    ClassMismatch(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("no training samples")]
    EmptyData,
    #[error("invalid network config: {0}")]
    InvalidConfig(String),
    #[error("data: {0}")]
    Data(String),
}

impl NeuralError {
    pub fn code(&self) -> &'static str {
        match self {
            NeuralError::ShapeMismatch(_) => "SHAPE_MISMATCH",
            NeuralError::NonFinite(_) => "NON_FINITE",
            NeuralError::DegenerateBatch => "DEGENERATE_BATCH",
            NeuralError::InvalidP(_) => "INVALID_DROPOUT",
            NeuralError::BadTargetIndex(_) => "BAD_TARGET_INDEX",
            NeuralError::ClassMismatch(_) => "CLASS_MISMATCH",
            NeuralError::Checkpoint(_) => "CHECKPOINT",
            NeuralError::EmptyData => "EMPTY_DATA",
            NeuralError::InvalidConfig(_) => "INVALID_CONFIG",
            NeuralError::Data(_) => "DATA",
        }
    }
}
