use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::train::{encode_label, predict_lstm, train_lstm, windows_to_sequences};
use super::{LstmClassifier, NeuralError, Tensor};
use crate::dataio::Frame;
use crate::pipeline::{Dataset, FeatureSpec, LabelSpec, Mode, Scaler};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransferConfig {
    pub hidden: usize,
    pub window: usize,
    pub source_epochs: usize,
    pub target_epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Fine-tune every parameter in phase 2 instead of freezing gate weights.
    pub paper_alt: bool,
    pub seed: u64,
}

impl Default for TransferConfig {
    fn default() -> Self {
        Self {
            hidden: 16,
            window: 5,
            source_epochs: 20,
            target_epochs: 20,
            batch_size: 32,
            lr: 1e-3,
            paper_alt: false,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TransferResult {
    pub model: LstmClassifier,
    pub source_losses: Vec<f64>,
    pub target_losses: Vec<f64>,
    pub target_accuracy: f64,
}

/// Standardised windows and class indices from a labeled (or
/// label-derivable) frame.
pub fn frame_sequences(frame: &Frame, window: usize) -> Result<(Vec<Tensor>, Vec<usize>), NeuralError> {
    let ds = Dataset::from_frame(frame, &FeatureSpec::default(), &LabelSpec::default(), Mode::PaperFaithful, 2)
        .map_err(|e| NeuralError::Data(e.to_string()))?;
    let (_, x) = Scaler::fit_transform(&ds.features);
    let seqs = windows_to_sequences(&x, window);
    let y = ds.labels.iter().map(|&l| encode_label(l)).collect::<Result<Vec<_>, _>>()?;
    // drop rows whose window reaches before the start
    let skip = window.saturating_sub(1).min(seqs.len());
    Ok((seqs[skip..].to_vec(), y[skip..].to_vec()))
}

fn class_set(y: &[usize]) -> BTreeSet<usize> {
    y.iter().copied().collect()
}

fn accuracy(model: &LstmClassifier, seqs: &[Tensor], y: &[usize]) -> Result<f64, NeuralError> {
    let pred = predict_lstm(model, seqs)?;
    Ok(pred.iter().zip(y).filter(|(a, b)| a == b).count() as f64 / y.len().max(1) as f64)
}

/// Phase 1: trains every parameter on the source frame.
pub fn pretrain(source: &Frame, cfg: &TransferConfig) -> Result<(LstmClassifier, Vec<f64>), NeuralError> {
    let (xs, ys) = frame_sequences(source, cfg.window)?;
    let mut model = LstmClassifier::new(xs[0].shape()[1], cfg.hidden, 3, cfg.seed);
    let losses = train_lstm(&mut model, &xs, &ys, cfg.source_epochs, cfg.batch_size, cfg.lr, cfg.seed)?;
    Ok((model, losses))
}

/// Phase 2: freezes the four gate weight matrices (unless `paper_alt`) and
/// fine-tunes the rest on the target frame with a fresh optimizer. The
/// returned model has an empty frozen set.
pub fn fine_tune(model: LstmClassifier, target: &Frame, cfg: &TransferConfig) -> Result<TransferResult, NeuralError> {
    let (xt, yt) = frame_sequences(target, cfg.window)?;
    if xt[0].shape()[1] != model.input_dim {
        return Err(NeuralError::ShapeMismatch("source and target feature counts differ".into()));
    }
    let mut model = model;
    if !cfg.paper_alt {
        model.freeze_gate_weights();
    }
    let target_losses =
        train_lstm(&mut model, &xt, &yt, cfg.target_epochs, cfg.batch_size, cfg.lr, cfg.seed ^ 0x7467)?;
    let target_accuracy = accuracy(&model, &xt, &yt)?;
    model.frozen.clear();
    Ok(TransferResult { model, source_losses: Vec::new(), target_losses, target_accuracy })
}

/// [`pretrain`] on `source`, then [`fine_tune`] on `target`. Both frames
/// must produce the same class set.
pub fn transfer_learn(source: &Frame, target: &Frame, cfg: &TransferConfig) -> Result<TransferResult, NeuralError> {
    let (_, ys) = frame_sequences(source, cfg.window)?;
    let (_, yt) = frame_sequences(target, cfg.window)?;
    if class_set(&ys) != class_set(&yt) {
        return Err(NeuralError::ClassMismatch(format!(
            "source classes {:?}, target classes {:?}",
            class_set(&ys),
            class_set(&yt)
        )));
    }
    let (model, source_losses) = pretrain(source, cfg)?;
    let mut result = fine_tune(model, target, cfg)?;
    result.source_losses = source_losses;
    Ok(result)
}

/// The baseline for [`transfer_learn`]: a fresh model trained on the target
/// alone with the phase-2 budget.
pub fn train_from_scratch(target: &Frame, cfg: &TransferConfig) -> Result<TransferResult, NeuralError> {
    let (xt, yt) = frame_sequences(target, cfg.window)?;
    let mut model = LstmClassifier::new(xt[0].shape()[1], cfg.hidden, 3, cfg.seed);
    let target_losses =
        train_lstm(&mut model, &xt, &yt, cfg.target_epochs, cfg.batch_size, cfg.lr, cfg.seed ^ 0x7467)?;
    let target_accuracy = accuracy(&model, &xt, &yt)?;
    Ok(TransferResult { model, source_losses: Vec::new(), target_losses, target_accuracy })
}
