use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{Adam, ConvTimeNetLite, LstmClassifier, NeuralError, Parameters, Tensor};
use crate::classic::{ParamSet, ParamValue};
use crate::pipeline::Learner;
use crate::{seed, Matrix};

/// Maps labels `-1, 0, 1` to class indices `0, 1, 2`.
pub fn encode_label(label: i8) -> Result<usize, NeuralError> {
    match label {
        -1..=1 => Ok((label + 1) as usize),
        other => Err(NeuralError::BadTargetIndex(other as usize)),
    }
}

pub fn decode_label(index: usize) -> i8 {
    index as i8 - 1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub dropout: f64,
    /// Time steps per sample; 1 treats each feature row as a single step.
    pub window: usize,
    pub hidden: usize,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self { epochs: 100, batch_size: 32, lr: 1e-5, dropout: 0.5, window: 1, hidden: 32 }
    }
}

impl NetConfig {
    /// Overrides fields named in `params` (`epochs`, `batch_size`, `lr`,
    /// `dropout`, `window`, `hidden`).
    pub fn with_params(mut self, params: &ParamSet) -> Result<Self, NeuralError> {
        for (k, v) in params {
            let ParamValue::Num(x) = v else {
                return Err(NeuralError::InvalidConfig(format!("`{k}` must be numeric")));
            };
            match k.as_str() {
                "epochs" => self.epochs = *x as usize,
                "batch_size" => self.batch_size = (*x as usize).max(1),
                "lr" => self.lr = *x,
                "dropout" => self.dropout = *x,
                "window" => self.window = (*x as usize).max(1),
                "hidden" => self.hidden = (*x as usize).max(1),
                other => return Err(NeuralError::InvalidConfig(format!("unknown network parameter `{other}`"))),
            }
        }
        Ok(self)
    }
}

/// Row `t` becomes the window of rows `t - window + 1 ..= t`; rows before the
/// start repeat row 0. Output layout is `(n, features, window)`.
pub fn windows_to_tensor(x: &Matrix, window: usize) -> Tensor {
    let (n, d) = (x.nrows(), x.ncols());
    let w = window.max(1);
    let mut data = vec![0.0; n * d * w];
    for t in 0..n {
        for s in 0..w {
            let src = (t + s + 1).saturating_sub(w);
            for c in 0..d {
                data[(t * d + c) * w + s] = x.get(src, c);
            }
        }
    }
    Tensor::new(vec![n, d, w], data).unwrap()
}

/// Same windows as [`windows_to_tensor`], one `(window, features)` tensor per row.
pub fn windows_to_sequences(x: &Matrix, window: usize) -> Vec<Tensor> {
    let (n, d) = (x.nrows(), x.ncols());
    let w = window.max(1);
    (0..n)
        .map(|t| {
            let mut data = Vec::with_capacity(w * d);
            for s in 0..w {
                data.extend_from_slice(x.row((t + s + 1).saturating_sub(w)));
            }
            Tensor::new(vec![w, d], data).unwrap()
        })
        .collect()
}

fn take_batch(x: &Tensor, idx: &[usize]) -> Tensor {
    let per: usize = x.shape()[1..].iter().product();
    let mut data = Vec::with_capacity(idx.len() * per);
    for &i in idx {
        data.extend_from_slice(&x.data()[i * per..(i + 1) * per]);
    }
    let mut shape = x.shape().to_vec();
    shape[0] = idx.len();
    Tensor::new(shape, data).unwrap()
}

/// Epoch-at-a-time mini-batch Adam on mean cross-entropy, so callers can
/// stop early or inspect the network between epochs.
pub struct ConvTrainer {
    opt: Adam,
    shuffle_rng: rand_chacha::ChaCha8Rng,
    dropout_rng: rand_chacha::ChaCha8Rng,
    batch_size: usize,
}

impl ConvTrainer {
    pub fn new(cfg: &NetConfig, seed_value: u64) -> Self {
        Self {
            opt: Adam::new(cfg.lr),
            shuffle_rng: seed::task_rng(seed_value, &[1]),
            dropout_rng: seed::task_rng(seed_value, &[2]),
            batch_size: cfg.batch_size.max(1),
        }
    }

    /// One shuffled pass. Batches too small for batch statistics (one value
    /// per channel) are skipped. Returns the mean batch loss, NaN if every
    /// batch was skipped.
    pub fn epoch(&mut self, net: &mut ConvTimeNetLite, x: &Tensor, y: &[usize]) -> Result<f64, NeuralError> {
        let n = x.shape()[0];
        if n != y.len() {
            return Err(NeuralError::ShapeMismatch(format!("{n} samples, {} targets", y.len())));
        }
        if n == 0 {
            return Err(NeuralError::EmptyData);
        }
        let t = x.shape()[2];
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut self.shuffle_rng);
        let (mut sum, mut count) = (0.0, 0usize);
        for chunk in order.chunks(self.batch_size) {
            if chunk.len() * t < 2 {
                continue;
            }
            let xb = take_batch(x, chunk);
            let yb: Vec<usize> = chunk.iter().map(|&i| y[i]).collect();
            let (loss, grads, _) = net.loss_and_grads(&xb, &yb, true, &mut self.dropout_rng)?;
            let mut params: Vec<&mut Tensor> = net.trainable_mut().into_iter().map(|(_, p)| p).collect();
            self.opt.step(&mut params, &grads, &[])?;
            sum += loss;
            count += 1;
        }
        Ok(if count > 0 { sum / count as f64 } else { f64::NAN })
    }
}

/// Runs `cfg.epochs` epochs of [`ConvTrainer`]; returns the per-epoch losses.
pub fn train_convnet(
    net: &mut ConvTimeNetLite,
    x: &Tensor,
    y: &[usize],
    cfg: &NetConfig,
    seed_value: u64,
) -> Result<Vec<f64>, NeuralError> {
    let mut trainer = ConvTrainer::new(cfg, seed_value);
    (0..cfg.epochs).map(|_| trainer.epoch(net, x, y)).collect()
}

pub fn predict_convnet(net: &ConvTimeNetLite, x: &Tensor) -> Result<Vec<usize>, NeuralError> {
    let logits = net.forward_eval(x)?;
    let k = logits.shape()[1];
    Ok(logits.data().chunks(k).map(crate::classic::argmax).collect())
}

/// Mini-batch Adam for the LSTM; frozen parameters are not updated.
/// Returns the full-data loss after every epoch.
pub fn train_lstm(
    net: &mut LstmClassifier,
    seqs: &[Tensor],
    y: &[usize],
    epochs: usize,
    batch_size: usize,
    lr: f64,
    seed_value: u64,
) -> Result<Vec<f64>, NeuralError> {
    if seqs.len() != y.len() {
        return Err(NeuralError::ShapeMismatch(format!("{} sequences, {} targets", seqs.len(), y.len())));
    }
    if seqs.is_empty() {
        return Err(NeuralError::EmptyData);
    }
    let mut rng = seed::task_rng(seed_value, &[3]);
    let mut opt = Adam::new(lr);
    let mut order: Vec<usize> = (0..seqs.len()).collect();
    let mut losses = Vec::with_capacity(epochs);
    let skip: Vec<bool> = net.trainable().iter().map(|(n, _)| net.frozen.contains(n)).collect();
    for _ in 0..epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch_size.max(1)) {
            let xb: Vec<Tensor> = chunk.iter().map(|&i| seqs[i].clone()).collect();
            let yb: Vec<usize> = chunk.iter().map(|&i| y[i]).collect();
            let (_, grads) = net.batch_loss_and_grads(&xb, &yb)?;
            let mut params: Vec<&mut Tensor> = net.trainable_mut().into_iter().map(|(_, p)| p).collect();
            opt.step(&mut params, &grads, &skip)?;
        }
        losses.push(net.batch_loss_and_grads(seqs, y)?.0);
    }
    Ok(losses)
}

pub fn predict_lstm(net: &LstmClassifier, seqs: &[Tensor]) -> Result<Vec<usize>, NeuralError> {
    seqs.iter().map(|s| net.logits(s).map(|l| crate::classic::argmax(&l))).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetKind {
    Convtimenet,
    Lstm,
}

impl NetKind {
    pub fn name(self) -> &'static str {
        match self {
            NetKind::Convtimenet => "convtimenet",
            NetKind::Lstm => "lstm",
        }
    }
}

/// Grid-search adapter for the networks; candidate params override `base`.
#[derive(Debug, Clone, Copy)]
pub struct NeuralLearner {
    pub kind: NetKind,
    pub base: NetConfig,
}

impl NeuralLearner {
    pub fn fit_predict_labels(
        &self,
        cfg: &NetConfig,
        x_train: &Matrix,
        y_train: &[i8],
        x_test: &Matrix,
        seed_value: u64,
    ) -> Result<Vec<i8>, NeuralError> {
        let y: Vec<usize> = y_train.iter().map(|&l| encode_label(l)).collect::<Result<_, _>>()?;
        let pred = match self.kind {
            NetKind::Convtimenet => {
                let mut net = ConvTimeNetLite::new(x_train.ncols(), 3, cfg.dropout, seed_value)?;
                train_convnet(&mut net, &windows_to_tensor(x_train, cfg.window), &y, cfg, seed_value)?;
                predict_convnet(&net, &windows_to_tensor(x_test, cfg.window))?
            }
            NetKind::Lstm => {
                let mut net = LstmClassifier::new(x_train.ncols(), cfg.hidden, 3, seed_value);
                let seqs = windows_to_sequences(x_train, cfg.window);
                train_lstm(&mut net, &seqs, &y, cfg.epochs, cfg.batch_size, cfg.lr, seed_value)?;
                predict_lstm(&net, &windows_to_sequences(x_test, cfg.window))?
            }
        };
        Ok(pred.into_iter().map(decode_label).collect())
    }
}

impl Learner for NeuralLearner {
    type Params = ParamSet;

    fn fit_predict(
        &self,
        params: &ParamSet,
        x_train: &Matrix,
        y_train: &[i8],
        x_test: &Matrix,
        seed_value: u64,
    ) -> Result<Vec<i8>, String> {
        let cfg = self.base.with_params(params).map_err(|e| e.to_string())?;
        self.fit_predict_labels(&cfg, x_train, y_train, x_test, seed_value).map_err(|e| e.to_string())
    }
}
