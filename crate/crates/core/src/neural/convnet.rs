use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use super::layers::*;
use super::{NeuralError, Parameters, Tensor};
use crate::seed;

pub const CONV1_CHANNELS: usize = 64;
pub const CONV2_CHANNELS: usize = 128;

/// conv(64) -> bn -> relu -> conv(128) -> bn -> relu -> mean over time ->
/// dropout -> linear(classes). All convolutions use kernel 3, padding 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvTimeNetLite {
    pub in_channels: usize,
    pub n_classes: usize,
    pub dropout_p: f64,
    pub conv1_w: Tensor,
    pub conv1_b: Tensor,
    pub bn1: BatchNormParams,
    pub conv2_w: Tensor,
    pub conv2_b: Tensor,
    pub bn2: BatchNormParams,
    pub fc_w: Tensor,
    pub fc_b: Tensor,
}

/// Activations kept from a training forward pass.
#[derive(Debug, Clone)]
pub struct ConvCache {
    pub input: Tensor,
    pub z1: Tensor,
    pub a1: Tensor,
    pub bn1: BatchNormCache,
    pub r1: Tensor,
    pub z2: Tensor,
    pub a2: Tensor,
    pub bn2: BatchNormCache,
    pub pooled: Tensor,
    pub dropout_mask: Option<Vec<f64>>,
    pub dropped: Tensor,
}

fn he_uniform(shape: &[usize], fan_in: usize, rng: &mut ChaCha8Rng) -> Tensor {
    let bound = (6.0 / fan_in as f64).sqrt();
    let data = (0..shape.iter().product::<usize>()).map(|_| rng.random_range(-bound..bound)).collect();
    Tensor::new(shape.to_vec(), data).unwrap()
}

impl ConvTimeNetLite {
    pub fn new(in_channels: usize, n_classes: usize, dropout_p: f64, seed_value: u64) -> Result<Self, NeuralError> {
        if !(0.0..1.0).contains(&dropout_p) {
            return Err(NeuralError::InvalidP(dropout_p));
        }
        let mut rng = seed::rng(seed_value);
        Ok(Self {
            in_channels,
            n_classes,
            dropout_p,
            conv1_w: he_uniform(&[CONV1_CHANNELS, in_channels, 3], in_channels * 3, &mut rng),
            conv1_b: Tensor::zeros(&[CONV1_CHANNELS]),
            bn1: BatchNormParams::new(CONV1_CHANNELS),
            conv2_w: he_uniform(&[CONV2_CHANNELS, CONV1_CHANNELS, 3], CONV1_CHANNELS * 3, &mut rng),
            conv2_b: Tensor::zeros(&[CONV2_CHANNELS]),
            bn2: BatchNormParams::new(CONV2_CHANNELS),
            fc_w: he_uniform(&[n_classes, CONV2_CHANNELS], CONV2_CHANNELS, &mut rng),
            fc_b: Tensor::zeros(&[n_classes]),
        })
    }

    fn check_input(&self, x: &Tensor) -> Result<(), NeuralError> {
        x.expect_rank(3, "network input")?;
        if x.shape()[1] != self.in_channels {
            return Err(NeuralError::ShapeMismatch(format!(
                "network expects {} channels, input has shape {:?}",
                self.in_channels,
                x.shape()
            )));
        }
        x.check_finite("network input")
    }

    /// Inference with running statistics and no dropout.
    pub fn forward_eval(&self, x: &Tensor) -> Result<Tensor, NeuralError> {
        self.check_input(x)?;
        let mut bn1 = self.bn1.clone();
        let mut bn2 = self.bn2.clone();
        let z1 = conv1d(x, &self.conv1_w, &self.conv1_b)?;
        let (a1, _) = batchnorm1d(&z1, &mut bn1, false, false)?;
        let z2 = conv1d(&relu(&a1), &self.conv2_w, &self.conv2_b)?;
        let (a2, _) = batchnorm1d(&z2, &mut bn2, false, false)?;
        let pooled = adaptive_avg_pool_to_1(&relu(&a2))?;
        let b = pooled.shape()[0];
        let flat = pooled.reshape(&[b, CONV2_CHANNELS])?;
        linear(&flat, &self.fc_w, &self.fc_b)
    }

    /// Training forward with batch statistics. Running statistics move only
    /// when `update_running` is set.
    pub fn forward_train(
        &mut self,
        x: &Tensor,
        update_running: bool,
        rng: &mut ChaCha8Rng,
    ) -> Result<(Tensor, ConvCache), NeuralError> {
        self.check_input(x)?;
        let z1 = conv1d(x, &self.conv1_w, &self.conv1_b)?;
        let (a1, c1) = batchnorm1d(&z1, &mut self.bn1, true, update_running)?;
        let r1 = relu(&a1);
        let z2 = conv1d(&r1, &self.conv2_w, &self.conv2_b)?;
        let (a2, c2) = batchnorm1d(&z2, &mut self.bn2, true, update_running)?;
        let pooled = adaptive_avg_pool_to_1(&relu(&a2))?;
        let b = pooled.shape()[0];
        let pooled = pooled.reshape(&[b, CONV2_CHANNELS])?;
        let (dropped, mask) = dropout(&pooled, self.dropout_p, true, rng)?;
        let logits = linear(&dropped, &self.fc_w, &self.fc_b)?;
        logits.check_finite("logits")?;
        Ok((
            logits,
            ConvCache {
                input: x.clone(),
                z1,
                a1,
                bn1: c1.unwrap(),
                r1,
                z2,
                a2,
                bn2: c2.unwrap(),
                pooled,
                dropout_mask: mask,
                dropped,
            },
        ))
    }

    /// Gradients of the loss whose logit gradient is `d_logits`, in
    /// [`Parameters::trainable`] order, plus the input gradient.
    pub fn backward(&self, cache: &ConvCache, d_logits: &Tensor) -> (Vec<Tensor>, Tensor) {
        let (d_drop, d_fc_w, d_fc_b) = linear_backward(&cache.dropped, &self.fc_w, d_logits);
        let d_pool = match &cache.dropout_mask {
            Some(m) => {
                let d = d_drop.data().iter().zip(m).map(|(g, k)| g * k).collect();
                Tensor::new(d_drop.shape().to_vec(), d).unwrap()
            }
            None => d_drop,
        };
        let b = d_pool.shape()[0];
        let t = cache.input.shape()[2];
        let d_pool = d_pool.reshape(&[b, CONV2_CHANNELS, 1]).unwrap();
        let d_r2 = adaptive_avg_pool_backward(&d_pool, t);
        let d_a2 = relu_backward(&cache.a2, &d_r2);
        let (d_z2, d_g2, d_b2) = batchnorm1d_backward(&d_a2, &self.bn2.gamma, &cache.bn2);
        let (d_r1, d_w2, d_c2b) = conv1d_backward(&cache.r1, &self.conv2_w, &d_z2);
        let d_a1 = relu_backward(&cache.a1, &d_r1);
        let (d_z1, d_g1, d_b1) = batchnorm1d_backward(&d_a1, &self.bn1.gamma, &cache.bn1);
        let (d_x, d_w1, d_c1b) = conv1d_backward(&cache.input, &self.conv1_w, &d_z1);
        (vec![d_w1, d_c1b, d_g1, d_b1, d_w2, d_c2b, d_g2, d_b2, d_fc_w, d_fc_b], d_x)
    }

    /// Mean cross-entropy of a training forward and its gradients.
    pub fn loss_and_grads(
        &mut self,
        x: &Tensor,
        targets: &[usize],
        update_running: bool,
        rng: &mut ChaCha8Rng,
    ) -> Result<(f64, Vec<Tensor>, Tensor), NeuralError> {
        let (logits, cache) = self.forward_train(x, update_running, rng)?;
        let (loss, d_logits) = cross_entropy(&logits, targets)?;
        let (grads, dx) = self.backward(&cache, &d_logits);
        Ok((loss, grads, dx))
    }

    /// Pre-activation ReLU inputs of a training forward, used to detect
    /// kinks in finite-difference stencils.
    pub fn relu_inputs(&mut self, x: &Tensor) -> Result<(Vec<f64>, Vec<f64>), NeuralError> {
        let mut rng = seed::rng(0);
        let (_, cache) = self.forward_train(x, false, &mut rng)?;
        Ok((cache.a1.into_data(), cache.a2.into_data()))
    }
}

impl Parameters for ConvTimeNetLite {
    fn kind(&self) -> &'static str {
        "convtimenet_lite"
    }

    fn trainable(&self) -> Vec<(String, &Tensor)> {
        vec![
            ("conv1.weight".into(), &self.conv1_w),
            ("conv1.bias".into(), &self.conv1_b),
            ("bn1.weight".into(), &self.bn1.gamma),
            ("bn1.bias".into(), &self.bn1.beta),
            ("conv2.weight".into(), &self.conv2_w),
            ("conv2.bias".into(), &self.conv2_b),
            ("bn2.weight".into(), &self.bn2.gamma),
            ("bn2.bias".into(), &self.bn2.beta),
            ("fc.weight".into(), &self.fc_w),
            ("fc.bias".into(), &self.fc_b),
        ]
    }

    fn trainable_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        vec![
            ("conv1.weight".into(), &mut self.conv1_w),
            ("conv1.bias".into(), &mut self.conv1_b),
            ("bn1.weight".into(), &mut self.bn1.gamma),
            ("bn1.bias".into(), &mut self.bn1.beta),
            ("conv2.weight".into(), &mut self.conv2_w),
            ("conv2.bias".into(), &mut self.conv2_b),
            ("bn2.weight".into(), &mut self.bn2.gamma),
            ("bn2.bias".into(), &mut self.bn2.beta),
            ("fc.weight".into(), &mut self.fc_w),
            ("fc.bias".into(), &mut self.fc_b),
        ]
    }

    fn buffers(&self) -> Vec<(String, &Tensor)> {
        vec![
            ("bn1.running_mean".into(), &self.bn1.running_mean),
            ("bn1.running_var".into(), &self.bn1.running_var),
            ("bn2.running_mean".into(), &self.bn2.running_mean),
            ("bn2.running_var".into(), &self.bn2.running_var),
        ]
    }

    fn buffers_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        vec![
            ("bn1.running_mean".into(), &mut self.bn1.running_mean),
            ("bn1.running_var".into(), &mut self.bn1.running_var),
            ("bn2.running_mean".into(), &mut self.bn2.running_mean),
            ("bn2.running_var".into(), &mut self.bn2.running_var),
        ]
    }

    fn hyperparameters(&self) -> serde_json::Value {
        json!({
            "in_channels": self.in_channels,
            "n_classes": self.n_classes,
            "dropout_p": self.dropout_p,
            "kernel_size": 3,
            "padding": 1,
            "channels": [CONV1_CHANNELS, CONV2_CHANNELS],
        })
    }

    fn from_hyperparameters(h: &serde_json::Value) -> Result<Self, NeuralError> {
        let get = |k: &str| h.get(k).and_then(|v| v.as_f64()).ok_or_else(|| NeuralError::Checkpoint(format!("missing `{k}`")));
        ConvTimeNetLite::new(get("in_channels")? as usize, get("n_classes")? as usize, get("dropout_p")?, 0)
    }
}
