//! Stateless layer kernels with their backward passes. Activations use the
//! `(batch, channels, time)` layout.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{NeuralError, Tensor};

fn dims3(t: &Tensor, what: &str) -> Result<(usize, usize, usize), NeuralError> {
    t.expect_rank(3, what)?;
    Ok((t.shape()[0], t.shape()[1], t.shape()[2]))
}

/// Cross-correlation with kernel size 3 and one zero of padding on each side.
pub fn conv1d(input: &Tensor, weight: &Tensor, bias: &Tensor) -> Result<Tensor, NeuralError> {
    let (b, c_in, t) = dims3(input, "conv1d input")?;
    let (c_out, wc, k) = dims3(weight, "conv1d weight")?;
    if wc != c_in || k != 3 || bias.shape() != [c_out] {
        return Err(NeuralError::ShapeMismatch(format!(
            "conv1d: input {:?}, weight {:?}, bias {:?}",
            input.shape(),
            weight.shape(),
            bias.shape()
        )));
    }
    if t == 0 {
        return Err(NeuralError::ShapeMismatch("conv1d: empty time axis".into()));
    }
    let (x, w) = (input.data(), weight.data());
    let mut out = vec![0.0; b * c_out * t];
    for bi in 0..b {
        for o in 0..c_out {
            let row = &mut out[(bi * c_out + o) * t..(bi * c_out + o + 1) * t];
            row.iter_mut().for_each(|v| *v = bias.data()[o]);
            for c in 0..c_in {
                let xin = &x[(bi * c_in + c) * t..(bi * c_in + c + 1) * t];
                let wk = &w[(o * c_in + c) * 3..(o * c_in + c) * 3 + 3];
                // tap 0 reads x[t-1], tap 1 x[t], tap 2 x[t+1]
                for (r, xv) in row[1..].iter_mut().zip(&xin[..t - 1]) {
                    *r += wk[0] * xv;
                }
                for (r, xv) in row.iter_mut().zip(xin) {
                    *r += wk[1] * xv;
                }
                for (r, xv) in row[..t - 1].iter_mut().zip(&xin[1..]) {
                    *r += wk[2] * xv;
                }
            }
        }
    }
    Tensor::new(vec![b, c_out, t], out)
}

/// Returns `(d_input, d_weight, d_bias)`.
pub fn conv1d_backward(
    input: &Tensor,
    weight: &Tensor,
    grad_out: &Tensor,
) -> (Tensor, Tensor, Tensor) {
    let (b, c_in, t) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    let c_out = weight.shape()[0];
    let (x, w, g) = (input.data(), weight.data(), grad_out.data());
    let mut dx = vec![0.0; x.len()];
    let mut dw = vec![0.0; w.len()];
    let mut db = vec![0.0; c_out];
    for bi in 0..b {
        for o in 0..c_out {
            let go = &g[(bi * c_out + o) * t..(bi * c_out + o + 1) * t];
            db[o] += go.iter().sum::<f64>();
            for c in 0..c_in {
                let xin = &x[(bi * c_in + c) * t..(bi * c_in + c + 1) * t];
                let base = (o * c_in + c) * 3;
                let wk = [w[base], w[base + 1], w[base + 2]];
                let mut s = [0.0; 3];
                for (gv, xv) in go[1..].iter().zip(&xin[..t - 1]) {
                    s[0] += gv * xv;
                }
                for (gv, xv) in go.iter().zip(xin) {
                    s[1] += gv * xv;
                }
                for (gv, xv) in go[..t - 1].iter().zip(&xin[1..]) {
                    s[2] += gv * xv;
                }
                dw[base] += s[0];
                dw[base + 1] += s[1];
                dw[base + 2] += s[2];
                let dxi = &mut dx[(bi * c_in + c) * t..(bi * c_in + c + 1) * t];
                for (d, gv) in dxi[..t - 1].iter_mut().zip(&go[1..]) {
                    *d += wk[0] * gv;
                }
                for (d, gv) in dxi.iter_mut().zip(go) {
                    *d += wk[1] * gv;
                }
                for (d, gv) in dxi[1..].iter_mut().zip(&go[..t - 1]) {
                    *d += wk[2] * gv;
                }
            }
        }
    }
    (
        Tensor::new(input.shape().to_vec(), dx).unwrap(),
        Tensor::new(weight.shape().to_vec(), dw).unwrap(),
        Tensor::new(vec![c_out], db).unwrap(),
    )
}

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

/// Per-channel affine parameters and running statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormParams {
    pub gamma: Tensor,
    pub beta: Tensor,
    pub running_mean: Tensor,
    pub running_var: Tensor,
}

impl BatchNormParams {
    pub fn new(channels: usize) -> Self {
        Self {
            gamma: Tensor::filled(&[channels], 1.0),
            beta: Tensor::zeros(&[channels]),
            running_mean: Tensor::zeros(&[channels]),
            running_var: Tensor::filled(&[channels], 1.0),
        }
    }
}

/// What the backward pass needs from a training-mode forward.
#[derive(Debug, Clone)]
pub struct BatchNormCache {
    pub x_hat: Vec<f64>,
    pub inv_std: Vec<f64>,
}

/// Training mode normalises with batch statistics (population variance) and,
/// when `update_running` is set, moves the running statistics by
/// `BN_MOMENTUM` using the unbiased variance. Eval mode uses running
/// statistics and returns no cache.
pub fn batchnorm1d(
    input: &Tensor,
    p: &mut BatchNormParams,
    train: bool,
    update_running: bool,
) -> Result<(Tensor, Option<BatchNormCache>), NeuralError> {
    let (b, c, t) = dims3(input, "batchnorm input")?;
    if p.gamma.shape() != [c] {
        return Err(NeuralError::ShapeMismatch(format!(
            "batchnorm: {c} channels, parameters for {:?}",
            p.gamma.shape()
        )));
    }
    let x = input.data();
    let n = b * t;
    let mut out = vec![0.0; x.len()];
    if !train {
        for ch in 0..c {
            let scale = p.gamma.data()[ch] / (p.running_var.data()[ch] + BN_EPS).sqrt();
            let shift = p.beta.data()[ch] - p.running_mean.data()[ch] * scale;
            for bi in 0..b {
                let o = (bi * c + ch) * t;
                for i in o..o + t {
                    out[i] = x[i] * scale + shift;
                }
            }
        }
        return Ok((Tensor::new(input.shape().to_vec(), out)?, None));
    }
    if n < 2 {
        return Err(NeuralError::DegenerateBatch);
    }
    let mut x_hat = vec![0.0; x.len()];
    let mut inv_std = vec![0.0; c];
    for ch in 0..c {
        let mut sum = 0.0;
        for bi in 0..b {
            let o = (bi * c + ch) * t;
            sum += x[o..o + t].iter().sum::<f64>();
        }
        let mean = sum / n as f64;
        let mut ss = 0.0;
        for bi in 0..b {
            let o = (bi * c + ch) * t;
            ss += x[o..o + t].iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
        }
        let var = ss / n as f64;
        let is = 1.0 / (var + BN_EPS).sqrt();
        inv_std[ch] = is;
        let (g, be) = (p.gamma.data()[ch], p.beta.data()[ch]);
        for bi in 0..b {
            let o = (bi * c + ch) * t;
            for i in o..o + t {
                x_hat[i] = (x[i] - mean) * is;
                out[i] = g * x_hat[i] + be;
            }
        }
        if update_running {
            let unbiased = ss / (n - 1) as f64;
            let rm = &mut p.running_mean.data_mut()[ch];
            *rm = (1.0 - BN_MOMENTUM) * *rm + BN_MOMENTUM * mean;
            let rv = &mut p.running_var.data_mut()[ch];
            *rv = (1.0 - BN_MOMENTUM) * *rv + BN_MOMENTUM * unbiased;
        }
    }
    Ok((Tensor::new(input.shape().to_vec(), out)?, Some(BatchNormCache { x_hat, inv_std })))
}

/// Returns `(d_input, d_gamma, d_beta)` for a training-mode forward.
pub fn batchnorm1d_backward(
    grad_out: &Tensor,
    gamma: &Tensor,
    cache: &BatchNormCache,
) -> (Tensor, Tensor, Tensor) {
    let (b, c, t) = (grad_out.shape()[0], grad_out.shape()[1], grad_out.shape()[2]);
    let n = (b * t) as f64;
    let g = grad_out.data();
    let mut dx = vec![0.0; g.len()];
    let mut dgamma = vec![0.0; c];
    let mut dbeta = vec![0.0; c];
    for ch in 0..c {
        let (mut sum_g, mut sum_gx) = (0.0, 0.0);
        for bi in 0..b {
            let o = (bi * c + ch) * t;
            for i in o..o + t {
                sum_g += g[i];
                sum_gx += g[i] * cache.x_hat[i];
            }
        }
        dgamma[ch] = sum_gx;
        dbeta[ch] = sum_g;
        let k = gamma.data()[ch] * cache.inv_std[ch] / n;
        for bi in 0..b {
            let o = (bi * c + ch) * t;
            for i in o..o + t {
                dx[i] = k * (n * g[i] - sum_g - cache.x_hat[i] * sum_gx);
            }
        }
    }
    (
        Tensor::new(grad_out.shape().to_vec(), dx).unwrap(),
        Tensor::new(vec![c], dgamma).unwrap(),
        Tensor::new(vec![c], dbeta).unwrap(),
    )
}

pub fn relu(input: &Tensor) -> Tensor {
    Tensor::new(input.shape().to_vec(), input.data().iter().map(|&v| v.max(0.0)).collect()).unwrap()
}

/// Passes gradient where the forward input was strictly positive.
pub fn relu_backward(input: &Tensor, grad_out: &Tensor) -> Tensor {
    let d = input.data().iter().zip(grad_out.data()).map(|(&x, &g)| if x > 0.0 { g } else { 0.0 }).collect();
    Tensor::new(input.shape().to_vec(), d).unwrap()
}

/// Mean over the time axis: `(b, c, t) -> (b, c, 1)`.
pub fn adaptive_avg_pool_to_1(input: &Tensor) -> Result<Tensor, NeuralError> {
    let (b, c, t) = dims3(input, "pool input")?;
    if t == 0 {
        return Err(NeuralError::ShapeMismatch("pool: empty time axis".into()));
    }
    let x = input.data();
    let out = (0..b * c).map(|i| x[i * t..(i + 1) * t].iter().sum::<f64>() / t as f64).collect();
    Tensor::new(vec![b, c, 1], out)
}

pub fn adaptive_avg_pool_backward(grad_out: &Tensor, t: usize) -> Tensor {
    let (b, c) = (grad_out.shape()[0], grad_out.shape()[1]);
    let mut d = vec![0.0; b * c * t];
    for (i, g) in grad_out.data().iter().enumerate() {
        d[i * t..(i + 1) * t].iter_mut().for_each(|v| *v = g / t as f64);
    }
    Tensor::new(vec![b, c, t], d).unwrap()
}

/// Inverted dropout. Returns the output and the per-element multiplier
/// (`0` or `1/(1-p)`), which is all the backward pass needs.
pub fn dropout(
    input: &Tensor,
    p: f64,
    train: bool,
    rng: &mut ChaCha8Rng,
) -> Result<(Tensor, Option<Vec<f64>>), NeuralError> {
    if !(0.0..1.0).contains(&p) {
        return Err(NeuralError::InvalidP(p));
    }
    if !train || p == 0.0 {
        return Ok((input.clone(), None));
    }
    let scale = 1.0 / (1.0 - p);
    let mask: Vec<f64> = (0..input.len()).map(|_| if rng.random::<f64>() < p { 0.0 } else { scale }).collect();
    let out = input.data().iter().zip(&mask).map(|(x, m)| x * m).collect();
    Ok((Tensor::new(input.shape().to_vec(), out)?, Some(mask)))
}

/// Row-wise log-softmax of `(batch, classes)` logits.
pub fn log_softmax(logits: &Tensor) -> Result<Tensor, NeuralError> {
    logits.expect_rank(2, "log_softmax input")?;
    let k = logits.shape()[1];
    let mut out = logits.data().to_vec();
    if k == 0 {
        return Tensor::new(logits.shape().to_vec(), out);
    }
    for row in out.chunks_mut(k) {
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        row.iter_mut().for_each(|v| *v -= lse);
    }
    Tensor::new(logits.shape().to_vec(), out)
}

/// Mean negative log-likelihood and its gradient with respect to the logits.
pub fn cross_entropy(logits: &Tensor, targets: &[usize]) -> Result<(f64, Tensor), NeuralError> {
    let ls = log_softmax(logits)?;
    let (b, k) = (logits.shape()[0], logits.shape()[1]);
    if targets.len() != b {
        return Err(NeuralError::ShapeMismatch(format!("{} targets for batch {b}", targets.len())));
    }
    if let Some(&bad) = targets.iter().find(|&&t| t >= k) {
        return Err(NeuralError::BadTargetIndex(bad));
    }
    let mut loss = 0.0;
    let mut grad = vec![0.0; b * k];
    for (i, &tgt) in targets.iter().enumerate() {
        loss -= ls.data()[i * k + tgt];
        for j in 0..k {
            grad[i * k + j] = ls.data()[i * k + j].exp() / b as f64;
        }
        grad[i * k + tgt] -= 1.0 / b as f64;
    }
    Ok((loss / b as f64, Tensor::new(vec![b, k], grad)?))
}

/// `x W' + b` for `x: (batch, in)`, `W: (out, in)`.
pub fn linear(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor, NeuralError> {
    x.expect_rank(2, "linear input")?;
    w.expect_rank(2, "linear weight")?;
    let (n, din) = (x.shape()[0], x.shape()[1]);
    let dout = w.shape()[0];
    if w.shape()[1] != din || b.shape() != [dout] {
        return Err(NeuralError::ShapeMismatch(format!(
            "linear: input {:?}, weight {:?}, bias {:?}",
            x.shape(),
            w.shape(),
            b.shape()
        )));
    }
    let mut out = vec![0.0; n * dout];
    for i in 0..n {
        let xi = &x.data()[i * din..(i + 1) * din];
        for o in 0..dout {
            let wo = &w.data()[o * din..(o + 1) * din];
            out[i * dout + o] = b.data()[o] + wo.iter().zip(xi).map(|(a, c)| a * c).sum::<f64>();
        }
    }
    Tensor::new(vec![n, dout], out)
}

/// Returns `(d_x, d_w, d_b)`.
pub fn linear_backward(x: &Tensor, w: &Tensor, grad_out: &Tensor) -> (Tensor, Tensor, Tensor) {
    let (n, din) = (x.shape()[0], x.shape()[1]);
    let dout = w.shape()[0];
    let g = grad_out.data();
    let mut dx = vec![0.0; n * din];
    let mut dw = vec![0.0; dout * din];
    let mut db = vec![0.0; dout];
    for i in 0..n {
        let xi = &x.data()[i * din..(i + 1) * din];
        for o in 0..dout {
            let go = g[i * dout + o];
            db[o] += go;
            let wo = &w.data()[o * din..(o + 1) * din];
            for j in 0..din {
                dw[o * din + j] += go * xi[j];
                dx[i * din + j] += go * wo[j];
            }
        }
    }
    (
        Tensor::new(vec![n, din], dx).unwrap(),
        Tensor::new(vec![dout, din], dw).unwrap(),
        Tensor::new(vec![dout], db).unwrap(),
    )
}
