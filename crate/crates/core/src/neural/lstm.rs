use std::collections::BTreeSet;

use rand::Rng;
use serde_json::json;

use super::layers::cross_entropy;
use super::{NeuralError, Parameters, Tensor};
use crate::seed;

/// Gate weight matrices, frozen during transfer fine-tuning.
pub const GATE_WEIGHTS: [&str; 4] = ["w_f", "w_i", "w_c", "w_o"];

/// Single-layer LSTM over `[h_{t-1}, x_t]` with a linear head on the last
/// hidden state.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmClassifier {
    pub input_dim: usize,
    pub hidden: usize,
    pub n_classes: usize,
    pub w_f: Tensor,
    pub w_i: Tensor,
    pub w_c: Tensor,
    pub w_o: Tensor,
    pub b_f: Tensor,
    pub b_i: Tensor,
    pub b_c: Tensor,
    pub b_o: Tensor,
    pub w_y: Tensor,
    pub b_y: Tensor,
    /// Names of parameters that receive zero gradient.
    pub frozen: BTreeSet<String>,
}

/// Everything the backward pass needs from one sequence.
#[derive(Debug, Clone)]
pub struct LstmTrace {
    /// `h[0]` is the initial state; `h[t + 1]` follows input `t`.
    pub h: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
    pub f: Vec<Vec<f64>>,
    pub i: Vec<Vec<f64>>,
    pub g: Vec<Vec<f64>>,
    pub o: Vec<Vec<f64>>,
    pub logits: Vec<f64>,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl LstmClassifier {
    /// Uniform `+-1/sqrt(hidden)` weights, zero biases except the forget
    /// gate bias at 1.
    pub fn new(input_dim: usize, hidden: usize, n_classes: usize, seed_value: u64) -> Self {
        let mut rng = seed::rng(seed_value);
        let bound = 1.0 / (hidden as f64).sqrt();
        let mut u = |shape: &[usize]| {
            let data = (0..shape.iter().product::<usize>()).map(|_| rng.random_range(-bound..bound)).collect();
            Tensor::new(shape.to_vec(), data).unwrap()
        };
        let cols = hidden + input_dim;
        Self {
            input_dim,
            hidden,
            n_classes,
            w_f: u(&[hidden, cols]),
            w_i: u(&[hidden, cols]),
            w_c: u(&[hidden, cols]),
            w_o: u(&[hidden, cols]),
            b_f: Tensor::filled(&[hidden], 1.0),
            b_i: Tensor::zeros(&[hidden]),
            b_c: Tensor::zeros(&[hidden]),
            b_o: Tensor::zeros(&[hidden]),
            w_y: u(&[n_classes, hidden]),
            b_y: Tensor::zeros(&[n_classes]),
            frozen: BTreeSet::new(),
        }
    }

    pub fn freeze_gate_weights(&mut self) {
        self.frozen = GATE_WEIGHTS.iter().map(|s| s.to_string()).collect();
    }

    fn check_seq(&self, x: &Tensor) -> Result<usize, NeuralError> {
        x.expect_rank(2, "sequence")?;
        if x.shape()[1] != self.input_dim {
            return Err(NeuralError::ShapeMismatch(format!(
                "sequence has {} features, cell expects {}",
                x.shape()[1],
                self.input_dim
            )));
        }
        x.check_finite("sequence")?;
        Ok(x.shape()[0])
    }

    /// Runs the gate recursion over `x: (T, input_dim)` from `(h0, c0)`.
    pub fn forward(&self, x: &Tensor, h0: &[f64], c0: &[f64]) -> Result<LstmTrace, NeuralError> {
        let steps = self.check_seq(x)?;
        let hd = self.hidden;
        if h0.len() != hd || c0.len() != hd {
            return Err(NeuralError::ShapeMismatch(format!("initial state must have length {hd}")));
        }
        let cols = hd + self.input_dim;
        let mut tr = LstmTrace {
            h: vec![h0.to_vec()],
            c: vec![c0.to_vec()],
            f: vec![],
            i: vec![],
            g: vec![],
            o: vec![],
            logits: vec![],
        };
        let mut z = vec![0.0; cols];
        for t in 0..steps {
            z[..hd].copy_from_slice(&tr.h[t]);
            z[hd..].copy_from_slice(&x.data()[t * self.input_dim..(t + 1) * self.input_dim]);
            let gate = |w: &Tensor, b: &Tensor, k: usize| -> f64 {
                b.data()[k] + w.data()[k * cols..(k + 1) * cols].iter().zip(&z).map(|(a, c)| a * c).sum::<f64>()
            };
            let f: Vec<f64> = (0..hd).map(|k| sigmoid(gate(&self.w_f, &self.b_f, k))).collect();
            let i: Vec<f64> = (0..hd).map(|k| sigmoid(gate(&self.w_i, &self.b_i, k))).collect();
            let g: Vec<f64> = (0..hd).map(|k| gate(&self.w_c, &self.b_c, k).tanh()).collect();
            let o: Vec<f64> = (0..hd).map(|k| sigmoid(gate(&self.w_o, &self.b_o, k))).collect();
            let c: Vec<f64> = (0..hd).map(|k| f[k] * tr.c[t][k] + i[k] * g[k]).collect();
            let h: Vec<f64> = (0..hd).map(|k| o[k] * c[k].tanh()).collect();
            tr.f.push(f);
            tr.i.push(i);
            tr.g.push(g);
            tr.o.push(o);
            tr.c.push(c);
            tr.h.push(h);
        }
        let h_last = tr.h.last().unwrap();
        tr.logits = (0..self.n_classes)
            .map(|k| {
                self.b_y.data()[k]
                    + self.w_y.data()[k * hd..(k + 1) * hd].iter().zip(h_last).map(|(a, b)| a * b).sum::<f64>()
            })
            .collect();
        Ok(tr)
    }

    pub fn logits(&self, x: &Tensor) -> Result<Vec<f64>, NeuralError> {
        let zeros = vec![0.0; self.hidden];
        Ok(self.forward(x, &zeros, &zeros)?.logits)
    }

    /// Cross-entropy at the final step and its BPTT gradients in
    /// [`Parameters::trainable`] order. Frozen parameters get zeros.
    pub fn loss_and_grads(&self, x: &Tensor, target: usize) -> Result<(f64, Vec<Tensor>), NeuralError> {
        let zeros = vec![0.0; self.hidden];
        let tr = self.forward(x, &zeros, &zeros)?;
        let logits = Tensor::new(vec![1, self.n_classes], tr.logits.clone())?;
        let (loss, d_logits) = cross_entropy(&logits, &[target])?;
        let dl = d_logits.data();
        let hd = self.hidden;
        let cols = hd + self.input_dim;
        let mut gw: Vec<Vec<f64>> = vec![vec![0.0; hd * cols]; 4];
        let mut gb: Vec<Vec<f64>> = vec![vec![0.0; hd]; 4];
        let h_last = tr.h.last().unwrap();
        let mut gwy = vec![0.0; self.n_classes * hd];
        let mut dh = vec![0.0; hd];
        for k in 0..self.n_classes {
            for j in 0..hd {
                gwy[k * hd + j] = dl[k] * h_last[j];
                dh[j] += dl[k] * self.w_y.data()[k * hd + j];
            }
        }
        let gby = dl.to_vec();
        let mut dc = vec![0.0; hd];
        let weights = [&self.w_f, &self.w_i, &self.w_c, &self.w_o];
        let mut z = vec![0.0; cols];
        for t in (0..tr.f.len()).rev() {
            let (f, i, g, o) = (&tr.f[t], &tr.i[t], &tr.g[t], &tr.o[t]);
            let (c_prev, c) = (&tr.c[t], &tr.c[t + 1]);
            let mut dz = [vec![0.0; hd], vec![0.0; hd], vec![0.0; hd], vec![0.0; hd]];
            for k in 0..hd {
                let tc = c[k].tanh();
                let d_o = dh[k] * tc;
                dc[k] += dh[k] * o[k] * (1.0 - tc * tc);
                let d_f = dc[k] * c_prev[k];
                let d_i = dc[k] * g[k];
                let d_g = dc[k] * i[k];
                dz[0][k] = d_f * f[k] * (1.0 - f[k]);
                dz[1][k] = d_i * i[k] * (1.0 - i[k]);
                dz[2][k] = d_g * (1.0 - g[k] * g[k]);
                dz[3][k] = d_o * o[k] * (1.0 - o[k]);
                dc[k] *= f[k];
            }
            z[..hd].copy_from_slice(&tr.h[t]);
            z[hd..].copy_from_slice(&x.data()[t * self.input_dim..(t + 1) * self.input_dim]);
            let mut dzin = vec![0.0; cols];
            for q in 0..4 {
                let w = weights[q].data();
                for k in 0..hd {
                    let d = dz[q][k];
                    gb[q][k] += d;
                    let row = &mut gw[q][k * cols..(k + 1) * cols];
                    for j in 0..cols {
                        row[j] += d * z[j];
                        dzin[j] += d * w[k * cols + j];
                    }
                }
            }
            dh.copy_from_slice(&dzin[..hd]);
        }
        let shape_w = vec![hd, cols];
        let mut grads = Vec::with_capacity(10);
        for q in 0..4 {
            grads.push(Tensor::new(shape_w.clone(), std::mem::take(&mut gw[q]))?);
        }
        for q in 0..4 {
            grads.push(Tensor::new(vec![hd], std::mem::take(&mut gb[q]))?);
        }
        grads.push(Tensor::new(vec![self.n_classes, hd], gwy)?);
        grads.push(Tensor::new(vec![self.n_classes], gby)?);
        for ((name, _), g) in self.trainable().iter().zip(grads.iter_mut()) {
            if self.frozen.contains(name) {
                g.data_mut().iter_mut().for_each(|v| *v = 0.0);
            }
        }
        Ok((loss, grads))
    }

    /// Mean loss and gradients over a batch of sequences.
    pub fn batch_loss_and_grads(&self, seqs: &[Tensor], targets: &[usize]) -> Result<(f64, Vec<Tensor>), NeuralError> {
        let mut total = 0.0;
        let mut acc: Option<Vec<Tensor>> = None;
        for (x, &y) in seqs.iter().zip(targets) {
            let (l, g) = self.loss_and_grads(x, y)?;
            total += l;
            match acc.as_mut() {
                None => acc = Some(g),
                Some(a) => {
                    for (ai, gi) in a.iter_mut().zip(&g) {
                        ai.data_mut().iter_mut().zip(gi.data()).for_each(|(p, q)| *p += q);
                    }
                }
            }
        }
        let n = seqs.len().max(1) as f64;
        let mut grads = acc.unwrap_or_else(|| self.trainable().iter().map(|(_, t)| Tensor::zeros(t.shape())).collect());
        for g in grads.iter_mut() {
            g.data_mut().iter_mut().for_each(|v| *v /= n);
        }
        Ok((total / n, grads))
    }
}

impl Parameters for LstmClassifier {
    fn kind(&self) -> &'static str {
        "lstm"
    }

    fn trainable(&self) -> Vec<(String, &Tensor)> {
        vec![
            ("w_f".into(), &self.w_f),
            ("w_i".into(), &self.w_i),
            ("w_c".into(), &self.w_c),
            ("w_o".into(), &self.w_o),
            ("b_f".into(), &self.b_f),
            ("b_i".into(), &self.b_i),
            ("b_c".into(), &self.b_c),
            ("b_o".into(), &self.b_o),
            ("w_y".into(), &self.w_y),
            ("b_y".into(), &self.b_y),
        ]
    }

    fn trainable_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        vec![
            ("w_f".into(), &mut self.w_f),
            ("w_i".into(), &mut self.w_i),
            ("w_c".into(), &mut self.w_c),
            ("w_o".into(), &mut self.w_o),
            ("b_f".into(), &mut self.b_f),
            ("b_i".into(), &mut self.b_i),
            ("b_c".into(), &mut self.b_c),
            ("b_o".into(), &mut self.b_o),
            ("w_y".into(), &mut self.w_y),
            ("b_y".into(), &mut self.b_y),
        ]
    }

    fn frozen(&self) -> Vec<String> {
        self.frozen.iter().cloned().collect()
    }

    fn hyperparameters(&self) -> serde_json::Value {
        json!({
            "input_dim": self.input_dim,
            "hidden": self.hidden,
            "n_classes": self.n_classes,
            "frozen": self.frozen,
        })
    }

    fn from_hyperparameters(h: &serde_json::Value) -> Result<Self, NeuralError> {
        let get = |k: &str| h.get(k).and_then(|v| v.as_u64()).ok_or_else(|| NeuralError::Checkpoint(format!("missing `{k}`")));
        let mut m = LstmClassifier::new(get("input_dim")? as usize, get("hidden")? as usize, get("n_classes")? as usize, 0);
        if let Some(f) = h.get("frozen").and_then(|v| v.as_array()) {
            m.frozen = f.iter().filter_map(|v| v.as_str().map(str::to_string)).collect();
        }
        Ok(m)
    }
}
