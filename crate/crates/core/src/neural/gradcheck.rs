//! Central finite-difference checks of the hand-written backward passes.

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::layers::cross_entropy;
use super::{ConvTimeNetLite, LstmClassifier, NeuralError, Parameters, Tensor};
use crate::seed;

pub const FD_STEP: f64 = 1e-5;
/// Denominator floor of the relative error, so entries whose true gradient
/// is zero are judged on absolute error.
pub const REL_FLOOR: f64 = 1e-6;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorCheck {
    pub name: String,
    pub checked: usize,
    pub max_rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub model: String,
    pub seed: u64,
    pub step: f64,
    pub max_rel_error: f64,
    pub checked: usize,
    /// Entries whose stencil crossed a ReLU kink and used a one-sided difference.
    pub one_sided: usize,
    pub tensors: Vec<TensorCheck>,
}

fn pick(len: usize, limit: Option<usize>, rng: &mut rand_chacha::ChaCha8Rng) -> Vec<usize> {
    match limit {
        Some(m) if m < len => {
            let mut v = sample(rng, len, m).into_vec();
            v.sort_unstable();
            v
        }
        _ => (0..len).collect(),
    }
}

fn random_tensor(shape: &[usize], scale: f64, rng: &mut rand_chacha::ChaCha8Rng) -> Tensor {
    let normal = Normal::new(0.0, scale).unwrap();
    let data = (0..shape.iter().product::<usize>()).map(|_| normal.sample(rng)).collect();
    Tensor::new(shape.to_vec(), data).unwrap()
}

/// Loss and ReLU activation pattern of a training forward without running
/// statistic updates.
fn conv_eval(net: &mut ConvTimeNetLite, x: &Tensor, y: &[usize]) -> Result<(f64, Vec<bool>), NeuralError> {
    let mut rng = seed::rng(0);
    let (logits, cache) = net.forward_train(x, false, &mut rng)?;
    let (loss, _) = cross_entropy(&logits, y)?;
    let pattern = cache.a1.data().iter().chain(cache.a2.data()).map(|&v| v > 0.0).collect();
    Ok((loss, pattern))
}

/// Checks every parameter tensor and the input gradient of a randomly
/// initialised network with dropout off. Tensors larger than
/// `max_entries` are checked on a seeded sample of that many entries.
pub fn gradcheck_convnet(
    seed_value: u64,
    batch: usize,
    channels: usize,
    steps: usize,
    max_entries: Option<usize>,
) -> Result<GradCheckReport, NeuralError> {
    let mut rng = seed::task_rng(seed_value, &[0x6763]);
    let mut net = ConvTimeNetLite::new(channels, 3, 0.0, seed_value)?;
    // move affine and bias terms off their trivial initial values
    for (name, t) in net.trainable_mut() {
        if name.ends_with("bias") || name.starts_with("bn") {
            let base = if name.starts_with("bn") && name.ends_with("weight") { 1.0 } else { 0.0 };
            for v in t.data_mut() {
                *v = base + rng.random_range(-0.5..0.5);
            }
        }
    }
    let x = random_tensor(&[batch, channels, steps], 1.0, &mut rng);
    let y: Vec<usize> = (0..batch).map(|_| rng.random_range(0..3)).collect();
    let mut drop_rng = seed::rng(0);
    let (_, grads, dx) = net.loss_and_grads(&x, &y, false, &mut drop_rng)?;
    let (_, base_pattern) = conv_eval(&mut net, &x, &y)?;
    let (base_loss, _) = conv_eval(&mut net, &x, &y)?;

    let n_params = grads.len();
    let mut report = GradCheckReport {
        model: net.kind().into(),
        seed: seed_value,
        step: FD_STEP,
        max_rel_error: 0.0,
        checked: 0,
        one_sided: 0,
        tensors: Vec::new(),
    };
    for k in 0..=n_params {
        let (name, len) = if k < n_params {
            let (n, t) = &net.trainable()[k];
            (n.clone(), t.len())
        } else {
            ("input".to_string(), x.len())
        };
        let analytic = if k < n_params { grads[k].data().to_vec() } else { dx.data().to_vec() };
        let mut tc = TensorCheck { name, checked: 0, max_rel_error: 0.0 };
        let mut xp = x.clone();
        for j in pick(len, max_entries, &mut rng) {
            let mut eval_at = |delta: f64, net: &mut ConvTimeNetLite| -> Result<(f64, Vec<bool>), NeuralError> {
                if k < n_params {
                    let mut params = net.trainable_mut();
                    let orig = params[k].1.data()[j];
                    params[k].1.data_mut()[j] = orig + delta;
                    drop(params);
                    let r = conv_eval(net, &x, &y);
                    net.trainable_mut()[k].1.data_mut()[j] = orig;
                    r
                } else {
                    let orig = xp.data()[j];
                    xp.data_mut()[j] = orig + delta;
                    let r = conv_eval(net, &xp, &y);
                    xp.data_mut()[j] = orig;
                    r
                }
            };
            let (fp, pp) = eval_at(FD_STEP, &mut net)?;
            let (fm, pm) = eval_at(-FD_STEP, &mut net)?;
            let numeric = match (pp == base_pattern, pm == base_pattern) {
                (true, true) => (fp - fm) / (2.0 * FD_STEP),
                (false, true) => {
                    report.one_sided += 1;
                    (base_loss - fm) / FD_STEP
                }
                (true, false) => {
                    report.one_sided += 1;
                    (fp - base_loss) / FD_STEP
                }
                (false, false) => {
                    // kinks on both sides: shrink the stencil
                    report.one_sided += 1;
                    let h = FD_STEP * 1e-3;
                    let (a, _) = eval_at(h, &mut net)?;
                    let (b, _) = eval_at(-h, &mut net)?;
                    (a - b) / (2.0 * h)
                }
            };
            let e = relative_error(analytic[j], numeric);
            tc.max_rel_error = tc.max_rel_error.max(e);
            tc.checked += 1;
        }
        report.max_rel_error = report.max_rel_error.max(tc.max_rel_error);
        report.checked += tc.checked;
        report.tensors.push(tc);
    }
    Ok(report)
}

/// Checks every LSTM parameter on one random sequence.
pub fn gradcheck_lstm(seed_value: u64, hidden: usize, input: usize, steps: usize) -> Result<GradCheckReport, NeuralError> {
    let mut rng = seed::task_rng(seed_value, &[0x6c73]);
    let mut net = LstmClassifier::new(input, hidden, 3, seed_value);
    for (_, t) in net.trainable_mut() {
        for v in t.data_mut() {
            *v += rng.random_range(-0.3..0.3);
        }
    }
    let x = random_tensor(&[steps, input], 1.0, &mut rng);
    let target = rng.random_range(0..3);
    let (_, grads) = net.loss_and_grads(&x, target)?;
    let mut report = GradCheckReport {
        model: net.kind().into(),
        seed: seed_value,
        step: FD_STEP,
        max_rel_error: 0.0,
        checked: 0,
        one_sided: 0,
        tensors: Vec::new(),
    };
    let loss_of = |net: &LstmClassifier| -> Result<f64, NeuralError> {
        let logits = Tensor::new(vec![1, 3], net.logits(&x)?)?;
        Ok(cross_entropy(&logits, &[target])?.0)
    };
    for k in 0..grads.len() {
        let name = net.trainable()[k].0.clone();
        let mut tc = TensorCheck { name, checked: 0, max_rel_error: 0.0 };
        for j in 0..grads[k].len() {
            let orig = net.trainable()[k].1.data()[j];
            net.trainable_mut()[k].1.data_mut()[j] = orig + FD_STEP;
            let fp = loss_of(&net)?;
            net.trainable_mut()[k].1.data_mut()[j] = orig - FD_STEP;
            let fm = loss_of(&net)?;
            net.trainable_mut()[k].1.data_mut()[j] = orig;
            let e = relative_error(grads[k].data()[j], (fp - fm) / (2.0 * FD_STEP));
            tc.max_rel_error = tc.max_rel_error.max(e);
            tc.checked += 1;
        }
        report.max_rel_error = report.max_rel_error.max(tc.max_rel_error);
        report.checked += tc.checked;
        report.tensors.push(tc);
    }
    Ok(report)
}
