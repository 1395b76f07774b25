use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::knn::check_dim;
use super::ClassicError;
use crate::matrix::{cholesky_in_place, cholesky_solve, dot};
use crate::{seed, Matrix};

/// `K` linear scoring functions; the prediction is the highest score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    /// `K x d`, row-major.
    pub weights: Vec<f64>,
    pub intercepts: Vec<f64>,
    pub d: usize,
}

impl LinearModel {
    pub fn scores(&self, row: &[f64]) -> Vec<f64> {
        self.intercepts
            .iter()
            .enumerate()
            .map(|(k, b)| dot(&self.weights[k * self.d..(k + 1) * self.d], row) + b)
            .collect()
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<usize>, ClassicError> {
        check_dim(self.d, x)?;
        Ok(x.rows_iter().map(|r| super::argmax(&self.scores(r))).collect())
    }
}

/// Multinomial logistic regression by full-batch gradient descent on
/// `mean CE + lambda / (2n) |W|^2`, `lambda = 1 / C`.
pub fn fit_logistic(x: &Matrix, y: &[usize], n_classes: usize, c: f64) -> LinearModel {
    const MAX_ITER: usize = 5000;
    const GRAD_TOL: f64 = 1e-6;
    let (n, d, k) = (x.nrows(), x.ncols(), n_classes);
    let nf = n as f64;
    let lambda = 1.0 / c;
    // step 1/L with L bounding the Hessian of the objective
    let lmax = top_eigenvalue_augmented(x) / nf;
    let step = 1.0 / (0.5 * lmax + lambda / nf);
    let mut w = vec![0.0; k * d];
    let mut b = vec![0.0; k];
    let mut gw = vec![0.0; k * d];
    let mut gb = vec![0.0; k];
    let mut p = vec![0.0; k];
    for _ in 0..MAX_ITER {
        gw.iter_mut().for_each(|g| *g = 0.0);
        gb.iter_mut().for_each(|g| *g = 0.0);
        for (i, row) in x.rows_iter().enumerate() {
            for c in 0..k {
                p[c] = dot(&w[c * d..(c + 1) * d], row) + b[c];
            }
            softmax_in_place(&mut p);
            p[y[i]] -= 1.0;
            for c in 0..k {
                let g = p[c];
                gb[c] += g;
                for (gj, xj) in gw[c * d..(c + 1) * d].iter_mut().zip(row) {
                    *gj += g * xj;
                }
            }
        }
        let mut gmax = 0.0f64;
        for j in 0..k * d {
            gw[j] = gw[j] / nf + lambda / nf * w[j];
            gmax = gmax.max(gw[j].abs());
        }
        for c in 0..k {
            gb[c] /= nf;
            gmax = gmax.max(gb[c].abs());
        }
        if gmax <= GRAD_TOL {
            break;
        }
        for j in 0..k * d {
            w[j] -= step * gw[j];
        }
        for c in 0..k {
            b[c] -= step * gb[c];
        }
    }
    LinearModel { weights: w, intercepts: b, d }
}

fn softmax_in_place(z: &mut [f64]) {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for v in z.iter_mut() {
        *v = (*v - m).exp();
        s += *v;
    }
    for v in z.iter_mut() {
        *v /= s;
    }
}

/// Largest eigenvalue of `[X 1]'[X 1]` by power iteration, padded by 1%.
fn top_eigenvalue_augmented(x: &Matrix) -> f64 {
    let d = x.ncols() + 1;
    let mut v = vec![1.0 / (d as f64).sqrt(); d];
    let mut lambda = 0.0;
    for _ in 0..100 {
        let mut out = vec![0.0; d];
        for row in x.rows_iter() {
            let s = dot(&v[..d - 1], row) + v[d - 1];
            for j in 0..d - 1 {
                out[j] += s * row[j];
            }
            out[d - 1] += s;
        }
        let norm = dot(&out, &out).sqrt();
        if norm == 0.0 {
            return 1.0;
        }
        let next = norm;
        v = out.into_iter().map(|o| o / norm).collect();
        if (next - lambda).abs() <= 1e-9 * next {
            lambda = next;
            break;
        }
        lambda = next;
    }
    lambda * 1.01
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Penalty {
    None,
    L1,
    L2,
    ElasticNet,
}

impl Penalty {
    pub fn parse(s: Option<&str>) -> Result<Penalty, ClassicError> {
        match s {
            None => Ok(Penalty::None),
            Some("l1") => Ok(Penalty::L1),
            Some("l2") => Ok(Penalty::L2),
            Some("elasticnet") => Ok(Penalty::ElasticNet),
            Some(other) => Err(ClassicError::InvalidParam {
                key: "penalty".into(),
                reason: format!("unknown penalty `{other}`"),
            }),
        }
    }

    fn l1_ratio(self) -> f64 {
        match self {
            Penalty::None | Penalty::L2 => 0.0,
            Penalty::L1 => 1.0,
            Penalty::ElasticNet => 0.15,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OnlineLoss {
    /// Hinge loss with the `1 / (alpha (t + t0))` step schedule.
    Hinge,
    /// Mistake-driven updates with unit step.
    Perceptron,
    /// PA-I: `tau = min(C, loss / |x|^2)`.
    PassiveAggressive { c: f64 },
}

#[derive(Debug, Clone, Copy)]
pub struct OnlineConfig {
    pub loss: OnlineLoss,
    pub alpha: f64,
    pub penalty: Penalty,
    pub max_iter: usize,
    pub tol: f64,
    pub n_iter_no_change: usize,
}

/// One binary online learner per class (class vs rest), per-sample updates
/// over seeded shuffles, stopped when the epoch loss stops improving by `tol`.
pub fn fit_online(x: &Matrix, y: &[usize], n_classes: usize, cfg: &OnlineConfig, seed_value: u64) -> LinearModel {
    let d = x.ncols();
    let mut weights = vec![0.0; n_classes * d];
    let mut intercepts = vec![0.0; n_classes];
    for k in 0..n_classes {
        let target: Vec<f64> = y.iter().map(|&c| if c == k { 1.0 } else { -1.0 }).collect();
        let (w, b) = fit_binary_online(x, &target, cfg, seed::derive(seed_value, &[k as u64]));
        weights[k * d..(k + 1) * d].copy_from_slice(&w);
        intercepts[k] = b;
    }
    LinearModel { weights, intercepts, d }
}

fn fit_binary_online(x: &Matrix, y: &[f64], cfg: &OnlineConfig, seed_value: u64) -> (Vec<f64>, f64) {
    let (n, d) = (x.nrows(), x.ncols());
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut rng = seed::rng(seed_value);
    let mut order: Vec<usize> = (0..n).collect();
    let alpha = cfg.alpha;
    let l1_ratio = cfg.penalty.l1_ratio();
    let t0 = match cfg.loss {
        OnlineLoss::Hinge if alpha > 0.0 => {
            let typw = (1.0 / alpha.sqrt()).sqrt();
            1.0 / (typw * alpha)
        }
        _ => 1.0,
    };
    let mut t = 1.0f64;
    let mut best_loss = f64::INFINITY;
    let mut no_improve = 0;
    for _ in 0..cfg.max_iter {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for &i in &order {
            let row = x.row(i);
            let yi = y[i];
            let margin = yi * (dot(&w, row) + b);
            let eta = match cfg.loss {
                OnlineLoss::Hinge if alpha > 0.0 => 1.0 / (alpha * (t + t0 - 1.0)),
                _ => 1.0,
            };
            let step = match cfg.loss {
                OnlineLoss::Hinge => {
                    epoch_loss += (1.0 - margin).max(0.0);
                    if margin < 1.0 { eta * yi } else { 0.0 }
                }
                OnlineLoss::Perceptron => {
                    epoch_loss += (-margin).max(0.0);
                    if margin <= 0.0 { eta * yi } else { 0.0 }
                }
                OnlineLoss::PassiveAggressive { c } => {
                    let loss = (1.0 - margin).max(0.0);
                    epoch_loss += loss;
                    let sq = dot(row, row);
                    if loss > 0.0 && sq > 0.0 { (loss / sq).min(c) * yi } else { 0.0 }
                }
            };
            if cfg.penalty != Penalty::None && alpha > 0.0 {
                let shrink = 1.0 - eta * alpha * (1.0 - l1_ratio);
                w.iter_mut().for_each(|v| *v *= shrink.max(0.0));
            }
            if step != 0.0 {
                for (wj, xj) in w.iter_mut().zip(row) {
                    *wj += step * xj;
                }
                b += step;
            }
            if l1_ratio > 0.0 && alpha > 0.0 {
                let cut = eta * alpha * l1_ratio;
                for v in w.iter_mut() {
                    *v = v.signum() * (v.abs() - cut).max(0.0);
                }
            }
            t += 1.0;
        }
        if epoch_loss > best_loss - cfg.tol * n as f64 {
            no_improve += 1;
        } else {
            no_improve = 0;
        }
        best_loss = best_loss.min(epoch_loss);
        if no_improve >= cfg.n_iter_no_change {
            break;
        }
    }
    (w, b)
}

/// Ridge on one-hot targets with centred data and an unpenalised intercept.
pub fn fit_ridge(x: &Matrix, y: &[usize], n_classes: usize, alpha: f64) -> Result<LinearModel, ClassicError> {
    let (n, d, k) = (x.nrows(), x.ncols(), n_classes);
    let x_mean: Vec<f64> = (0..d).map(|j| crate::matrix::mean(&x.column(j))).collect();
    let y_mean: Vec<f64> = (0..k).map(|c| y.iter().filter(|&&v| v == c).count() as f64 / n as f64).collect();
    let mut gram = vec![0.0; d * d];
    let mut xty = vec![0.0; d * k];
    for (i, row) in x.rows_iter().enumerate() {
        let xc: Vec<f64> = row.iter().zip(&x_mean).map(|(a, m)| a - m).collect();
        for a in 0..d {
            for b in 0..d {
                gram[a * d + b] += xc[a] * xc[b];
            }
            for c in 0..k {
                let t = if y[i] == c { 1.0 } else { 0.0 } - y_mean[c];
                xty[a * k + c] += xc[a] * t;
            }
        }
    }
    let mut lambda = alpha;
    let mut chol = None;
    for attempt in 0..=3 {
        let mut a = gram.clone();
        for j in 0..d {
            a[j * d + j] += lambda;
        }
        if cholesky_in_place(&mut a, d) {
            chol = Some(a);
            break;
        }
        if attempt < 3 {
            log::warn!("ridge system singular at lambda={lambda}; escalating");
            lambda = if lambda > 0.0 { lambda * 1.01 } else { 1e-10 };
        }
    }
    let l = chol.ok_or(ClassicError::SingularSystem)?;
    let mut weights = vec![0.0; k * d];
    let mut intercepts = vec![0.0; k];
    for c in 0..k {
        let mut rhs: Vec<f64> = (0..d).map(|a| xty[a * k + c]).collect();
        cholesky_solve(&l, d, &mut rhs);
        intercepts[c] = y_mean[c] - dot(&rhs, &x_mean);
        weights[c * d..(c + 1) * d].copy_from_slice(&rhs);
    }
    Ok(LinearModel { weights, intercepts, d })
}
