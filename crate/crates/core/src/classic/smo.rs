//! Soft-margin SVM dual solved by sequential minimal optimization.
//!
//! Keeps the cache `F_i = sum_j a_j y_j K_ij - y_i`. With
//! `I_up = {y=+1, a<C} u {y=-1, a>0}` and `I_low = {y=+1, a>0} u {y=-1, a<C}`,
//! the point is optimal within `tol` when `max_{I_low} F <= min_{I_up} F + 2 tol`.
//! The outer loop visits violators (all points, then free points until they
//! settle); each violator is paired with the extreme of the opposite set,
//! which maximises `|E_1 - E_2|`.

use serde::{Deserialize, Serialize};

use super::kernel::{gram_matrix, Kernel};
use super::ClassicError;
use crate::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoOptions {
    pub tol: f64,
    /// Cap on outer passes; hitting it returns the current iterate unconverged.
    pub max_passes: usize,
    /// Record the dual objective after every update.
    pub trace: bool,
}

impl Default for SmoOptions {
    fn default() -> Self {
        Self { tol: 1e-3, max_passes: 10_000, trace: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub kernel: Kernel,
    pub c: f64,
    /// Multipliers of the retained support vectors, all in `(0, C]`.
    pub alphas: Vec<f64>,
    pub support_vectors: Matrix,
    pub support_labels: Vec<f64>,
    pub bias: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Largest KKT violation over the training set at exit.
    pub kkt_residual: f64,
    pub dual_objective: f64,
    #[serde(skip)]
    pub objective_trace: Vec<f64>,
    /// Multipliers for every training row, in input order.
    #[serde(skip)]
    pub all_alphas: Vec<f64>,
}

struct Solver<'a> {
    k: &'a [f64],
    n: usize,
    y: &'a [f64],
    c: f64,
    tol: f64,
    alpha: Vec<f64>,
    f: Vec<f64>,
    objective: f64,
    trace: Option<Vec<f64>>,
    steps: usize,
    // extremes of F over I_up (min) and I_low (max)
    b_up: f64,
    i_up: usize,
    b_low: f64,
    i_low: usize,
}

impl Solver<'_> {
    fn in_up(&self, i: usize) -> bool {
        (self.y[i] > 0.0 && self.alpha[i] < self.c) || (self.y[i] < 0.0 && self.alpha[i] > 0.0)
    }

    fn in_low(&self, i: usize) -> bool {
        (self.y[i] > 0.0 && self.alpha[i] > 0.0) || (self.y[i] < 0.0 && self.alpha[i] < self.c)
    }

    fn refresh_extremes(&mut self) {
        self.b_up = f64::INFINITY;
        self.b_low = f64::NEG_INFINITY;
        for i in 0..self.n {
            if self.in_up(i) && self.f[i] < self.b_up {
                self.b_up = self.f[i];
                self.i_up = i;
            }
            if self.in_low(i) && self.f[i] > self.b_low {
                self.b_low = self.f[i];
                self.i_low = i;
            }
        }
    }

    fn kij(&self, i: usize, j: usize) -> f64 {
        self.k[i * self.n + j]
    }

    fn examine(&mut self, i2: usize) -> bool {
        let f2 = self.f[i2];
        let mut partner = None;
        if self.in_low(i2) && f2 > self.b_up + 2.0 * self.tol {
            partner = Some(self.i_up);
        }
        if self.in_up(i2) && f2 < self.b_low - 2.0 * self.tol {
            let alt = self.i_low;
            partner = match partner {
                Some(p) if (self.f[p] - f2).abs() >= (self.f[alt] - f2).abs() => Some(p),
                _ => Some(alt),
            };
        }
        match partner {
            Some(i1) if i1 != i2 => self.take_step(i1, i2),
            _ => false,
        }
    }

    fn take_step(&mut self, i1: usize, i2: usize) -> bool {
        let (y1, y2) = (self.y[i1], self.y[i2]);
        let (a1, a2) = (self.alpha[i1], self.alpha[i2]);
        let (f1, f2) = (self.f[i1], self.f[i2]);
        let c = self.c;
        let s = y1 * y2;
        let (lo, hi) = if s < 0.0 {
            ((a2 - a1).max(0.0), (c + a2 - a1).min(c))
        } else {
            ((a2 + a1 - c).max(0.0), (a1 + a2).min(c))
        };
        if hi - lo <= 1e-15 * c {
            return false;
        }
        let (k11, k22, k12) = (self.kij(i1, i1), self.kij(i2, i2), self.kij(i1, i2));
        let eta = k11 + k22 - 2.0 * k12;
        let gain = |a2n: f64| -> f64 {
            let d2 = a2n - a2;
            let d1 = -s * d2;
            self.delta_objective(i1, i2, d1, d2)
        };
        let mut a2n = if eta > 0.0 {
            (a2 + y2 * (f1 - f2) / eta).clamp(lo, hi)
        } else {
            let (gl, gh) = (gain(lo), gain(hi));
            if gl > gh + 1e-12 {
                lo
            } else if gh > gl + 1e-12 {
                hi
            } else {
                a2
            }
        };
        // snap to the box so set membership is exact
        if a2n < 1e-12 * c {
            a2n = 0.0;
        } else if a2n > c * (1.0 - 1e-12) {
            a2n = c;
        }
        if (a2n - a2).abs() < 1e-12 * (a2n + a2 + 1e-12) {
            return false;
        }
        let mut a1n = a1 + s * (a2 - a2n);
        if a1n < 1e-12 * c {
            a1n = 0.0;
        } else if a1n > c * (1.0 - 1e-12) {
            a1n = c;
        }
        let d1 = a1n - a1;
        let d2 = a2n - a2;
        let dw = self.delta_objective(i1, i2, d1, d2);
        self.alpha[i1] = a1n;
        self.alpha[i2] = a2n;
        let (t1, t2) = (y1 * d1, y2 * d2);
        for i in 0..self.n {
            self.f[i] += t1 * self.k[i * self.n + i1] + t2 * self.k[i * self.n + i2];
        }
        self.objective += dw;
        if let Some(tr) = self.trace.as_mut() {
            tr.push(self.objective);
        }
        self.steps += 1;
        self.refresh_extremes();
        true
    }

    /// Exact change of `sum a - 1/2 a'Qa` for moving `(a1, a2)` by `(d1, d2)`.
    fn delta_objective(&self, i1: usize, i2: usize, d1: f64, d2: f64) -> f64 {
        let (y1, y2) = (self.y[i1], self.y[i2]);
        let g1 = 1.0 - y1 * (self.f[i1] + y1);
        let g2 = 1.0 - y2 * (self.f[i2] + y2);
        let quad = d1 * d1 * self.kij(i1, i1)
            + d2 * d2 * self.kij(i2, i2)
            + 2.0 * d1 * d2 * y1 * y2 * self.kij(i1, i2);
        d1 * g1 + d2 * g2 - 0.5 * quad
    }

    fn optimal(&self) -> bool {
        self.b_low <= self.b_up + 2.0 * self.tol
    }
}

/// Solves the binary soft-margin dual. Labels must be `+1`/`-1`.
pub fn smo_solve(
    x: &Matrix,
    y: &[f64],
    c: f64,
    kernel: Kernel,
    opts: &SmoOptions,
) -> Result<SvmModel, ClassicError> {
    let n = x.nrows();
    if y.len() != n {
        return Err(ClassicError::LabelMismatch { labels: y.len(), rows: n });
    }
    if !(c > 0.0) || !c.is_finite() {
        return Err(ClassicError::InvalidParam { key: "C".into(), reason: "must be > 0".into() });
    }
    if y.iter().any(|&v| v != 1.0 && v != -1.0) {
        return Err(ClassicError::InvalidParam { key: "y".into(), reason: "labels must be +1/-1".into() });
    }
    if !y.contains(&1.0) || !y.contains(&-1.0) {
        return Err(ClassicError::SingleClassInput);
    }
    if x.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(ClassicError::NonFinite);
    }
    let k = gram_matrix(&kernel, x);
    let mut s = Solver {
        k: &k,
        n,
        y,
        c,
        tol: opts.tol,
        alpha: vec![0.0; n],
        f: y.iter().map(|v| -v).collect(),
        objective: 0.0,
        trace: opts.trace.then(|| vec![0.0]),
        steps: 0,
        b_up: 0.0,
        i_up: 0,
        b_low: 0.0,
        i_low: 0,
    };
    s.refresh_extremes();

    let mut examine_all = true;
    let mut passes = 0;
    let converged;
    loop {
        let mut changed = 0;
        if examine_all {
            for i in 0..n {
                changed += s.examine(i) as usize;
            }
        } else {
            for i in 0..n {
                if s.alpha[i] > 0.0 && s.alpha[i] < c {
                    changed += s.examine(i) as usize;
                    if s.optimal() {
                        break;
                    }
                }
            }
        }
        passes += 1;
        if examine_all {
            if changed == 0 {
                converged = s.optimal();
                break;
            }
            examine_all = false;
        } else if changed == 0 || s.optimal() {
            examine_all = true;
        }
        if passes >= opts.max_passes {
            converged = s.optimal();
            break;
        }
    }
    if !converged {
        log::warn!("SMO stopped after {passes} passes without reaching tol {}", opts.tol);
    }

    let bias = -(s.b_low + s.b_up) / 2.0;
    let keep: Vec<usize> = (0..n).filter(|&i| s.alpha[i] > 0.0).collect();
    let mut model = SvmModel {
        kernel,
        c,
        alphas: keep.iter().map(|&i| s.alpha[i]).collect(),
        support_vectors: x.select_rows(&keep),
        support_labels: keep.iter().map(|&i| y[i]).collect(),
        bias,
        converged,
        iterations: s.steps,
        kkt_residual: 0.0,
        dual_objective: s.objective,
        objective_trace: s.trace.take().unwrap_or_default(),
        all_alphas: s.alpha.clone(),
    };
    // residual against the final decision values, from the cache
    model.kkt_residual = (0..n)
        .map(|i| kkt_violation(s.alpha[i], c, y[i] * (s.f[i] + y[i] + bias)))
        .fold(0.0, f64::max);
    Ok(model)
}

/// How far one point is from its KKT condition, given `margin = y f(x)`.
pub(crate) fn kkt_violation(alpha: f64, c: f64, margin: f64) -> f64 {
    if alpha <= 0.0 {
        (1.0 - margin).max(0.0)
    } else if alpha >= c {
        (margin - 1.0).max(0.0)
    } else {
        (margin - 1.0).abs()
    }
}

/// Pre-sign decision value `sum a_i y_i K(x_i, x) + b`.
pub fn svm_decision(model: &SvmModel, x: &[f64]) -> Result<f64, ClassicError> {
    let d = model.support_vectors.ncols();
    if model.alphas.is_empty() {
        return Ok(model.bias);
    }
    if x.len() != d {
        return Err(ClassicError::DimensionMismatch { expected: d, got: x.len() });
    }
    Ok(decision_unchecked(model, x))
}

pub(crate) fn decision_unchecked(model: &SvmModel, x: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (i, sv) in model.support_vectors.rows_iter().enumerate() {
        acc += model.alphas[i] * model.support_labels[i] * model.kernel.eval_unchecked(sv, x);
    }
    acc + model.bias
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_point() -> (Matrix, Vec<f64>) {
        (Matrix::from_vec(2, 1, vec![-1.0, 1.0]), vec![-1.0, 1.0])
    }

    #[test]
    fn analytic_two_point() {
        let (x, y) = two_point();
        let m = smo_solve(&x, &y, 10.0, Kernel::Linear, &SmoOptions::default()).unwrap();
        assert!((m.all_alphas[0] - 0.5).abs() < 1e-12 && (m.all_alphas[1] - 0.5).abs() < 1e-12);
        assert!(m.bias.abs() < 1e-12);
        assert!((svm_decision(&m, &[2.0]).unwrap() - 2.0).abs() < 1e-12);
        assert!(svm_decision(&m, &[0.0]).unwrap().abs() < 1e-12);
        assert!(m.converged);
    }

    #[test]
    fn box_clipped_two_point() {
        let (x, y) = two_point();
        let m = smo_solve(&x, &y, 0.1, Kernel::Linear, &SmoOptions::default()).unwrap();
        assert_eq!(m.all_alphas, vec![0.1, 0.1]);
        assert!(m.bias.abs() < 1e-12);
    }

    #[test]
    fn single_class_rejected() {
        let x = Matrix::from_vec(3, 1, vec![0.0, 1.0, 2.0]);
        assert_eq!(
            smo_solve(&x, &[1.0; 3], 1.0, Kernel::Linear, &SmoOptions::default()).unwrap_err(),
            ClassicError::SingleClassInput
        );
    }

    #[test]
    fn equality_constraint_holds() {
        let x = Matrix::from_vec(6, 1, vec![-3.0, -2.0, -0.5, 0.4, 2.0, 2.5]);
        let y = [-1.0, -1.0, 1.0, -1.0, 1.0, 1.0];
        let m = smo_solve(&x, &y, 1.0, Kernel::Rbf { gamma: 0.7 }, &SmoOptions::default()).unwrap();
        let s: f64 = m.all_alphas.iter().zip(&y).map(|(a, y)| a * y).sum();
        assert!(s.abs() <= 1e-8);
        assert!(m.all_alphas.iter().all(|&a| (0.0..=1.0).contains(&a)));
        assert!(m.kkt_residual <= 1e-3);
    }
}
