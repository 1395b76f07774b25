use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::Matrix;

/// Per-feature mean and population standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Scaler {
    /// Fits on all rows of `x`. Constant columns get std 0.
    pub fn fit(x: &Matrix) -> Scaler {
        let (n, d) = (x.nrows(), x.ncols());
        let mut means = vec![0.0; d];
        let mut stds = vec![0.0; d];
        if n == 0 {
            return Scaler { means, stds };
        }
        for row in x.rows_iter() {
            for (m, v) in means.iter_mut().zip(row) {
                *m += v;
            }
        }
        means.iter_mut().for_each(|m| *m /= n as f64);
        for row in x.rows_iter() {
            for ((s, v), m) in stds.iter_mut().zip(row).zip(&means) {
                *s += (v - m) * (v - m);
            }
        }
        for (j, s) in stds.iter_mut().enumerate() {
            let var = *s / n as f64;
            // all-equal columns can leave rounding residue in the mean
            let constant = x.rows_iter().all(|r| r[j] == x.get(0, j));
            *s = if constant { 0.0 } else { var.sqrt() };
        }
        Scaler { means, stds }
    }

    /// `(x - mean) / std` per cell; zero-std columns map to 0.
    pub fn transform(&self, x: &Matrix) -> Result<Matrix, PipelineError> {
        if x.ncols() != self.means.len() {
            return Err(PipelineError::DimensionMismatch {
                expected: self.means.len(),
                got: x.ncols(),
            });
        }
        let mut out = x.clone();
        for r in 0..out.nrows() {
            for (j, v) in out.row_mut(r).iter_mut().enumerate() {
                *v = if self.stds[j] > 0.0 { (*v - self.means[j]) / self.stds[j] } else { 0.0 };
            }
        }
        Ok(out)
    }

    pub fn fit_transform(x: &Matrix) -> (Scaler, Matrix) {
        let s = Scaler::fit(x);
        let t = s.transform(x).expect("fitted on the same matrix");
        (s, t)
    }
}
