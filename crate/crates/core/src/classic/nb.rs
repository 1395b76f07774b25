use serde::{Deserialize, Serialize};

use super::knn::check_dim;
use super::ClassicError;
use crate::matrix::variance;
use crate::Matrix;

/// Per-class, per-feature Gaussian likelihoods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianNbModel {
    pub log_priors: Vec<f64>,
    /// `n_classes x d`, row-major.
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
    pub d: usize,
}

impl GaussianNbModel {
    pub fn fit(x: &Matrix, y: &[usize], n_classes: usize) -> Self {
        let (n, d) = (x.nrows(), x.ncols());
        let max_var = (0..d).map(|j| variance(&x.column(j))).fold(0.0, f64::max);
        let floor = if max_var > 0.0 { 1e-9 * max_var } else { 1e-9 };
        let mut means = vec![0.0; n_classes * d];
        let mut variances = vec![0.0; n_classes * d];
        let mut log_priors = vec![f64::NEG_INFINITY; n_classes];
        for c in 0..n_classes {
            let rows: Vec<usize> = (0..n).filter(|&i| y[i] == c).collect();
            if rows.is_empty() {
                continue;
            }
            log_priors[c] = (rows.len() as f64 / n as f64).ln();
            let sub = x.select_rows(&rows);
            for j in 0..d {
                let col = sub.column(j);
                means[c * d + j] = crate::matrix::mean(&col);
                variances[c * d + j] = variance(&col) + floor;
            }
        }
        Self { log_priors, means, variances, d }
    }

    pub fn joint_log_likelihood(&self, row: &[f64]) -> Vec<f64> {
        let d = self.d;
        (0..self.log_priors.len())
            .map(|c| {
                let mut ll = self.log_priors[c];
                for j in 0..d {
                    let v = self.variances[c * d + j];
                    let z = row[j] - self.means[c * d + j];
                    ll -= 0.5 * ((2.0 * std::f64::consts::PI * v).ln() + z * z / v);
                }
                ll
            })
            .collect()
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<usize>, ClassicError> {
        check_dim(self.d, x)?;
        Ok(x.rows_iter().map(|r| super::argmax(&self.joint_log_likelihood(r))).collect())
    }
}
