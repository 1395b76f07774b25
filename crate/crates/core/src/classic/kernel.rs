//! Kernel functions for the SVM.

use serde::{Deserialize, Serialize};

use super::ClassicError;
use crate::matrix::{dot, sq_dist};
use crate::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Kernel {
    Linear,
    /// `exp(-gamma * |x - y|^2)`
    Rbf { gamma: f64 },
    /// `(<x, y> + 1)^degree`
    Poly { degree: u32 },
}

impl Kernel {
    #[inline]
    pub(crate) fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        match *self {
            Kernel::Linear => dot(x, y),
            Kernel::Rbf { gamma } => (-gamma * sq_dist(x, y)).exp(),
            Kernel::Poly { degree } => (dot(x, y) + 1.0).powi(degree as i32),
        }
    }
}

pub fn kernel_eval(kernel: &Kernel, x: &[f64], y: &[f64]) -> Result<f64, ClassicError> {
    if x.len() != y.len() {
        return Err(ClassicError::DimensionMismatch { expected: x.len(), got: y.len() });
    }
    if let Kernel::Rbf { gamma } = kernel {
        if !(*gamma >= 0.0) {
            return Err(ClassicError::InvalidParam { key: "gamma".into(), reason: "must be >= 0".into() });
        }
    }
    Ok(kernel.eval_unchecked(x, y))
}

/// Dense symmetric Gram matrix, row-major.
pub fn gram_matrix(kernel: &Kernel, x: &Matrix) -> Vec<f64> {
    let n = x.nrows();
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v = kernel.eval_unchecked(x.row(i), x.row(j));
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    k
}
