use serde::{Deserialize, Serialize};

use super::ClassicError;
use crate::matrix::sq_dist;
use crate::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub distance_weighted: bool,
    pub x: Matrix,
    /// Class index of every stored row.
    pub y: Vec<usize>,
    pub n_classes: usize,
}

impl KnnModel {
    pub fn fit(x: &Matrix, y: &[usize], n_classes: usize, k: usize, distance_weighted: bool) -> Self {
        Self { k, distance_weighted, x: x.clone(), y: y.to_vec(), n_classes }
    }

    pub fn predict_row(&self, row: &[f64]) -> usize {
        let n = self.x.nrows();
        let mut d: Vec<(f64, usize)> = (0..n).map(|i| (sq_dist(self.x.row(i), row), i)).collect();
        let k = self.k.min(n);
        // nearest first, earlier rows win distance ties
        d.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let near = &d[..k];
        let mut votes = vec![0.0; self.n_classes];
        if self.distance_weighted && near.iter().any(|(dist, _)| *dist == 0.0) {
            for (dist, i) in near {
                if *dist == 0.0 {
                    votes[self.y[*i]] += 1.0;
                }
            }
        } else {
            for (dist, i) in near {
                votes[self.y[*i]] += if self.distance_weighted { 1.0 / dist.sqrt() } else { 1.0 };
            }
        }
        super::argmax(&votes)
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<usize>, ClassicError> {
        check_dim(self.x.ncols(), x)?;
        Ok(x.rows_iter().map(|r| self.predict_row(r)).collect())
    }
}

pub(crate) fn check_dim(expected: usize, x: &Matrix) -> Result<(), ClassicError> {
    if x.nrows() > 0 && x.ncols() != expected {
        return Err(ClassicError::DimensionMismatch { expected, got: x.ncols() });
    }
    Ok(())
}
