use indexmap::IndexMap;
use rand_distr::{Distribution, Normal};

use super::{DataError, Frame};
use crate::seed;

/// Adds i.i.d. Gaussian noise to every feature cell.
///
/// Each column draws from its own stream keyed by (seed, column name), so the
/// result does not depend on column order. Returns and labels are untouched.
pub fn augment_jitter(frame: &Frame, sigma: f64, seed: u64) -> Result<Frame, DataError> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(DataError::InvalidParams(format!("jitter sigma {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(frame.clone());
    }
    let normal = Normal::new(0.0, sigma).expect("finite sigma");
    let columns: IndexMap<String, Vec<f64>> = frame
        .columns()
        .iter()
        .map(|(name, col)| {
            let mut rng = seed::task_rng(seed, &[seed::hash_str(name)]);
            let noisy = col.iter().map(|v| v + normal.sample(&mut rng)).collect();
            (name.clone(), noisy)
        })
        .collect();
    Frame::new(
        frame.timestamps().to_vec(),
        columns,
        frame.returns().to_vec(),
        frame.labels().map(<[i8]>::to_vec),
    )
}

/// Contiguous sub-frame `[start, start + length)`.
pub fn augment_window_slice(frame: &Frame, start: usize, length: usize) -> Result<Frame, DataError> {
    frame.slice(start, length)
}
