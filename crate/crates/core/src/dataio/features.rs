use serde::{Deserialize, Serialize};

use super::DataError;

/// What to do with the first `window - 1` positions of a moving average.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmaWarmup {
    /// Fill with the mean of the whole series. Uses future rows.
    FillGlobalMean,
    /// Return only the defined values (length `n - window + 1`).
    Drop,
}

/// Trailing simple moving average.
pub fn sma(series: &[f64], window: usize, warmup: SmaWarmup) -> Result<Vec<f64>, DataError> {
    let n = series.len();
    if window == 0 || window > n {
        return Err(DataError::WindowTooLarge { window, len: n });
    }
    let mut out = Vec::with_capacity(n);
    if warmup == SmaWarmup::FillGlobalMean {
        let global = anchored_mean(series);
        out.extend(std::iter::repeat(global).take(window - 1));
    }
    for end in window..=n {
        out.push(anchored_mean(&series[end - window..end]));
    }
    Ok(out)
}

// Mean taken around the first element so constant windows come back exactly.
fn anchored_mean(xs: &[f64]) -> f64 {
    let a = xs[0];
    a + xs.iter().map(|x| x - a).sum::<f64>() / xs.len() as f64
}
