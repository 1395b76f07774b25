use serde::{Deserialize, Serialize};

use super::DataError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelThresholds {
    pub lower: f64,
    pub upper: f64,
}

/// Empirical quantile of an ascending-sorted sample, linear interpolation
/// between order statistics at rank h = (n - 1) p.
pub fn quantile_type7(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    debug_assert!(n > 0);
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// -1 below `lower`, +1 above `upper`, 0 otherwise (ties go to 0).
pub fn apply_thresholds(returns: &[f64], t: &LabelThresholds) -> Vec<i8> {
    returns
        .iter()
        .map(|&r| {
            if r < t.lower {
                -1
            } else if r > t.upper {
                1
            } else {
                0
            }
        })
        .collect()
}

/// Three-class labels from the `q_low` / `q_high` quantiles of next-period returns.
pub fn label_by_quantiles(
    next_returns: &[f64],
    q_low: f64,
    q_high: f64,
) -> Result<(Vec<i8>, LabelThresholds), DataError> {
    if next_returns.is_empty() {
        return Err(DataError::EmptySeries);
    }
    if next_returns.len() < 2 {
        return Err(DataError::TooShort { need: 2, got: next_returns.len() });
    }
    if !(0.0..=1.0).contains(&q_low) || !(0.0..=1.0).contains(&q_high) || q_low > q_high {
        return Err(DataError::InvalidQuantiles(q_low, q_high));
    }
    let mut sorted = next_returns.to_vec();
    sorted.sort_by(f64::total_cmp);
    let t = LabelThresholds {
        lower: quantile_type7(&sorted, q_low),
        upper: quantile_type7(&sorted, q_high),
    };
    Ok((apply_thresholds(next_returns, &t), t))
}

/// `out[t] = xs[t + 1]`; the last element has no successor and is dropped.
pub fn shift_series<T: Copy>(xs: &[T]) -> Vec<T> {
    xs.iter().skip(1).copied().collect()
}

/// Aligns next-period labels with current rows.
pub fn shift_labels(labels: &[i8]) -> Vec<i8> {
    shift_series(labels)
}
