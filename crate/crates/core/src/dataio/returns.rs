use serde::{Deserialize, Serialize};

use super::DataError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReturnKind {
    #[default]
    Simple,
    Log,
}

/// Per-period returns of a price path. Element 0 is a 0.0 warm-up fill so the
/// output has the same length as the input.
pub fn compute_returns(prices: &[f64], kind: ReturnKind) -> Result<Vec<f64>, DataError> {
    if prices.len() < 2 {
        return Err(DataError::TooShort { need: 2, got: prices.len() });
    }
    if let Some(i) = prices.iter().position(|&p| !(p > 0.0) || !p.is_finite()) {
        return Err(DataError::NonPositivePrice(i));
    }
    let mut out = Vec::with_capacity(prices.len());
    out.push(0.0);
    out.extend(prices.windows(2).map(|w| match kind {
        ReturnKind::Simple => w[1] / w[0] - 1.0,
        ReturnKind::Log => (w[1] / w[0]).ln(),
    }));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simple_returns() {
        let r = compute_returns(&[100.0, 110.0], ReturnKind::Simple).unwrap();
        assert_eq!(r[0], 0.0);
        assert!((r[1] - 0.10).abs() < 1e-15);
        assert_eq!(compute_returns(&[100.0; 3], ReturnKind::Simple).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn log_returns() {
        let r = compute_returns(&[100.0, 50.0], ReturnKind::Log).unwrap();
        assert!((r[1] - (-0.693_147_180_559_945_3)).abs() < 1e-15);
    }

    #[test]
    fn rejects_non_positive() {
        assert_eq!(
            compute_returns(&[1.0, 0.0, 2.0], ReturnKind::Simple),
            Err(DataError::NonPositivePrice(1))
        );
    }
}
