use super::EvalError;

/// Mean excess return over its sample standard deviation, times
/// `sqrt(annualization_factor)`.
pub fn sharpe_ratio(
    returns: &[f64],
    risk_free_per_period: f64,
    annualization_factor: f64,
) -> Result<f64, EvalError> {
    let n = returns.len();
    if n < 2 {
        return Err(EvalError::TooShort { need: 2, got: n });
    }
    let excess: Vec<f64> = returns.iter().map(|r| r - risk_free_per_period).collect();
    let mean = excess.iter().sum::<f64>() / n as f64;
    let var = excess.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();
    // relative cutoff: a constant series can leave rounding noise in the std
    if sd == 0.0 || sd <= 1e-14 * mean.abs() {
        return Err(EvalError::ZeroVolatility);
    }
    Ok(mean / sd * annualization_factor.sqrt())
}

/// Profit of one trade: `(predicted - actual) * quantity`.
pub fn trade_profit(predicted_price: f64, actual_price: f64, quantity: f64) -> f64 {
    (predicted_price - actual_price) * quantity
}

pub fn trade_profit_total(predicted: &[f64], actual: &[f64], quantity: &[f64]) -> Result<f64, EvalError> {
    if predicted.len() != actual.len() {
        return Err(EvalError::LengthMismatch { left: predicted.len(), right: actual.len() });
    }
    if predicted.len() != quantity.len() {
        return Err(EvalError::LengthMismatch { left: predicted.len(), right: quantity.len() });
    }
    Ok(predicted
        .iter()
        .zip(actual)
        .zip(quantity)
        .map(|((&p, &s), &q)| trade_profit(p, s, q))
        .sum())
}

/// `w' S w` for a row-major K x K covariance.
pub fn portfolio_variance(weights: &[f64], covariance: &[Vec<f64>]) -> Result<f64, EvalError> {
    let k = weights.len();
    if covariance.len() != k || covariance.iter().any(|r| r.len() != k) {
        return Err(EvalError::DimensionMismatch(format!(
            "{k} weights against a {}-row covariance",
            covariance.len()
        )));
    }
    for i in 0..k {
        for j in (i + 1)..k {
            if (covariance[i][j] - covariance[j][i]).abs() > 1e-9 {
                return Err(EvalError::Asymmetric(i, j));
            }
        }
    }
    Ok((0..k)
        .map(|i| weights[i] * (0..k).map(|j| covariance[i][j] * weights[j]).sum::<f64>())
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sharpe_hand_value() {
        let s = sharpe_ratio(&[0.01, 0.02, 0.03], 0.0, 1.0).unwrap();
        assert!((s - 2.0).abs() < 1e-12);
    }

    #[test]
    fn sharpe_constant_excess_is_zero_volatility() {
        assert_eq!(sharpe_ratio(&[0.01; 5], 0.01, 1.0), Err(EvalError::ZeroVolatility));
        assert_eq!(sharpe_ratio(&[0.03; 5], 0.0, 1.0), Err(EvalError::ZeroVolatility));
    }

    #[test]
    fn sharpe_annualises() {
        let a = sharpe_ratio(&[0.01, 0.02, 0.03], 0.0, 252.0).unwrap();
        assert!((a - 2.0 * 252f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn profits() {
        assert_eq!(trade_profit(105.0, 100.0, 2.0), 10.0);
        assert_eq!(trade_profit(50.0, 50.0, 7.0), 0.0);
        assert_eq!(trade_profit_total(&[105.0, 98.0], &[100.0, 100.0], &[2.0, 1.0]).unwrap(), 8.0);
        assert!(trade_profit_total(&[1.0], &[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn portfolio_quadratic_form() {
        let eye = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        assert_eq!(portfolio_variance(&[1.0, 0.0], &eye).unwrap(), 1.0);
        assert_eq!(portfolio_variance(&[0.5, 0.5], &eye).unwrap(), 0.5);
        let bad = vec![vec![1.0, 0.2], vec![0.1, 1.0]];
        assert_eq!(portfolio_variance(&[0.5, 0.5], &bad), Err(EvalError::Asymmetric(0, 1)));
        assert!(portfolio_variance(&[1.0], &eye).is_err());
    }
}
