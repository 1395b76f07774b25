use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{sharpe_ratio, EvalError};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestReport {
    pub market_returns: Vec<f64>,
    pub strategy_returns: Vec<f64>,
    pub random_returns: Vec<f64>,
    pub random_signals: Vec<i8>,
    pub market_curve: Vec<f64>,
    pub strategy_curve: Vec<f64>,
    pub random_curve: Vec<f64>,
    pub final_market: f64,
    pub final_strategy: f64,
    pub final_random: f64,
    /// `None` when the series has zero volatility or fewer than two steps.
    pub sharpe_market: Option<f64>,
    pub sharpe_strategy: Option<f64>,
    pub sharpe_random: Option<f64>,
    pub seed: u64,
    pub mode: String,
}

/// Running product of `1 + r`.
pub fn cumulative(returns: &[f64]) -> Vec<f64> {
    returns
        .iter()
        .scan(1.0f64, |acc, r| {
            *acc *= 1.0 + r;
            Some(*acc)
        })
        .collect()
}

/// `market_returns[t]` is the return earned while holding `signals[t]`.
pub fn backtest(
    market_returns: &[f64],
    signals: &[i8],
    random_seed: u64,
    mode: &str,
) -> Result<BacktestReport, EvalError> {
    if market_returns.len() != signals.len() {
        return Err(EvalError::LengthMismatch { left: market_returns.len(), right: signals.len() });
    }
    if let Some(&s) = signals.iter().find(|s| !(-1..=1).contains(*s)) {
        return Err(EvalError::InvalidSignal(s as i64));
    }
    let mut rng = seed::rng(random_seed);
    let random_signals: Vec<i8> = (0..signals.len()).map(|_| rng.random_range(-1i8..=1)).collect();
    let apply = |sig: &[i8]| -> Vec<f64> {
        market_returns.iter().zip(sig).map(|(&r, &s)| r * s as f64).collect()
    };
    let strategy_returns = apply(signals);
    let random_returns = apply(&random_signals);
    let market_curve = cumulative(market_returns);
    let strategy_curve = cumulative(&strategy_returns);
    let random_curve = cumulative(&random_returns);
    let last = |c: &[f64]| c.last().copied().unwrap_or(1.0);
    let sharpe = |r: &[f64]| sharpe_ratio(r, 0.0, 1.0).ok();
    Ok(BacktestReport {
        final_market: last(&market_curve),
        final_strategy: last(&strategy_curve),
        final_random: last(&random_curve),
        sharpe_market: sharpe(market_returns),
        sharpe_strategy: sharpe(&strategy_returns),
        sharpe_random: sharpe(&random_returns),
        market_returns: market_returns.to_vec(),
        strategy_returns,
        random_returns,
        random_signals,
        market_curve,
        strategy_curve,
        random_curve,
        seed: random_seed,
        mode: mode.to_string(),
    })
}

/// Columns `t, market, model, random`, full round-trip precision.
pub fn write_curves_csv<W: Write>(report: &BacktestReport, mut out: W) -> std::io::Result<()> {
    writeln!(out, "t,market,model,random")?;
    for t in 0..report.market_curve.len() {
        writeln!(
            out,
            "{t},{},{},{}",
            report.market_curve[t], report.strategy_curve[t], report.random_curve[t]
        )?;
    }
    Ok(())
}
