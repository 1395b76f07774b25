use std::str::FromStr;

use indexmap::IndexMap;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::BenchError;
use crate::dataio::Frame;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthKind {
    /// Next return is a fixed linear score of the current features plus noise.
    PlantedSignal,
    /// As `PlantedSignal`, with the score's sign flipped from `shift_at` on.
    RegimeShift,
    /// Features and returns are independent.
    RandomWalk,
}

impl FromStr for SynthKind {
    type Err = BenchError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "planted_signal" => Ok(SynthKind::PlantedSignal),
            "regime_shift" => Ok(SynthKind::RegimeShift),
            "random_walk" => Ok(SynthKind::RandomWalk),
            other => Err(BenchError::Config(format!(
                "unknown synthetic kind `{other}` (expected planted_signal|regime_shift|random_walk)"
            ))),
        }
    }
}

/// Noise scale at which thresholding the score recovers the 0.33/0.67
/// quantile class about 80% of the time.
pub const BAYES_80_NOISE: f64 = 0.36;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub kind: SynthKind,
    pub n: usize,
    pub d: usize,
    pub seed: u64,
    /// Seed of the score weights; frames sharing it share the signal.
    /// Defaults to `seed`.
    pub weight_seed: Option<u64>,
    pub shift_at: usize,
    /// Noise standard deviation relative to the unit-variance score.
    pub noise: f64,
    /// Scale of the per-step returns.
    pub volatility: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            kind: SynthKind::PlantedSignal,
            n: 12000,
            d: 5,
            seed: 0,
            weight_seed: None,
            shift_at: 400,
            noise: BAYES_80_NOISE,
            volatility: 1e-3,
        }
    }
}

const START_MS: i64 = 1_577_836_800_000;
const STEP_MS: i64 = 60_000;

/// Unit-norm score weights for `weight_seed`.
pub fn planted_weights(weight_seed: u64, d: usize) -> Vec<f64> {
    let mut rng = seed::task_rng(weight_seed, &[0x77]);
    let mut w: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
    let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
    for v in &mut w {
        *v /= norm;
    }
    w
}

/// Columns `f0..f{d-1}` and `close`, unlabeled, minute timestamps.
/// Row `t` features drive the return realised at row `t + 1`.
pub fn gen_synthetic(kind: SynthKind, n: usize, d: usize, seed_value: u64) -> crate::Result<Frame> {
    gen_synthetic_spec(&SynthSpec { kind, n, d, seed: seed_value, ..SynthSpec::default() })
}

pub fn gen_synthetic_spec(spec: &SynthSpec) -> crate::Result<Frame> {
    let (n, d) = (spec.n, spec.d);
    if n < 50 || d < 1 {
        return Err(BenchError::Config(format!("synthetic data needs n >= 50 and d >= 1 (got n={n}, d={d})")).into());
    }
    if !(spec.noise >= 0.0) || !(spec.volatility > 0.0) {
        return Err(BenchError::Config("synthetic noise must be >= 0 and volatility > 0".into()).into());
    }
    let w = planted_weights(spec.weight_seed.unwrap_or(spec.seed), d);
    let mut rng = seed::task_rng(spec.seed, &[0x78]);
    let mut feats = vec![vec![0.0; n]; d];
    let mut returns = vec![0.0; n];
    for t in 0..n {
        let mut score = 0.0;
        for j in 0..d {
            let v: f64 = StandardNormal.sample(&mut rng);
            feats[j][t] = v;
            score += w[j] * v;
        }
        let eps: f64 = StandardNormal.sample(&mut rng);
        if t + 1 < n {
            let signal = match spec.kind {
                SynthKind::PlantedSignal => score,
                SynthKind::RegimeShift if t < spec.shift_at => score,
                SynthKind::RegimeShift => -score,
                SynthKind::RandomWalk => 0.0,
            };
            let noise = match spec.kind {
                // same return variance as the other kinds
                SynthKind::RandomWalk => (1.0 + spec.noise * spec.noise).sqrt(),
                _ => spec.noise,
            };
            returns[t + 1] = spec.volatility * (signal + noise * eps);
        }
    }
    let mut close = Vec::with_capacity(n);
    let mut p = 100.0;
    for &r in &returns {
        p *= 1.0 + r;
        close.push(p);
    }
    let mut columns = IndexMap::new();
    for (j, col) in feats.into_iter().enumerate() {
        columns.insert(format!("f{j}"), col);
    }
    columns.insert("close".to_string(), close);
    let timestamps = (0..n as i64).map(|t| START_MS + t * STEP_MS).collect();
    Ok(Frame::new(timestamps, columns, returns, None)?)
}
