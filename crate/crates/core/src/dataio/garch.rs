//! GARCH(p, q) conditional variance and GARCH(1,1) maximum-likelihood fitting.
//!
//! Indexing convention: `h[t]` is the variance forecast formed after observing
//! `eps[t]`, i.e. the conditional variance of `eps[t + 1]`:
//!
//! `h[t] = alpha0 + sum_i alpha[i] * eps[t - i]^2 + sum_j beta[j] * h[t - 1 - j]`
//!
//! Pre-sample variances equal `initial_variance`; pre-sample residuals are 0.

use serde::{Deserialize, Serialize};

use super::DataError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GarchParams {
    pub alpha0: f64,
    /// ARCH coefficients, lag 1 first.
    pub alpha: Vec<f64>,
    /// GARCH coefficients, lag 1 first.
    pub beta: Vec<f64>,
    pub initial_variance: f64,
}

impl GarchParams {
    pub fn garch11(alpha0: f64, alpha1: f64, beta1: f64, initial_variance: f64) -> Self {
        Self { alpha0, alpha: vec![alpha1], beta: vec![beta1], initial_variance }
    }

    pub fn persistence(&self) -> f64 {
        self.alpha.iter().sum::<f64>() + self.beta.iter().sum::<f64>()
    }

    /// `alpha0 / (1 - persistence)`.
    pub fn unconditional_variance(&self) -> f64 {
        self.alpha0 / (1.0 - self.persistence())
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let finite = |v: f64| v.is_finite();
        if !(self.alpha0 > 0.0) || !finite(self.alpha0) {
            return Err(DataError::InvalidParams("alpha0 must be > 0".into()));
        }
        if !(self.initial_variance > 0.0) || !finite(self.initial_variance) {
            return Err(DataError::InvalidParams("initial variance must be > 0".into()));
        }
        if self.alpha.iter().chain(&self.beta).any(|&c| !(c >= 0.0) || !finite(c)) {
            return Err(DataError::InvalidParams("coefficients must be >= 0".into()));
        }
        if self.persistence() >= 1.0 {
            return Err(DataError::InvalidParams(format!(
                "sum(alpha) + sum(beta) = {} >= 1",
                self.persistence()
            )));
        }
        Ok(())
    }
}

/// Conditional-variance recursion over `residuals`.
pub fn garch_variance(residuals: &[f64], params: &GarchParams) -> Result<Vec<f64>, DataError> {
    params.validate()?;
    Ok(variance_unchecked(residuals, params))
}

fn variance_unchecked(eps: &[f64], p: &GarchParams) -> Vec<f64> {
    let mut h: Vec<f64> = Vec::with_capacity(eps.len());
    for t in 0..eps.len() {
        let mut v = p.alpha0;
        for (i, a) in p.alpha.iter().enumerate() {
            if t >= i {
                v += a * eps[t - i] * eps[t - i];
            }
        }
        for (j, b) in p.beta.iter().enumerate() {
            let prev = if t > j { h[t - 1 - j] } else { p.initial_variance };
            v += b * prev;
        }
        h.push(v);
    }
    h
}

/// Gaussian log-likelihood of `residuals` under `params`.
///
/// Residual `t` is scored against the forecast `h[t - 1]` (the initial
/// variance for `t = 0`).
pub fn garch_log_likelihood(residuals: &[f64], params: &GarchParams) -> f64 {
    let h = variance_unchecked(residuals, params);
    let ln2pi = (2.0 * std::f64::consts::PI).ln();
    residuals
        .iter()
        .enumerate()
        .map(|(t, e)| {
            let s2 = if t == 0 { params.initial_variance } else { h[t - 1] };
            -0.5 * (ln2pi + s2.ln()) - e * e / (2.0 * s2)
        })
        .sum()
}

const MIN_FIT_LEN: usize = 50;
const NM_MAX_ITER: usize = 5000;
/// 95% quantile of chi-squared with one degree of freedom.
const LR_CRITICAL: f64 = 3.841;

/// Fits GARCH(1,1) by direct search on the Gaussian likelihood.
///
/// Residuals are rescaled to unit mean square before the search and the
/// intercept is mapped back afterwards. The pre-sample variance is the mean
/// square of the residuals.
pub fn fit_garch11(residuals: &[f64]) -> Result<GarchParams, DataError> {
    let n = residuals.len();
    if n < MIN_FIT_LEN {
        return Err(DataError::TooShort { need: MIN_FIT_LEN, got: n });
    }
    if residuals.iter().any(|e| !e.is_finite()) {
        return Err(DataError::DegenerateInput("non-finite residual".into()));
    }
    let mean = residuals.iter().sum::<f64>() / n as f64;
    let var = residuals.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / n as f64;
    if !(var > 1e-300) {
        return Err(DataError::DegenerateInput("zero-variance residuals".into()));
    }
    let ms = residuals.iter().map(|e| e * e).sum::<f64>() / n as f64;
    let scale = ms.sqrt();
    let eps: Vec<f64> = residuals.iter().map(|e| e / scale).collect();

    let objective = |x: &[f64]| -> f64 {
        let p = GarchParams::garch11(x[0], x[1], x[2], 1.0);
        if p.validate().is_err() {
            return f64::INFINITY;
        }
        let ll = garch_log_likelihood(&eps, &p);
        if ll.is_finite() {
            -ll
        } else {
            f64::INFINITY
        }
    };

    // moment-based start in the rescaled units: alpha0 = 0.1 * var
    let start = [0.1, 0.1, 0.8];
    let mut best = nelder_mead(&objective, &start, 0.05, NM_MAX_ITER)?;
    // restart from the optimum to escape a collapsed simplex
    best = nelder_mead(&objective, &best.0, 0.02, NM_MAX_ITER)?;
    // With alpha1 near 0 the likelihood is flat along alpha0 / (1 - beta1) =
    // const, so also search from a low-persistence start and keep that
    // solution unless the persistent one wins a 5% likelihood-ratio test.
    let low = nelder_mead(&objective, &[0.8, 0.1, 0.1], 0.05, NM_MAX_ITER)?;
    let low = nelder_mead(&objective, &low.0, 0.02, NM_MAX_ITER)?;
    let persistence = |x: &[f64]| x[1] + x[2];
    if persistence(&low.0) < persistence(&best.0) && 2.0 * (low.1 - best.1) < LR_CRITICAL {
        best = low;
    }
    let x = best.0;
    let fitted = GarchParams::garch11(x[0] * ms, x[1], x[2], ms);
    fitted.validate()?;
    Ok(fitted)
}

/// Minimises `f` from `start`; returns the best vertex and its value.
fn nelder_mead<F: Fn(&[f64]) -> f64>(
    f: &F,
    start: &[f64],
    step: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, f64), DataError> {
    let dim = start.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    simplex.push((start.to_vec(), f(start)));
    for i in 0..dim {
        let mut v = start.to_vec();
        v[i] += if v[i].abs() > 1e-12 { step.min(v[i].abs() * 0.5) } else { step };
        let fv = f(&v);
        simplex.push((v, fv));
    }
    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    for _ in 0..max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let f_best = simplex[0].1;
        let f_worst = simplex[dim].1;
        let spread = simplex
            .iter()
            .flat_map(|(v, _)| v.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if f_best.is_finite() && (f_worst - f_best).abs() <= 1e-11 * (1.0 + f_best.abs()) && spread < 1e-7 {
            return Ok(simplex.swap_remove(0));
        }
        let centroid: Vec<f64> = (0..dim)
            .map(|k| simplex[..dim].iter().map(|(v, _)| v[k]).sum::<f64>() / dim as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid.iter().zip(&simplex[dim].0).map(|(c, w)| c + t * (c - w)).collect()
        };
        let xr = along(alpha);
        let fr = f(&xr);
        if fr < simplex[0].1 {
            let xe = along(gamma);
            let fe = f(&xe);
            simplex[dim] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[dim - 1].1 {
            simplex[dim] = (xr, fr);
        } else {
            let (xc, fc) = if fr < simplex[dim].1 {
                let xc = along(rho);
                let fc = f(&xc);
                (xc, fc)
            } else {
                let xc = along(-rho);
                let fc = f(&xc);
                (xc, fc)
            };
            if fc < simplex[dim].1.min(fr) {
                simplex[dim] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                for (v, fv) in simplex.iter_mut().skip(1) {
                    for k in 0..dim {
                        v[k] = best[k] + sigma * (v[k] - best[k]);
                    }
                    *fv = f(v);
                }
            }
        }
    }
    Err(DataError::DidNotConverge(max_iter))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_only() {
        let p = GarchParams { alpha0: 0.1, alpha: vec![], beta: vec![], initial_variance: 1.0 };
        // no coefficients: persistence 0
        let h = garch_variance(&[1.0, -3.0, 2.0], &p).unwrap();
        assert_eq!(h, vec![0.1; 3]);
    }

    #[test]
    fn zero_residuals() {
        let p = GarchParams::garch11(0.2, 0.5, 0.0, 1.0);
        let h = garch_variance(&[0.0; 5], &p).unwrap();
        assert!(h.iter().all(|&v| (v - 0.2).abs() < 1e-15));
    }

    #[test]
    fn hand_recursion() {
        let p = GarchParams::garch11(0.1, 0.2, 0.3, 1.0);
        let h = garch_variance(&[1.0, 2.0], &p).unwrap();
        assert!((h[0] - 0.6).abs() < 1e-15);
        assert!((h[1] - 1.08).abs() < 1e-15);
    }

    #[test]
    fn higher_order_lags_use_zero_presample_residuals() {
        let p = GarchParams { alpha0: 0.1, alpha: vec![0.1, 0.2], beta: vec![0.3, 0.1], initial_variance: 2.0 };
        let h = garch_variance(&[1.0, 1.0], &p).unwrap();
        assert!((h[0] - (0.1 + 0.1 + 0.0 + 0.3 * 2.0 + 0.1 * 2.0)).abs() < 1e-15);
        assert!((h[1] - (0.1 + 0.1 + 0.2 + 0.3 * h[0] + 0.1 * 2.0)).abs() < 1e-15);
    }

    #[test]
    fn invalid_params() {
        let p = GarchParams::garch11(0.1, 0.5, 0.5, 1.0);
        assert!(matches!(garch_variance(&[1.0], &p), Err(DataError::InvalidParams(_))));
        let p = GarchParams::garch11(0.0, 0.1, 0.1, 1.0);
        assert!(garch_variance(&[1.0], &p).is_err());
    }

    #[test]
    fn constant_residuals_are_degenerate() {
        assert!(matches!(fit_garch11(&[0.5; 100]), Err(DataError::DegenerateInput(_))));
        assert!(matches!(fit_garch11(&[0.5; 10]), Err(DataError::TooShort { .. })));
    }

    #[test]
    fn nelder_mead_quadratic() {
        let f = |x: &[f64]| (x[0] - 1.0).powi(2) + 3.0 * (x[1] + 2.0).powi(2);
        let (x, _) = nelder_mead(&f, &[0.0, 0.0], 0.5, 5000).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-5 && (x[1] + 2.0).abs() < 1e-5);
    }
}
