#![allow(dead_code)]

use rand::Rng;
use rand_distr::{Distribution, Normal};
use tsclass::classic::{kernel_eval, Kernel};
use tsclass::seed;
use tsclass::Matrix;

/// Dense solve with partial pivoting; `None` when (near) singular.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

pub fn dual_objective(alpha: &[f64], y: &[f64], k: &[Vec<f64>]) -> f64 {
    let n = alpha.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += alpha[i] * alpha[j] * y[i] * y[j] * k[i][j];
        }
    }
    alpha.iter().sum::<f64>() - 0.5 * quad
}

pub fn gram(kernel: &Kernel, x: &Matrix) -> Vec<Vec<f64>> {
    let n = x.nrows();
    (0..n)
        .map(|i| (0..n).map(|j| kernel_eval(kernel, x.row(i), x.row(j)).unwrap()).collect())
        .collect()
}

/// Optimal dual value by enumerating every (0 / C / free) assignment and
/// solving the stationarity system on the free set.
pub fn brute_force_dual(x: &Matrix, y: &[f64], c: f64, kernel: &Kernel) -> f64 {
    let n = y.len();
    let k = gram(kernel, x);
    let mut best = f64::NEG_INFINITY;
    let total = 3usize.pow(n as u32);
    for code in 0..total {
        let mut state = vec![0u8; n];
        let mut t = code;
        for s in state.iter_mut() {
            *s = (t % 3) as u8;
            t /= 3;
        }
        let free: Vec<usize> = (0..n).filter(|&i| state[i] == 2).collect();
        let mut alpha: Vec<f64> = state.iter().map(|&s| if s == 1 { c } else { 0.0 }).collect();
        if free.is_empty() {
            let eq: f64 = alpha.iter().zip(y).map(|(a, y)| a * y).sum();
            if eq.abs() < 1e-9 {
                best = best.max(dual_objective(&alpha, y, &k));
            }
            continue;
        }
        // unknowns: alpha_free, nu
        let m = free.len();
        let mut a = vec![vec![0.0; m + 1]; m + 1];
        let mut b = vec![0.0; m + 1];
        for (r, &i) in free.iter().enumerate() {
            let fixed: f64 = (0..n).filter(|j| state[*j] == 1).map(|j| y[i] * y[j] * k[i][j] * c).sum();
            for (cc, &j) in free.iter().enumerate() {
                a[r][cc] = y[i] * y[j] * k[i][j];
            }
            a[r][m] = y[i];
            b[r] = 1.0 - fixed;
        }
        for (cc, &j) in free.iter().enumerate() {
            a[m][cc] = y[j];
        }
        b[m] = -(0..n).filter(|j| state[*j] == 1).map(|j| y[j] * c).sum::<f64>();
        let Some(sol) = gauss_solve(a, b) else { continue };
        if sol[..m].iter().any(|&v| v <= 0.0 || v >= c) {
            continue;
        }
        for (cc, &j) in free.iter().enumerate() {
            alpha[j] = sol[cc];
        }
        best = best.max(dual_objective(&alpha, y, &k));
    }
    best
}

/// Two Gaussian clouds pushed apart along a random direction so they are
/// linearly separable with margin.
pub fn separable_instance(seed_value: u64, n: usize, d: usize) -> (Matrix, Vec<f64>) {
    let mut rng = seed::rng(seed_value);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut dir: Vec<f64> = (0..d).map(|_| normal.sample(&mut rng)).collect();
    let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
    dir.iter_mut().for_each(|v| *v /= norm);
    let mut rows = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let label = if i % 2 == 0 { 1.0 } else { -1.0 };
        let mut p: Vec<f64> = (0..d).map(|_| normal.sample(&mut rng)).collect();
        let proj: f64 = p.iter().zip(&dir).map(|(a, b)| a * b).sum();
        let shift = label * (1.0 + rng.random::<f64>()) - proj;
        for (pj, dj) in p.iter_mut().zip(&dir) {
            *pj += shift * dj;
        }
        rows.push(p);
        y.push(label);
    }
    (Matrix::from_rows(&rows), y)
}

/// Three well separated Gaussian blobs labelled -1, 0, 1.
pub fn blobs(seed_value: u64, n: usize, spread: f64) -> (Matrix, Vec<i8>) {
    let mut rng = seed::rng(seed_value);
    let normal = Normal::new(0.0, spread).unwrap();
    let centers = [[-5.0, 0.0], [0.0, 5.0], [5.0, 0.0]];
    let mut rows = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % 3;
        rows.push(vec![centers[c][0] + normal.sample(&mut rng), centers[c][1] + normal.sample(&mut rng)]);
        y.push(c as i8 - 1);
    }
    (Matrix::from_rows(&rows), y)
}

pub fn accuracy(a: &[i8], b: &[i8]) -> f64 {
    a.iter().zip(b).filter(|(x, y)| x == y).count() as f64 / a.len() as f64
}
