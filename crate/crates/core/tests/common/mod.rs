//! Test-only reference implementations, independent of the library code.
#![allow(dead_code)]

use ota_anomaly::{Label, LabeledSample, TrainingSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Exact hard-margin solution `(w, b)` found by enumerating candidate
/// active sets.
///
/// The optimum is the minimum-norm point of the affine set cut out by its
/// active constraints, and some linearly independent subset of at most
/// `K + 1` of those defines the same set. For every subset containing both
/// labels we solve the KKT system
///
/// ```text
/// sum_j l_j y_i y_j <x_i, x_j> + y_i b = 1   (i in S)
/// sum_j l_j y_j                         = 0
/// ```
///
/// keep candidates that are primal feasible with `l >= 0`, and return the one
/// of smallest `|w|^2`.
pub fn kkt_enumeration(xs: &[Vec<f64>], ys: &[f64]) -> Option<(Vec<f64>, f64)> {
    let n = xs.len();
    let k = xs[0].len();
    let mut best: Option<(Vec<f64>, f64, f64)> = None;
    let mut subset = Vec::with_capacity(k + 1);
    for size in 2..=(k + 1).min(n) {
        combinations(n, size, &mut subset, 0, &mut |s| {
            if !s.iter().any(|&i| ys[i] > 0.0) || !s.iter().any(|&i| ys[i] < 0.0) {
                return;
            }
            let Some((w, b, lambdas)) = solve_active(xs, ys, s) else { return };
            if lambdas.iter().any(|&l| l < -1e-9) {
                return;
            }
            let norm: f64 = w.iter().map(|v| v * v).sum();
            let scale = 1e-9 * (1.0 + b.abs() + norm.sqrt());
            let feasible = xs.iter().zip(ys).all(|(x, &y)| y * (dot(&w, x) + b) >= 1.0 - scale);
            if feasible && best.as_ref().is_none_or(|(_, _, n0)| norm < *n0) {
                best = Some((w, b, norm));
            }
        });
    }
    best.map(|(w, b, _)| (w, b))
}

fn combinations(n: usize, size: usize, cur: &mut Vec<usize>, start: usize, f: &mut dyn FnMut(&[usize])) {
    if cur.len() == size {
        f(cur);
        return;
    }
    for i in start..n {
        if n - i < size - cur.len() {
            break;
        }
        cur.push(i);
        combinations(n, size, cur, i + 1, f);
        cur.pop();
    }
}

fn solve_active(xs: &[Vec<f64>], ys: &[f64], s: &[usize]) -> Option<(Vec<f64>, f64, Vec<f64>)> {
    let m = s.len();
    let dim = m + 1;
    let mut a = vec![vec![0.0; dim + 1]; dim];
    for (r, &i) in s.iter().enumerate() {
        for (c, &j) in s.iter().enumerate() {
            a[r][c] = ys[i] * ys[j] * dot(&xs[i], &xs[j]);
        }
        a[r][m] = ys[i];
        a[r][dim] = 1.0;
    }
    for (c, &j) in s.iter().enumerate() {
        a[m][c] = ys[j];
    }
    let sol = gauss(a)?;
    let lambdas = sol[..m].to_vec();
    let b = sol[m];
    let mut w = vec![0.0; xs[0].len()];
    for (l, &i) in lambdas.iter().zip(s) {
        for (wk, xk) in w.iter_mut().zip(&xs[i]) {
            *wk += l * ys[i] * xk;
        }
    }
    Some((w, b, lambdas))
}

/// Gaussian elimination with partial pivoting on an augmented matrix.
#[allow(clippy::needless_range_loop)]
fn gauss(mut a: Vec<Vec<f64>>) -> Option<Vec<f64>> {
    let n = a.len();
    let scale = a.iter().flat_map(|r| r[..n].iter()).fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-10 * scale {
            return None;
        }
        a.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                if f != 0.0 {
                    for c in col..=n {
                        a[r][c] -= f * a[col][c];
                    }
                }
            }
        }
    }
    Some((0..n).map(|i| a[i][n] / a[i][i]).collect())
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A random linearly separable set with a guaranteed geometric gap around a
/// random plane. Dimensions in `1..=max_dim`, sizes in `2..=max_len`.
pub fn random_separable(seed: u64, max_dim: usize, max_len: usize) -> TrainingSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = rng.random_range(1..=max_dim);
    let l = rng.random_range(2..=max_len);
    let normal: Vec<f64> = loop {
        let v: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
        if dot(&v, &v) > 0.01 {
            break v;
        }
    };
    let norm = dot(&normal, &normal).sqrt();
    // The plane passes within distance 2 of the origin, well inside the box.
    let offset = norm * rng.random_range(-2.0..2.0);
    let mut samples = Vec::with_capacity(l);
    while samples.len() < l {
        let x: Vec<f64> = (0..k).map(|_| rng.random_range(-5.0..5.0)).collect();
        let d = (dot(&normal, &x) + offset) / norm;
        if d.abs() < 0.2 {
            continue;
        }
        // Force both classes into the first two samples.
        let label = match samples.len() {
            0 if d < 0.0 => continue,
            1 if d > 0.0 => continue,
            _ if d > 0.0 => Label::Anomaly,
            _ => Label::Normal,
        };
        samples.push(LabeledSample { state: x, label });
    }
    TrainingSet::new(samples).expect("valid set")
}

pub fn split(set: &TrainingSet) -> (Vec<Vec<f64>>, Vec<f64>) {
    set.samples().iter().map(|s| (s.state.clone(), s.label.value())).unzip()
}
