//! Reference implementations the suites compare against. Each one is the
//! textbook formulation, written without reusing library code.

#![allow(dead_code)]

/// Stationary personalized PageRank by solving the linear system
/// `(I - d·T - d·r·δᵀ) p = (1 - d)·r` with Gaussian elimination, where `T` is
/// the column-stochastic transition matrix, `δ` marks dangling nodes and `r`
/// is uniform over `reset`.
pub fn dense_ppr(adj: &[Vec<usize>], reset: &[usize], damping: f64) -> Vec<f64> {
    let n = adj.len();
    let mut r = vec![0.0; n];
    let mut distinct = reset.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    for &i in &distinct {
        r[i] = 1.0 / distinct.len() as f64;
    }
    let mut a = vec![vec![0.0; n + 1]; n];
    for (i, row) in a.iter_mut().enumerate() {
        row[i] = 1.0;
        row[n] = (1.0 - damping) * r[i];
    }
    for (src, targets) in adj.iter().enumerate() {
        if targets.is_empty() {
            for (j, row) in a.iter_mut().enumerate() {
                row[src] -= damping * r[j];
            }
        } else {
            let w = 1.0 / targets.len() as f64;
            for &dst in targets {
                a[dst][src] -= damping * w;
            }
        }
    }
    solve(a)
}

/// Gaussian elimination with partial pivoting on an augmented matrix.
pub fn solve(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        for row in 0..n {
            if row != col {
                let f = a[row][col] / a[col][col];
                if f != 0.0 {
                    for k in col..=n {
                        a[row][k] -= f * a[col][k];
                    }
                }
            }
        }
    }
    (0..n).map(|i| a[i][n] / a[i][i]).collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Median by full sort.
pub fn sorted_median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Robust z-score of `x` against `baseline`: distance from the median over
/// 1.4826 times the median absolute deviation (plus 1e-9).
pub fn robust_z(x: f64, baseline: &[f64]) -> f64 {
    let m = sorted_median(baseline);
    let dev: Vec<f64> = baseline.iter().map(|b| (b - m).abs()).collect();
    (x - m).abs() / (1.4826 * sorted_median(&dev) + 1e-9)
}
