//! Brute-force references shared by the integration tests and the acceptance run.
#![allow(dead_code)]

use nalgebra::DMatrix;
use plam::selection::{fit_weighted_lasso, Standardized};

/// Standardized-scale gradient check of the lasso optimality conditions.
pub fn kkt_violation(x: &DMatrix<f64>, y: &[f64], lambda: f64, w: &[f64]) -> f64 {
    let fit = fit_weighted_lasso(x, y, lambda, Some(w)).unwrap();
    let std = Standardized::new(x, y);
    let beta = &fit.standardized;
    let mut worst = 0.0f64;
    for (a, &j) in std.keep.iter().enumerate() {
        let mut grad = std.xty[a];
        for (b, bb) in beta.iter().enumerate() {
            grad -= std.gram[(a, b)] * bb;
        }
        let bound = lambda * w[j];
        let v = if beta[a] == 0.0 {
            (grad.abs() - bound).max(0.0)
        } else {
            (grad - bound * beta[a].signum()).abs()
        };
        worst = worst.max(v);
    }
    worst
}

/// Exact lasso by enumerating sign patterns: for each pattern the stationary
/// point of the smooth objective restricted to that orthant is solved and
/// kept if its signs agree with the pattern.
pub fn sign_enumeration(x: &DMatrix<f64>, y: &[f64], lambda: f64) -> Vec<f64> {
    let n = y.len() as f64;
    let p = x.ncols();
    let means: Vec<f64> = (0..p).map(|j| x.column(j).mean()).collect();
    let sds: Vec<f64> = (0..p)
        .map(|j| (x.column(j).iter().map(|v| (v - means[j]).powi(2)).sum::<f64>() / n).sqrt())
        .collect();
    let xs = DMatrix::from_fn(y.len(), p, |i, j| (x[(i, j)] - means[j]) / sds[j]);
    let ym = y.iter().sum::<f64>() / n;
    let yc: Vec<f64> = y.iter().map(|v| v - ym).collect();
    let objective = |b: &[f64]| {
        let mut rss = 0.0;
        for i in 0..y.len() {
            let f: f64 = (0..p).map(|j| xs[(i, j)] * b[j]).sum();
            rss += (yc[i] - f).powi(2);
        }
        rss / (2.0 * n) + lambda * b.iter().map(|v| v.abs()).sum::<f64>()
    };
    let mut best = (objective(&vec![0.0; p]), vec![0.0; p]);
    for code in 0..3usize.pow(p as u32) {
        let mut c = code;
        let signs: Vec<i32> = (0..p)
            .map(|_| {
                let s = (c % 3) as i32 - 1;
                c /= 3;
                s
            })
            .collect();
        let act: Vec<usize> = (0..p).filter(|&j| signs[j] != 0).collect();
        if act.is_empty() {
            continue;
        }
        let xa = xs.select_columns(&act);
        let g = xa.transpose() * &xa / n;
        let rhs = nalgebra::DVector::from_iterator(
            act.len(),
            act.iter().enumerate().map(|(a, &j)| {
                (0..y.len()).map(|i| xa[(i, a)] * yc[i]).sum::<f64>() / n - lambda * signs[j] as f64
            }),
        );
        let Some(sol) = g.lu().solve(&rhs) else { continue };
        if act.iter().enumerate().any(|(a, &j)| sol[a] * signs[j] as f64 <= 0.0) {
            continue;
        }
        let mut b = vec![0.0; p];
        for (a, &j) in act.iter().enumerate() {
            b[j] = sol[a];
        }
        let o = objective(&b);
        if o < best.0 {
            best = (o, b);
        }
    }
    best.1.iter().zip(&sds).map(|(b, s)| b / s).collect()
}

/// Best split of `rows` by exhaustive enumeration: (sse, feature, threshold).
pub fn brute_split(cols: &[Vec<f64>], y: &[f64], rows: &[usize], min_leaf: usize) -> Option<(f64, usize, f64)> {
    let sse = |rs: &[usize]| -> f64 {
        let m = rs.iter().map(|&i| y[i]).sum::<f64>() / rs.len() as f64;
        rs.iter().map(|&i| (y[i] - m).powi(2)).sum()
    };
    let mut best: Option<(f64, usize, f64)> = None;
    for (f, col) in cols.iter().enumerate() {
        let mut vals: Vec<f64> = rows.iter().map(|&i| col[i]).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        for w in vals.windows(2) {
            let t = 0.5 * (w[0] + w[1]);
            let (l, rr): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| col[i] <= t);
            if l.len() < min_leaf || rr.len() < min_leaf {
                continue;
            }
            let s = sse(&l) + sse(&rr);
            if best.is_none_or(|b| s < b.0 - 1e-9) {
                best = Some((s, f, t));
            }
        }
    }
    best
}

/// O(n^2) AUC over all positive-negative pairs, ties counted half.
pub fn brute_auc(scores: &[f64], labels: &[f64]) -> f64 {
    let s: Vec<f64> = scores.iter().map(|v| v.clamp(0.0, 1.0)).collect();
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..s.len() {
        for j in 0..s.len() {
            if labels[i] == 1.0 && labels[j] == 0.0 {
                den += 1.0;
                num += if s[i] > s[j] {
                    1.0
                } else if s[i] == s[j] {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    num / den
}
