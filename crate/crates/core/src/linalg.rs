//! Dense linear-algebra helpers shared by the fitting code.
//!
//! Matrices are nalgebra `DMatrix<f64>` (column-major). The hot loops in
//! backfitting and coordinate descent work directly on column slices.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

/// Relative residual norm below which a column counts as linearly dependent
/// on the columns accepted before it.
pub const RANK_TOL: f64 = 1e-9;

/// Orthogonal projector onto the span of a set of columns, with columns that
/// are numerically dependent on earlier ones pinned to a zero coefficient.
#[derive(Debug, Clone)]
pub struct Projector {
    /// Orthonormal basis of the accepted columns (n x r).
    q: DMatrix<f64>,
    /// Upper-triangular factor for the accepted columns (r x r).
    r: DMatrix<f64>,
    accepted: Vec<usize>,
    pinned: Vec<usize>,
    ncols: usize,
}

impl Projector {
    /// Modified Gram-Schmidt with one re-orthogonalization pass.
    pub fn new(x: &DMatrix<f64>) -> Self {
        let n = x.nrows();
        let k = x.ncols();
        let mut q_cols: Vec<DVector<f64>> = Vec::with_capacity(k);
        let mut r = DMatrix::<f64>::zeros(k, k);
        let mut accepted = Vec::new();
        let mut pinned = Vec::new();
        for j in 0..k {
            let original = x.column(j).into_owned();
            let norm0 = original.norm();
            let mut v = original;
            let mut coeffs = vec![0.0; q_cols.len()];
            for _pass in 0..2 {
                for (i, qi) in q_cols.iter().enumerate() {
                    let c = qi.dot(&v);
                    coeffs[i] += c;
                    v.axpy(-c, qi, 1.0);
                }
            }
            let norm = v.norm();
            if norm0 == 0.0 || norm <= RANK_TOL * norm0 || !norm.is_finite() {
                pinned.push(j);
                continue;
            }
            let col = accepted.len();
            for (i, c) in coeffs.iter().enumerate() {
                r[(i, col)] = *c;
            }
            r[(col, col)] = norm;
            q_cols.push(v / norm);
            accepted.push(j);
        }
        let rank = accepted.len();
        let q = if rank == 0 {
            DMatrix::zeros(n, 0)
        } else {
            DMatrix::from_columns(&q_cols)
        };
        let r = r.view((0, 0), (rank, rank)).into_owned();
        Projector { q, r, accepted, pinned, ncols: k }
    }

    pub fn rank(&self) -> usize {
        self.accepted.len()
    }

    pub fn pinned(&self) -> &[usize] {
        &self.pinned
    }

    /// Least-squares coefficients for all original columns (pinned ones are 0).
    pub fn solve(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.ncols];
        let rank = self.rank();
        if rank == 0 {
            return out;
        }
        let yv = DVector::from_column_slice(y);
        let qty = self.q.tr_mul(&yv);
        let mut beta = vec![0.0; rank];
        for i in (0..rank).rev() {
            let mut s = qty[i];
            for j in (i + 1)..rank {
                s -= self.r[(i, j)] * beta[j];
            }
            beta[i] = s / self.r[(i, i)];
        }
        for (b, &j) in beta.iter().zip(&self.accepted) {
            out[j] = *b;
        }
        out
    }

    /// Orthogonal projection of `y` onto the column span.
    pub fn project(&self, y: &[f64]) -> Vec<f64> {
        if self.rank() == 0 {
            return vec![0.0; y.len()];
        }
        let yv = DVector::from_column_slice(y);
        let qty = self.q.tr_mul(&yv);
        (&self.q * qty).as_slice().to_vec()
    }
}

/// Ordinary least squares result.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    pub coefficients: Vec<f64>,
    pub pinned: Vec<usize>,
    pub rss: f64,
    pub rank: usize,
}

pub fn least_squares(x: &DMatrix<f64>, y: &[f64]) -> LeastSquares {
    let proj = Projector::new(x);
    let coefficients = proj.solve(y);
    let fitted = x * DVector::from_column_slice(&coefficients);
    let rss = y
        .iter()
        .zip(fitted.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    LeastSquares {
        coefficients,
        pinned: proj.pinned().to_vec(),
        rss,
        rank: proj.rank(),
    }
}

/// Ratio of extreme eigenvalues of a symmetric matrix; infinite when the
/// smallest eigenvalue is not positive.
pub fn condition_number(a: &DMatrix<f64>) -> f64 {
    let eig = SymmetricEigen::new(a.clone());
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in eig.eigenvalues.iter() {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if lo <= 0.0 || !lo.is_finite() {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Solve a symmetric positive-definite system, `None` if Cholesky fails.
pub fn spd_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    Cholesky::new(a.clone()).map(|c| c.solve(b))
}

/// Inverse of a symmetric positive-definite matrix.
pub fn spd_inverse(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    Cholesky::new(a.clone()).map(|c| c.inverse())
}

/// X'X for a column-major matrix, exploiting symmetry.
pub fn gram(x: &DMatrix<f64>) -> DMatrix<f64> {
    let k = x.ncols();
    let mut g = DMatrix::zeros(k, k);
    for i in 0..k {
        let ci = x.column(i);
        for j in 0..=i {
            let v = ci.dot(&x.column(j));
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    g
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().sum::<f64>() / x.len() as f64
}

/// Population variance (divides by n).
pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    if x.is_empty() {
        return 0.0;
    }
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64
}

/// Sample standard deviation (divides by n - 1).
pub fn sample_sd(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(x);
    (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1) as f64).sqrt()
}

/// Linear-interpolation quantile of already sorted data (type 7).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    assert!(n > 0, "quantile of empty slice");
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn sorted(x: &[f64]) -> Vec<f64> {
    let mut v = x.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let ma = mean(a);
    let mb = mean(b);
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        0.0
    } else {
        sab / (saa * sbb).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projector_pins_duplicate_column() {
        let x = DMatrix::from_row_slice(4, 3, &[1., 2., 2., 1., 3., 3., 1., 5., 5., 1., 7., 7.]);
        let p = Projector::new(&x);
        assert_eq!(p.pinned(), &[2]);
        let y = [3.0, 5.0, 9.0, 13.0];
        let b = p.solve(&y);
        assert!((b[0] + 1.0).abs() < 1e-10);
        assert!((b[1] - 2.0).abs() < 1e-10);
        assert_eq!(b[2], 0.0);
    }

    #[test]
    fn quantiles_interpolate() {
        let s = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&s, 0.0), 1.0);
        assert_eq!(quantile_sorted(&s, 1.0), 4.0);
        assert!((quantile_sorted(&s, 0.5) - 2.5).abs() < 1e-15);
    }

    #[test]
    fn condition_of_singular_is_infinite() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(condition_number(&a).is_infinite());
    }
}
