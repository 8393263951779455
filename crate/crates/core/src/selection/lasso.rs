//! Lasso by covariance-mode coordinate descent on standardized columns.
//!
//! Objective: `(1/2n) |y_c - X_s b|^2 + lambda sum w_j |b_j|`, with `X_s` the
//! columns scaled to unit (1/n) variance and `y_c` the centred target.
//! Coefficients are returned on the original column scale.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{LambdaRule, PathPoint, SelectionError, SelectionResult, Tuning};
use crate::linalg;
use crate::rng;

pub const LAMBDA_GRID: usize = 100;
const LAMBDA_RATIO: f64 = 1e-4;
const CD_TOL: f64 = 1e-7;
const MAX_SWEEPS: usize = 100_000;

/// Standardized problem in Gram form.
#[derive(Debug, Clone)]
pub struct Standardized {
    pub n: usize,
    pub p: usize,
    /// Columns with non-zero variance, as positions in the input matrix.
    pub keep: Vec<usize>,
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
    pub y_mean: f64,
    /// `X_s' X_s / n` over kept columns.
    pub gram: DMatrix<f64>,
    /// `X_s' y_c / n` over kept columns.
    pub xty: Vec<f64>,
    /// `y_c' y_c / n`.
    pub yy: f64,
}

impl Standardized {
    pub fn new(x: &DMatrix<f64>, y: &[f64]) -> Self {
        let n = x.nrows();
        let p = x.ncols();
        let nf = n as f64;
        let y_mean = linalg::mean(y);
        let yc: Vec<f64> = y.iter().map(|v| v - y_mean).collect();
        let mut keep = Vec::new();
        let mut means = Vec::new();
        let mut sds = Vec::new();
        let mut cols = Vec::new();
        for j in 0..p {
            let col = x.column(j);
            let m = col.sum() / nf;
            let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / nf;
            let sd = var.sqrt();
            if !(sd > 1e-12 * (1.0 + m.abs())) {
                continue;
            }
            keep.push(j);
            means.push(m);
            sds.push(sd);
            cols.push(col.map(|v| (v - m) / sd));
        }
        let xs = if cols.is_empty() {
            DMatrix::zeros(n, 0)
        } else {
            DMatrix::from_columns(&cols)
        };
        let gram = linalg::gram(&xs) / nf;
        let xty = (xs.tr_mul(&DVector::from_column_slice(&yc)) / nf)
            .as_slice()
            .to_vec();
        let yy = linalg::dot(&yc, &yc) / nf;
        Standardized {
            n,
            p,
            keep,
            means,
            sds,
            y_mean,
            gram,
            xty,
            yy,
        }
    }

    pub fn dropped(&self) -> Vec<usize> {
        (0..self.p).filter(|j| !self.keep.contains(j)).collect()
    }

    /// Penalty weights restricted to kept columns.
    fn kept_weights(&self, weights: Option<&[f64]>) -> Vec<f64> {
        match weights {
            Some(w) => self.keep.iter().map(|&j| w[j]).collect(),
            None => vec![1.0; self.keep.len()],
        }
    }

    /// Smallest lambda at which every coefficient is zero.
    pub fn lambda_max(&self, w: &[f64]) -> f64 {
        self.xty
            .iter()
            .zip(w)
            .filter(|(_, w)| w.is_finite() && **w > 0.0)
            .map(|(c, w)| c.abs() / w)
            .fold(0.0, f64::max)
    }

    /// Original-scale coefficients (length `p`) and intercept.
    pub fn unscale(&self, beta: &[f64]) -> (f64, Vec<f64>) {
        let mut out = vec![0.0; self.p];
        let mut intercept = self.y_mean;
        for (k, &j) in self.keep.iter().enumerate() {
            let b = beta[k] / self.sds[k];
            out[j] = b;
            intercept -= b * self.means[k];
        }
        (intercept, out)
    }
}

#[inline]
fn soft(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// Coordinate descent from the warm start in `beta`; `q` holds `G beta`.
fn descend(
    g: &DMatrix<f64>,
    c: &[f64],
    lambda: f64,
    w: &[f64],
    beta: &mut [f64],
    q: &mut [f64],
) {
    let p = c.len();
    let update = |j: usize, beta: &mut [f64], q: &mut [f64]| -> f64 {
        if !w[j].is_finite() {
            return 0.0;
        }
        let gjj = g[(j, j)];
        let z = c[j] - q[j] + gjj * beta[j];
        let new = soft(z, lambda * w[j]) / gjj;
        let delta = new - beta[j];
        if delta != 0.0 {
            for (qi, gi) in q.iter_mut().zip(g.column(j).iter()) {
                *qi += delta * gi;
            }
            beta[j] = new;
        }
        delta.abs()
    };
    for _ in 0..MAX_SWEEPS {
        let mut change = 0.0f64;
        for j in 0..p {
            change = change.max(update(j, beta, q));
        }
        if change < CD_TOL {
            return;
        }
        // iterate on the active set until it settles, then re-check everything
        let active: Vec<usize> = (0..p).filter(|&j| beta[j] != 0.0).collect();
        for _ in 0..MAX_SWEEPS {
            let mut inner = 0.0f64;
            for &j in &active {
                inner = inner.max(update(j, beta, q));
            }
            if inner < CD_TOL {
                break;
            }
        }
    }
}

/// Standardized-scale solutions along a decreasing lambda sequence.
fn path(std: &Standardized, lambdas: &[f64], w: &[f64]) -> Vec<Vec<f64>> {
    let p = std.keep.len();
    let mut beta = vec![0.0; p];
    let mut q = vec![0.0; p];
    lambdas
        .iter()
        .map(|&l| {
            descend(&std.gram, &std.xty, l, w, &mut beta, &mut q);
            beta.clone()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LassoFit {
    pub intercept: f64,
    /// Original-scale coefficients, zero for dropped columns.
    pub coefficients: Vec<f64>,
    /// Standardized-scale coefficients over kept columns.
    pub standardized: Vec<f64>,
    pub dropped: Vec<usize>,
    pub warnings: Vec<String>,
}

fn zero_variance_warnings(dropped: &[usize]) -> Vec<String> {
    dropped
        .iter()
        .map(|j| format!("column {j} has zero variance; dropped"))
        .collect()
}

pub fn fit_lasso(x: &DMatrix<f64>, y: &[f64], lambda: f64) -> Result<LassoFit, SelectionError> {
    fit_weighted_lasso(x, y, lambda, None)
}

/// Lasso at one lambda with optional per-column penalty weights (infinite
/// weight keeps a coefficient at zero).
pub fn fit_weighted_lasso(
    x: &DMatrix<f64>,
    y: &[f64],
    lambda: f64,
    weights: Option<&[f64]>,
) -> Result<LassoFit, SelectionError> {
    check_shape(x, y, 2)?;
    let std = Standardized::new(x, y);
    let w = std.kept_weights(weights);
    let mut beta = vec![0.0; std.keep.len()];
    let mut q = vec![0.0; std.keep.len()];
    descend(&std.gram, &std.xty, lambda, &w, &mut beta, &mut q);
    let (intercept, coefficients) = std.unscale(&beta);
    let dropped = std.dropped();
    Ok(LassoFit {
        intercept,
        coefficients,
        standardized: beta,
        warnings: zero_variance_warnings(&dropped),
        dropped,
    })
}

fn check_shape(x: &DMatrix<f64>, y: &[f64], min_n: usize) -> Result<(), SelectionError> {
    if x.nrows() != y.len() {
        return Err(SelectionError::Dimension(format!(
            "{} rows vs {} targets",
            x.nrows(),
            y.len()
        )));
    }
    if y.len() < min_n {
        return Err(SelectionError::TooFewObservations {
            needed: min_n,
            have: y.len(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvCurve {
    /// Descending.
    pub lambdas: Vec<f64>,
    pub mean_error: Vec<f64>,
    pub se: Vec<f64>,
    pub lambda_min: f64,
    pub lambda_1se: f64,
    pub index_min: usize,
    pub index_1se: usize,
}

impl CvCurve {
    pub fn index(&self, rule: LambdaRule) -> usize {
        match rule {
            LambdaRule::Min => self.index_min,
            LambdaRule::OneSe => self.index_1se,
        }
    }
}

fn lambda_grid(lmax: f64) -> Vec<f64> {
    let lmax = if lmax > 0.0 { lmax } else { 1e-12 };
    let (hi, lo) = (lmax.ln(), (lmax * LAMBDA_RATIO).ln());
    (0..LAMBDA_GRID)
        .map(|i| (hi + (lo - hi) * i as f64 / (LAMBDA_GRID - 1) as f64).exp())
        .collect()
}

/// k-fold CV curve of the (weighted) lasso on a 100-point log grid from
/// `lambda_max` down to `1e-4 lambda_max`.
pub fn cv_lambda(
    x: &DMatrix<f64>,
    y: &[f64],
    k: usize,
    seed: u64,
) -> Result<CvCurve, SelectionError> {
    cv_curve(x, y, None, k, seed)
}

fn cv_curve(
    x: &DMatrix<f64>,
    y: &[f64],
    weights: Option<&[f64]>,
    k: usize,
    seed: u64,
) -> Result<CvCurve, SelectionError> {
    check_shape(x, y, 2 * k)?;
    let n = y.len();
    let full = Standardized::new(x, y);
    let lambdas = lambda_grid(full.lambda_max(&full.kept_weights(weights)));
    let folds = rng::assign_folds(n, k, &mut rng::child(seed, rng::stream::CV_LAMBDA));

    let fold_errors: Vec<Vec<f64>> = crate::par::map_indexed(k, |f| {
        let train: Vec<usize> = (0..n).filter(|&i| folds[i] != f).collect();
        let test: Vec<usize> = (0..n).filter(|&i| folds[i] == f).collect();
        let xt = x.select_rows(&train);
        let yt: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        let std = Standardized::new(&xt, &yt);
        let w = std.kept_weights(weights);
        path(&std, &lambdas, &w)
            .iter()
            .map(|beta| {
                let (b0, b) = std.unscale(beta);
                test.iter()
                    .map(|&i| {
                        let pred = b0 + (0..x.ncols()).map(|j| b[j] * x[(i, j)]).sum::<f64>();
                        (y[i] - pred).powi(2)
                    })
                    .sum::<f64>()
                    / test.len() as f64
            })
            .collect()
    });

    let kf = k as f64;
    let mut mean_error = Vec::with_capacity(LAMBDA_GRID);
    let mut se = Vec::with_capacity(LAMBDA_GRID);
    for l in 0..lambdas.len() {
        let errs: Vec<f64> = fold_errors.iter().map(|e| e[l]).collect();
        let m = errs.iter().sum::<f64>() / kf;
        let var = errs.iter().map(|e| (e - m).powi(2)).sum::<f64>() / (kf - 1.0).max(1.0);
        mean_error.push(m);
        se.push((var / kf).sqrt());
    }
    let mut index_min = 0;
    for (i, e) in mean_error.iter().enumerate() {
        if *e < mean_error[index_min] {
            index_min = i;
        }
    }
    let bound = mean_error[index_min] + se[index_min];
    let index_1se = (0..=index_min)
        .find(|&i| mean_error[i] <= bound)
        .unwrap_or(index_min);
    Ok(CvCurve {
        lambda_min: lambdas[index_min],
        lambda_1se: lambdas[index_1se],
        lambdas,
        mean_error,
        se,
        index_min,
        index_1se,
    })
}

/// Cross-validated (weighted) lasso returning the retained columns.
pub fn lasso_select(
    x: &DMatrix<f64>,
    y: &[f64],
    weights: Option<&[f64]>,
    rule: LambdaRule,
    k: usize,
    seed: u64,
) -> Result<SelectionResult, SelectionError> {
    let curve = cv_curve(x, y, weights, k, seed)?;
    let std = Standardized::new(x, y);
    let w = std.kept_weights(weights);
    let betas = path(&std, &curve.lambdas, &w);
    let idx = curve.index(rule);
    let (intercept, coefs) = std.unscale(&betas[idx]);
    let retained: Vec<usize> = (0..coefs.len()).filter(|&j| coefs[j] != 0.0).collect();
    let path_trace = curve
        .lambdas
        .iter()
        .enumerate()
        .map(|(i, &lambda)| PathPoint {
            lambda,
            cv_error: curve.mean_error[i],
            cv_se: curve.se[i],
            nonzero: betas[i].iter().filter(|b| **b != 0.0).count(),
        })
        .collect();
    Ok(SelectionResult {
        method: if weights.is_some() { "adaptive-lasso" } else { "lasso" }.to_string(),
        coefficients: retained.iter().map(|&j| coefs[j]).collect(),
        retained,
        intercept,
        tuning: Tuning::Lambda {
            rule,
            value: curve.lambdas[idx],
            lambda_min: curve.lambda_min,
            lambda_1se: curve.lambda_1se,
        },
        path: path_trace,
        diagnostics: Vec::new(),
        warnings: zero_variance_warnings(&std.dropped()),
        no_valid_reduction: false,
    })
}

/// Ridge coefficients on the standardized problem with the ridge penalty
/// chosen by GCV over a log grid. Returns standardized-scale coefficients.
pub fn ridge_gcv(std: &Standardized) -> Vec<f64> {
    let p = std.keep.len();
    if p == 0 {
        return Vec::new();
    }
    let eig = SymmetricEigen::new(std.gram.clone());
    let e: Vec<f64> = eig.eigenvalues.iter().map(|v| v.max(0.0)).collect();
    let ct = eig.eigenvectors.tr_mul(&DVector::from_column_slice(&std.xty));
    let n = std.n as f64;
    let gcv = |kappa: f64| {
        let mut rss = std.yy;
        let mut edf = 0.0;
        for (ei, ci) in e.iter().zip(ct.iter()) {
            let d = ei + kappa;
            rss -= ci * ci * (2.0 / d - ei / (d * d));
            edf += ei / d;
        }
        let denom = 1.0 - edf / n;
        if denom <= 0.0 {
            f64::INFINITY
        } else {
            rss.max(0.0) / (denom * denom)
        }
    };
    let (lo, hi) = ((1e-6f64).ln(), (1e4f64).ln());
    let mut best = (f64::INFINITY, 1.0);
    for i in 0..100 {
        let kappa = (lo + (hi - lo) * i as f64 / 99.0).exp();
        let s = gcv(kappa);
        if s < best.0 {
            best = (s, kappa);
        }
    }
    let kappa = best.1;
    let scaled = DVector::from_iterator(p, e.iter().zip(ct.iter()).map(|(ei, ci)| ci / (ei + kappa)));
    (&eig.eigenvectors * scaled).as_slice().to_vec()
}

/// Adaptive lasso: weights `|b0|^-nu` from a GCV-tuned ridge fit, then a
/// cross-validated weighted lasso.
pub fn fit_adaptive_lasso(
    x: &DMatrix<f64>,
    y: &[f64],
    nu: f64,
    rule: LambdaRule,
    k: usize,
    seed: u64,
) -> Result<SelectionResult, SelectionError> {
    check_shape(x, y, 2 * k)?;
    let std = Standardized::new(x, y);
    let init = ridge_gcv(&std);
    let mut weights = vec![f64::INFINITY; x.ncols()];
    for (kk, &j) in std.keep.iter().enumerate() {
        let b = init[kk].abs();
        weights[j] = if b > 0.0 { b.powf(-nu) } else { f64::INFINITY };
    }
    lasso_select(x, y, Some(&weights), rule, k, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_lambda_is_ols() {
        let x = DMatrix::from_fn(30, 3, |i, j| ((i * (j + 3) * 7 + j) % 11) as f64 + 0.1 * i as f64);
        let y: Vec<f64> = (0..30).map(|i| 1.0 + x[(i, 0)] - 2.0 * x[(i, 2)] + ((i % 5) as f64 - 2.0) * 0.1).collect();
        let fit = fit_lasso(&x, &y, 0.0).unwrap();
        let mut xd = DMatrix::from_element(30, 4, 1.0);
        xd.columns_mut(1, 3).copy_from(&x);
        let ols = linalg::least_squares(&xd, &y).coefficients;
        assert!((fit.intercept - ols[0]).abs() < 1e-6);
        for j in 0..3 {
            assert!((fit.coefficients[j] - ols[j + 1]).abs() < 1e-6);
        }
    }

    #[test]
    fn null_threshold() {
        let x = DMatrix::from_fn(20, 2, |i, j| ((i + 1) * (j + 2) % 7) as f64);
        let y: Vec<f64> = (0..20).map(|i| x[(i, 0)] + (i % 3) as f64).collect();
        let std = Standardized::new(&x, &y);
        let lmax = std.lambda_max(&[1.0, 1.0]);
        let fit = fit_lasso(&x, &y, lmax * (1.0 + 1e-9)).unwrap();
        assert!(fit.coefficients.iter().all(|b| *b == 0.0));
        let fit = fit_lasso(&x, &y, lmax * 0.9).unwrap();
        assert!(fit.coefficients.iter().any(|b| *b != 0.0));
    }

    #[test]
    fn zero_variance_column_is_dropped() {
        let x = DMatrix::from_fn(10, 2, |i, j| if j == 0 { i as f64 } else { 3.0 });
        let y: Vec<f64> = (0..10).map(|i| i as f64 * 2.0).collect();
        let fit = fit_lasso(&x, &y, 0.0).unwrap();
        assert_eq!(fit.dropped, vec![1]);
        assert_eq!(fit.warnings.len(), 1);
        assert!((fit.coefficients[0] - 2.0).abs() < 1e-9);
    }
}
