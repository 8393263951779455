//! Cross-section misspecification tests used to validate terminal models.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, FisherSnedecor};

use crate::linalg::{self, Projector};

/// A battery passes when every p-value exceeds this level.
pub const BATTERY_LEVEL: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub name: String,
    pub statistic: f64,
    pub p_value: f64,
}

impl Diagnostic {
    fn new(name: &str, statistic: f64, p_value: f64) -> Self {
        Diagnostic {
            name: name.to_string(),
            statistic,
            p_value: if p_value.is_nan() { 1.0 } else { p_value.clamp(0.0, 1.0) },
        }
    }

    fn skipped(name: &str) -> Self {
        Diagnostic::new(name, 0.0, 1.0)
    }

    pub fn passes(&self) -> bool {
        self.p_value > BATTERY_LEVEL
    }
}

fn chi2_sf(stat: f64, df: f64) -> f64 {
    match ChiSquared::new(df) {
        Ok(d) => d.sf(stat.max(0.0)),
        Err(_) => 1.0,
    }
}

fn f_sf(stat: f64, d1: f64, d2: f64) -> f64 {
    match FisherSnedecor::new(d1, d2) {
        Ok(d) => d.sf(stat.max(0.0)),
        Err(_) => 1.0,
    }
}

/// Regression of `y` on an intercept plus the columns of `x`; returns (RSS, rank
/// of the non-constant part).
fn aux_rss(x: &DMatrix<f64>, y: &[f64]) -> (f64, usize) {
    let n = y.len();
    let mut design = DMatrix::from_element(n, x.ncols() + 1, 1.0);
    design.columns_mut(1, x.ncols()).copy_from(x);
    let proj = Projector::new(&design);
    let fit = proj.project(y);
    let rss = y.iter().zip(&fit).map(|(a, b)| (a - b) * (a - b)).sum();
    (rss, proj.rank().saturating_sub(1))
}

/// White's test: `n R^2` of squared residuals on levels, squares and (when the
/// auxiliary regression stays small relative to n) cross-products.
pub fn white_test(residuals: &[f64], x: &DMatrix<f64>) -> Diagnostic {
    let n = residuals.len();
    let k = x.ncols();
    if k == 0 {
        return Diagnostic::skipped("white");
    }
    let with_cross = 2 * k + k * (k - 1) / 2 < n / 10;
    let mut cols: Vec<Vec<f64>> = Vec::new();
    for j in 0..k {
        cols.push(x.column(j).iter().copied().collect());
    }
    for j in 0..k {
        cols.push(x.column(j).iter().map(|v| v * v).collect());
    }
    if with_cross {
        for a in 0..k {
            for b in a + 1..k {
                cols.push(x.column(a).iter().zip(x.column(b).iter()).map(|(u, v)| u * v).collect());
            }
        }
    }
    let aux = DMatrix::from_fn(n, cols.len(), |i, j| cols[j][i]);
    let e2: Vec<f64> = residuals.iter().map(|e| e * e).collect();
    let m = linalg::mean(&e2);
    let tss: f64 = e2.iter().map(|v| (v - m) * (v - m)).sum();
    if tss <= 0.0 {
        return Diagnostic::skipped("white");
    }
    let (rss, df) = aux_rss(&aux, &e2);
    if df == 0 {
        return Diagnostic::skipped("white");
    }
    let stat = n as f64 * (1.0 - rss / tss);
    Diagnostic::new("white", stat, chi2_sf(stat, df as f64))
}

/// Omnibus normality test from transformed skewness and kurtosis, chi-square
/// with two degrees of freedom.
pub fn doornik_hansen(residuals: &[f64]) -> Diagnostic {
    let n = residuals.len();
    if n < 8 {
        return Diagnostic::skipped("normality");
    }
    let nf = n as f64;
    let m = linalg::mean(residuals);
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for e in residuals {
        let d = e - m;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= nf;
    m3 /= nf;
    m4 /= nf;
    if m2 <= 0.0 {
        return Diagnostic::skipped("normality");
    }
    let sk = m3 / m2.powf(1.5);
    let b1 = sk * sk;
    let b2 = m4 / (m2 * m2);

    // skewness transform
    let beta = 3.0 * (nf * nf + 27.0 * nf - 70.0) * (nf + 1.0) * (nf + 3.0)
        / ((nf - 2.0) * (nf + 5.0) * (nf + 7.0) * (nf + 9.0));
    let w2 = -1.0 + (2.0 * (beta - 1.0)).sqrt();
    let delta = 1.0 / (w2.sqrt().ln()).sqrt();
    let y = sk * ((w2 - 1.0) * (nf + 1.0) * (nf + 3.0) / (12.0 * (nf - 2.0))).sqrt();
    let z1 = delta * (y + (y * y + 1.0).sqrt()).ln();

    // kurtosis transform
    let dk = (nf - 3.0) * (nf + 1.0) * (nf * nf + 15.0 * nf - 4.0);
    let a = (nf - 2.0) * (nf + 5.0) * (nf + 7.0) * (nf * nf + 27.0 * nf - 70.0) / (6.0 * dk);
    let c = (nf - 7.0) * (nf + 5.0) * (nf + 7.0) * (nf * nf + 2.0 * nf - 5.0) / (6.0 * dk);
    let k = (nf + 5.0) * (nf + 7.0) * (nf * nf * nf + 37.0 * nf * nf + 11.0 * nf - 313.0) / (12.0 * dk);
    let alpha = a + b1 * c;
    let chi = (b2 - 1.0 - b1) * 2.0 * k;
    let z2 = ((chi / (2.0 * alpha)).cbrt() - 1.0 + 1.0 / (9.0 * alpha)) * (9.0 * alpha).sqrt();

    let stat = z1 * z1 + z2 * z2;
    Diagnostic::new("normality", stat, chi2_sf(stat, 2.0))
}

/// RESET: F test that squares and cubes of the (standardized) fitted values
/// add nothing to the regression.
pub fn reset_test(residuals: &[f64], fitted: &[f64], x: &DMatrix<f64>) -> Diagnostic {
    let n = residuals.len();
    let k = x.ncols();
    let sd = linalg::variance(fitted).sqrt();
    if k == 0 || !(sd > 0.0) || n <= k + 4 {
        return Diagnostic::skipped("reset");
    }
    let m = linalg::mean(fitted);
    let z: Vec<f64> = fitted.iter().map(|f| (f - m) / sd).collect();
    let mut aux = DMatrix::zeros(n, k + 2);
    aux.columns_mut(0, k).copy_from(x);
    for i in 0..n {
        aux[(i, k)] = z[i] * z[i];
        aux[(i, k + 1)] = z[i] * z[i] * z[i];
    }
    // restricted fit re-estimated so residuals need not be exact OLS residuals
    let (rss_r, _) = aux_rss(x, residuals);
    let (rss_u, rank) = aux_rss(&aux, residuals);
    let df2 = n as f64 - rank as f64 - 1.0;
    if rss_u <= 0.0 || df2 <= 0.0 {
        return Diagnostic::skipped("reset");
    }
    let stat = ((rss_r - rss_u) / 2.0) / (rss_u / df2);
    Diagnostic::new("reset", stat, f_sf(stat, 2.0, df2))
}

/// White, normality and RESET tests for a fitted linear model.
pub fn diagnostic_battery(residuals: &[f64], fitted: &[f64], x: &DMatrix<f64>) -> Vec<Diagnostic> {
    vec![
        white_test(residuals, x),
        doornik_hansen(residuals),
        reset_test(residuals, fitted, x),
    ]
}
