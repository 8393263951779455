//! Least squares on the raw or polynomially augmented design.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::BaselineError;
use crate::data::{ColumnKind, Dataset};
use crate::design::{augmented_terms, term_matrix, Term};
use crate::linalg;

/// Levels, powers of continuous variables and (optionally) pairwise products.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentedDesign {
    pub terms: Vec<Term>,
    pub powers: u32,
    pub interactions: bool,
}

impl AugmentedDesign {
    pub fn matrix(&self, data: &Dataset) -> Result<DMatrix<f64>, BaselineError> {
        Ok(term_matrix(&self.terms, data)?)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

/// Column count is `q * powers + binaries + p(p-1)/2` (last term only with
/// interactions), with `p` active and `q` continuous variables.
pub fn augment(data: &Dataset, powers: u32, interactions: bool) -> AugmentedDesign {
    AugmentedDesign {
        terms: augmented_terms(data, powers.clamp(1, 3), interactions),
        powers: powers.clamp(1, 3),
        interactions,
    }
}

pub fn expected_columns(data: &Dataset, powers: u32, interactions: bool) -> usize {
    let active = data.active_features();
    let q = active
        .iter()
        .filter(|&&c| data.kind(c) == ColumnKind::Continuous)
        .count();
    let p = active.len();
    q * powers as usize + (p - q) + if interactions { p * (p - 1) / 2 } else { 0 }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub terms: Vec<Term>,
    pub intercept: f64,
    /// Aligned with `terms`; pinned terms carry 0.
    pub coefficients: Vec<f64>,
    pub pinned: Vec<Term>,
    pub rss: f64,
    pub rank: usize,
    #[serde(default)]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub pinned: Vec<usize>,
    pub rss: f64,
    pub rank: usize,
}

/// Least squares of `y` on an intercept and `x`. Columns dependent on earlier
/// ones are pinned to zero. With `ridge` set, designs with too few rows get a
/// tiny ridge instead of an error.
pub fn fit_ols_matrix(x: &DMatrix<f64>, y: &[f64], ridge: bool) -> Result<OlsFit, BaselineError> {
    let n = x.nrows();
    let k = x.ncols();
    if n != y.len() {
        return Err(BaselineError::Dimension(format!("{n} rows vs {} targets", y.len())));
    }
    let mut design = DMatrix::from_element(n, k + 1, 1.0);
    design.columns_mut(1, k).copy_from(x);
    if n <= k + 1 {
        if !ridge {
            return Err(BaselineError::TooFewRows { n, columns: k + 1 });
        }
        let g = linalg::gram(&design);
        let shift = 1e-8 * g.trace() / (k + 1) as f64;
        let a = &g + DMatrix::identity(k + 1, k + 1) * shift;
        let b = design.tr_mul(&DVector::from_column_slice(y));
        let beta = linalg::spd_solve(&a, &b).ok_or(BaselineError::Singular)?;
        let fitted = &design * &beta;
        let rss = y.iter().zip(fitted.iter()).map(|(a, b)| (a - b).powi(2)).sum();
        return Ok(OlsFit {
            intercept: beta[0],
            coefficients: beta.as_slice()[1..].to_vec(),
            pinned: Vec::new(),
            rss,
            rank: n.min(k + 1),
        });
    }
    let ls = linalg::least_squares(&design, y);
    Ok(OlsFit {
        intercept: ls.coefficients[0],
        coefficients: ls.coefficients[1..].to_vec(),
        pinned: ls.pinned.iter().filter(|&&j| j > 0).map(|j| j - 1).collect(),
        rss: ls.rss,
        rank: ls.rank,
    })
}

pub fn fit_ols(data: &Dataset, terms: &[Term], ridge: bool) -> Result<LinearModel, BaselineError> {
    let x = term_matrix(terms, data)?;
    let fit = fit_ols_matrix(&x, data.target(), ridge)?;
    let pinned: Vec<Term> = fit.pinned.iter().map(|&j| terms[j].clone()).collect();
    let warnings = pinned
        .iter()
        .map(|t| format!("`{t}` is collinear with earlier terms; coefficient fixed at 0"))
        .collect();
    Ok(LinearModel {
        terms: terms.to_vec(),
        intercept: fit.intercept,
        coefficients: fit.coefficients,
        pinned,
        rss: fit.rss,
        rank: fit.rank,
        warnings,
    })
}

impl LinearModel {
    pub fn predict(&self, data: &Dataset) -> Result<Vec<f64>, BaselineError> {
        let x = term_matrix(&self.terms, data)?;
        let f = x * DVector::from_column_slice(&self.coefficients);
        Ok(f.iter().map(|v| v + self.intercept).collect())
    }
}
