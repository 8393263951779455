//! General-to-specific model reduction.
//!
//! Starting from the unrestricted model (all candidates plus an intercept), a
//! depth-first multi-path search removes one insignificant regressor at a
//! time, branching on up to `max_branches` of them per node (largest p-value
//! first). Nodes are memoized by their regressor set and the search stops
//! after `max_nodes` evaluations. Models whose regressors are all significant
//! are terminal. Terminals are ranked by Schwarz criterion, then size, then
//! column order, and the first one that encompasses the unrestricted model
//! (F test at the target size) and passes the diagnostic battery is returned.
//!
//! Diagnostics that the unrestricted model itself fails are not enforced on
//! reductions: such failures reflect the data rather than the reduction.

use std::collections::HashSet;

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ContinuousCDF, FisherSnedecor, StudentsT};

use super::diagnostics::{diagnostic_battery, Diagnostic};
use super::{SelectionError, SelectionResult, Tuning};
use crate::linalg::{self, Projector};

#[derive(Debug, Clone, PartialEq)]
pub struct GetsConfig {
    pub max_nodes: usize,
    pub max_branches: usize,
    /// Run the diagnostic battery on candidate terminals.
    pub diagnostics: bool,
}

impl Default for GetsConfig {
    fn default() -> Self {
        GetsConfig {
            max_nodes: 10_000,
            max_branches: 8,
            diagnostics: true,
        }
    }
}

struct Search<'a> {
    gram: &'a DMatrix<f64>,
    xty: &'a [f64],
    yy: f64,
    n: usize,
    alpha: f64,
    config: &'a GetsConfig,
    visited: HashSet<Vec<u64>>,
    nodes: usize,
    terminals: Vec<(Vec<usize>, f64)>,
}

fn key(set: &[usize], k: usize) -> Vec<u64> {
    let mut bits = vec![0u64; k.div_ceil(64).max(1)];
    for &j in set {
        bits[j / 64] |= 1 << (j % 64);
    }
    bits
}

/// Inverse of `M` with row and column `r` removed, from the inverse of `M`.
fn downdate(inv: &DMatrix<f64>, r: usize) -> DMatrix<f64> {
    let s = inv.nrows();
    let prr = inv[(r, r)];
    let idx: Vec<usize> = (0..s).filter(|&i| i != r).collect();
    DMatrix::from_fn(s - 1, s - 1, |a, b| {
        let (i, j) = (idx[a], idx[b]);
        inv[(i, j)] - inv[(i, r)] * inv[(r, j)] / prr
    })
}

fn sub_inverse(gram: &DMatrix<f64>, set: &[usize]) -> Option<DMatrix<f64>> {
    if set.is_empty() {
        return Some(DMatrix::zeros(0, 0));
    }
    let sub = DMatrix::from_fn(set.len(), set.len(), |a, b| gram[(set[a], set[b])]);
    linalg::spd_inverse(&sub)
}

struct NodeFit {
    rss: f64,
    /// Two-sided p-values aligned with the node's set.
    p_values: Vec<f64>,
}

impl Search<'_> {
    fn fit(&self, set: &[usize], inv: &DMatrix<f64>) -> NodeFit {
        let s = set.len();
        let c = DVector::from_iterator(s, set.iter().map(|&j| self.xty[j]));
        let beta = inv * &c;
        let rss = (self.yy - beta.dot(&c)).max(0.0);
        let df = self.n as f64 - s as f64 - 1.0;
        let sigma2 = rss / df;
        let t = StudentsT::new(0.0, 1.0, df).expect("positive df");
        let p_values = (0..s)
            .map(|a| {
                let se = (sigma2 * inv[(a, a)]).sqrt();
                if se > 0.0 {
                    2.0 * t.sf((beta[a] / se).abs())
                } else {
                    0.0
                }
            })
            .collect();
        NodeFit { rss, p_values }
    }

    fn visit(&mut self, set: Vec<usize>, inv: DMatrix<f64>) {
        if self.nodes >= self.config.max_nodes {
            return;
        }
        if !self.visited.insert(key(&set, self.gram.nrows())) {
            return;
        }
        self.nodes += 1;
        // accumulated downdates can lose definiteness; refactor if so
        let inv = if (0..inv.nrows()).all(|i| inv[(i, i)] > 0.0) {
            inv
        } else {
            match sub_inverse(self.gram, &set) {
                Some(i) => i,
                None => return,
            }
        };
        let fit = self.fit(&set, &inv);
        let mut weak: Vec<usize> = (0..set.len())
            .filter(|&a| fit.p_values[a] > self.alpha)
            .collect();
        if weak.is_empty() {
            self.terminals.push((set, fit.rss));
            return;
        }
        weak.sort_by(|&a, &b| fit.p_values[b].total_cmp(&fit.p_values[a]).then(a.cmp(&b)));
        weak.truncate(self.config.max_branches);
        for a in weak {
            let mut child = set.clone();
            child.remove(a);
            let child_inv = downdate(&inv, a);
            self.visit(child, child_inv);
        }
    }
}

fn schwarz(rss: f64, size: usize, n: usize) -> f64 {
    let nf = n as f64;
    (rss.max(f64::MIN_POSITIVE) / nf).ln() + (size as f64 + 1.0) * nf.ln() / nf
}

/// General-to-specific selection of the columns of `x` at target size `alpha`.
pub fn gets_select(
    x: &DMatrix<f64>,
    y: &[f64],
    alpha: f64,
    config: &GetsConfig,
) -> Result<SelectionResult, SelectionError> {
    let n = x.nrows();
    let k_all = x.ncols();
    if n != y.len() {
        return Err(SelectionError::Dimension(format!("{n} rows vs {} targets", y.len())));
    }
    if n <= k_all + 10 {
        return Err(SelectionError::InsufficientDf { n, k: k_all });
    }
    let means: Vec<f64> = (0..k_all).map(|j| x.column(j).mean()).collect();
    let mut xc = x.clone();
    for (j, m) in means.iter().enumerate() {
        xc.column_mut(j).add_scalar_mut(-m);
    }
    let y_mean = linalg::mean(y);
    let yc: Vec<f64> = y.iter().map(|v| v - y_mean).collect();

    let proj = Projector::new(&xc);
    let mut warnings: Vec<String> = proj
        .pinned()
        .iter()
        .map(|j| format!("column {j} is constant or collinear; excluded from the search"))
        .collect();
    let cand: Vec<usize> = (0..k_all).filter(|j| !proj.pinned().contains(j)).collect();
    let k = cand.len();
    let xk = xc.select_columns(&cand);
    let gram = linalg::gram(&xk);
    let xty: Vec<f64> = xk.tr_mul(&DVector::from_column_slice(&yc)).as_slice().to_vec();
    let yy = linalg::dot(&yc, &yc);

    let full: Vec<usize> = (0..k).collect();
    let gum_inv = sub_inverse(&gram, &full).ok_or(SelectionError::NoCandidates)?;
    let mut search = Search {
        gram: &gram,
        xty: &xty,
        yy,
        n,
        alpha,
        config,
        visited: HashSet::new(),
        nodes: 0,
        terminals: Vec::new(),
    };
    search.visit(full.clone(), gum_inv.clone());
    let gum_rss = search.fit(&full, &gum_inv).rss;
    let mut terminals = std::mem::take(&mut search.terminals);
    if search.nodes >= config.max_nodes {
        warnings.push(format!("search stopped at the {}-node cap", config.max_nodes));
    }

    terminals.sort_by(|a, b| {
        schwarz(a.1, a.0.len(), n)
            .total_cmp(&schwarz(b.1, b.0.len(), n))
            .then(a.0.len().cmp(&b.0.len()))
            .then(a.0.cmp(&b.0))
    });

    let model = |set: &[usize]| -> (Vec<f64>, Vec<f64>, DMatrix<f64>) {
        let inv = sub_inverse(&gram, set).unwrap_or_else(|| DMatrix::zeros(set.len(), set.len()));
        let c = DVector::from_iterator(set.len(), set.iter().map(|&j| xty[j]));
        let beta = (inv * c).as_slice().to_vec();
        let xs = xk.select_columns(set);
        let fitted = (&xs * DVector::from_column_slice(&beta)).as_slice().to_vec();
        let resid: Vec<f64> = yc.iter().zip(&fitted).map(|(a, b)| a - b).collect();
        (beta, resid, xs)
    };
    let battery = |set: &[usize]| -> Vec<Diagnostic> {
        let (_, resid, xs) = model(set);
        let fitted: Vec<f64> = yc.iter().zip(&resid).map(|(a, b)| a - b).collect();
        diagnostic_battery(&resid, &fitted, &xs)
    };

    let df_gum = n as f64 - k as f64 - 1.0;
    let encompasses = |set: &[usize], rss: f64| -> bool {
        let q = k - set.len();
        if q == 0 || gum_rss <= 0.0 {
            return true;
        }
        let f = ((rss - gum_rss) / q as f64) / (gum_rss / df_gum);
        let p = FisherSnedecor::new(q as f64, df_gum)
            .map(|d| d.sf(f.max(0.0)))
            .unwrap_or(1.0);
        p >= alpha
    };

    let mut gum_diag: Option<Vec<Diagnostic>> = None;
    let mut chosen: Option<(Vec<usize>, Vec<Diagnostic>)> = None;
    for (set, rss) in &terminals {
        if !encompasses(set, *rss) {
            continue;
        }
        if !config.diagnostics {
            chosen = Some((set.clone(), Vec::new()));
            break;
        }
        let enforced = gum_diag.get_or_insert_with(|| battery(&full)).clone();
        let diag = battery(set);
        let ok = diag
            .iter()
            .zip(&enforced)
            .all(|(d, g)| !g.passes() || d.passes());
        if ok {
            chosen = Some((set.clone(), diag));
            break;
        }
    }
    let no_valid_reduction = chosen.is_none();
    let (set, diagnostics) = match chosen {
        Some(c) => c,
        None => {
            warnings.push("no reduction passed the encompassing and diagnostic checks; returning the unrestricted model".into());
            let d = if config.diagnostics { battery(&full) } else { Vec::new() };
            (full.clone(), d)
        }
    };
    let (beta, _, _) = model(&set);
    let retained: Vec<usize> = set.iter().map(|&a| cand[a]).collect();
    let intercept = y_mean - retained.iter().zip(&beta).map(|(&j, b)| b * means[j]).sum::<f64>();
    Ok(SelectionResult {
        method: "gets".to_string(),
        retained,
        coefficients: beta,
        intercept,
        tuning: Tuning::Alpha { alpha },
        path: Vec::new(),
        diagnostics,
        warnings,
        no_valid_reduction,
    })
}
