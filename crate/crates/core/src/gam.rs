//! Additive models fitted by backfitting, one penalized spline per smooth
//! variable, with the smoothing parameters chosen by GCV.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use crate::basis::{BasisError, SplineBasis, DEFAULT_DIM};
use crate::data::{distinct_count, ColumnKind, Dataset};
use crate::design::{term_matrix, Term};
use crate::linalg::{self, Projector};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GamError {
    #[error("model has neither smooth nor linear terms")]
    EmptyModel,
    #[error("column `{0}` is both smooth and linear")]
    Overlap(String),
    #[error("backfitting did not converge in {cycles} cycles")]
    NoConvergence { cycles: usize, trace: Vec<f64> },
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("no smooth term for `{0}`")]
    UnknownVariable(String),
    #[error(transparent)]
    Basis(#[from] BasisError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    #[default]
    Gaussian,
    /// Least squares on a 0/1 target.
    LinearProbability,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct GamConfig {
    /// Basis functions per smooth.
    pub dim: usize,
    pub max_cycles: usize,
    /// Convergence threshold relative to sd(y).
    pub tol: f64,
    /// Outer cycles during which smoothing parameters are re-selected.
    pub gcv_cycles: usize,
    pub grid_points: usize,
}

impl Default for GamConfig {
    fn default() -> Self {
        GamConfig {
            dim: DEFAULT_DIM,
            max_cycles: 200,
            tol: 1e-6,
            gcv_cycles: 5,
            grid_points: 30,
        }
    }
}

const RSS_FLOOR: f64 = 1e-10;

/// Result of a GCV search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsiChoice {
    pub psi: f64,
    pub gcv: f64,
    pub edf: f64,
    /// The grid minimum sat at either end of the grid.
    pub boundary: bool,
}

/// Penalized smoother in the eigenbasis of the penalty relative to `X'X`.
///
/// With `X'X = L L'` and `L^-1 P L^-T = U diag(lambda) U'`, the columns of
/// `X W` (`W = L^-T U`) are orthonormal, so for any response the fit at every
/// `psi` follows from the projections `b = W' X' r` in O(m).
#[derive(Debug, Clone)]
pub struct GcvSmoother {
    x: DMatrix<f64>,
    penalty: DMatrix<f64>,
    w: DMatrix<f64>,
    lambda: Vec<f64>,
    scale: f64,
}

impl GcvSmoother {
    pub fn new(design: DMatrix<f64>, penalty: DMatrix<f64>) -> Result<Self, BasisError> {
        let xtx = linalg::gram(&design);
        let condition = linalg::condition_number(&xtx);
        if !(condition <= crate::basis::MAX_CONDITION) {
            return Err(BasisError::SingularSystem { condition });
        }
        let chol = nalgebra::Cholesky::new(xtx.clone()).ok_or(BasisError::SingularSystem { condition })?;
        let l = chol.l();
        let lp = l.solve_lower_triangular(&penalty).expect("non-singular factor");
        let m = l
            .solve_lower_triangular(&lp.transpose())
            .expect("non-singular factor");
        let m = (&m + m.transpose()) * 0.5;
        let eig = nalgebra::SymmetricEigen::new(m);
        let w = l
            .transpose()
            .solve_upper_triangular(&eig.eigenvectors)
            .expect("non-singular factor");
        let lambda = eig.eigenvalues.iter().map(|v| v.max(0.0)).collect();
        let tp = penalty.trace();
        let scale = if tp > 0.0 { xtx.trace() / tp } else { 1.0 };
        Ok(GcvSmoother {
            x: design,
            penalty,
            w,
            lambda,
            scale,
        })
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn penalty(&self) -> &DMatrix<f64> {
        &self.penalty
    }

    pub fn ncols(&self) -> usize {
        self.x.ncols()
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// `W' X' r`.
    pub fn project(&self, r: &[f64]) -> Vec<f64> {
        let xtr = self.x.tr_mul(&DVector::from_column_slice(r));
        self.w.tr_mul(&xtr).as_slice().to_vec()
    }

    pub fn edf(&self, psi: f64) -> f64 {
        self.lambda.iter().map(|l| 1.0 / (1.0 + psi * l)).sum()
    }

    pub fn rss(&self, b: &[f64], rr: f64, psi: f64) -> f64 {
        let mut rss = rr;
        for (bi, l) in b.iter().zip(&self.lambda) {
            let s = psi * l / (1.0 + psi * l);
            rss += bi * bi * (s * s - 1.0);
        }
        // Below this the subtraction is rounding noise; flooring lets an exact
        // fit fall through to the smoothest psi that still attains it.
        rss.max(RSS_FLOOR * rr)
    }

    pub fn gcv(&self, b: &[f64], rr: f64, n: usize, psi: f64) -> f64 {
        let denom = n as f64 - self.edf(psi);
        if denom <= 0.0 {
            return f64::INFINITY;
        }
        n as f64 * self.rss(b, rr, psi) / (denom * denom)
    }

    pub fn coefficients(&self, b: &[f64], psi: f64) -> Vec<f64> {
        let s: Vec<f64> = b
            .iter()
            .zip(&self.lambda)
            .map(|(bi, l)| bi / (1.0 + psi * l))
            .collect();
        (&self.w * DVector::from_vec(s)).as_slice().to_vec()
    }

    pub fn fitted(&self, beta: &[f64]) -> Vec<f64> {
        (&self.x * DVector::from_column_slice(beta)).as_slice().to_vec()
    }

    /// Log-spaced psi grid spanning `[1e-6, 1e6] x scale`.
    pub fn grid(&self, points: usize) -> Vec<f64> {
        let (lo, hi) = ((1e-6 * self.scale).ln(), (1e6 * self.scale).ln());
        (0..points)
            .map(|i| (lo + (hi - lo) * i as f64 / (points - 1) as f64).exp())
            .collect()
    }

    /// Grid search followed by golden-section refinement in log psi.
    pub fn select(&self, b: &[f64], rr: f64, n: usize, points: usize) -> PsiChoice {
        let grid = self.grid(points);
        let scores: Vec<f64> = grid.iter().map(|&p| self.gcv(b, rr, n, p)).collect();
        let mut best = 0;
        for (i, s) in scores.iter().enumerate() {
            if *s < scores[best] {
                best = i;
            }
        }
        let boundary = best == 0 || best == points - 1;
        let f = |lp: f64| self.gcv(b, rr, n, lp.exp());
        let mut a = grid[best.saturating_sub(1)].ln();
        let mut c = grid[(best + 1).min(points - 1)].ln();
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        let mut x1 = c - phi * (c - a);
        let mut x2 = a + phi * (c - a);
        let mut f1 = f(x1);
        let mut f2 = f(x2);
        while c - a > 1e-5 {
            if f1 <= f2 {
                c = x2;
                x2 = x1;
                f2 = f1;
                x1 = c - phi * (c - a);
                f1 = f(x1);
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + phi * (c - a);
                f2 = f(x2);
            }
        }
        let (mut psi, mut score) = (grid[best], scores[best]);
        for lp in [x1, x2] {
            let s = f(lp);
            if s < score {
                psi = lp.exp();
                score = s;
            }
        }
        PsiChoice {
            psi,
            gcv: score,
            edf: self.edf(psi),
            boundary,
        }
    }
}

/// GCV choice of psi for one design block and partial residual.
pub fn select_psi_gcv(
    design: &DMatrix<f64>,
    penalty: &DMatrix<f64>,
    partial: &[f64],
) -> Result<PsiChoice, BasisError> {
    let sm = GcvSmoother::new(design.clone(), penalty.clone())?;
    let b = sm.project(partial);
    Ok(sm.select(&b, linalg::dot(partial, partial), partial.len(), GamConfig::default().grid_points))
}

/// A smooth variable prepared for fitting: basis plus cached smoother.
#[derive(Debug, Clone)]
pub struct SmoothBlock {
    pub variable: String,
    pub basis: SplineBasis,
    pub smoother: GcvSmoother,
}

impl SmoothBlock {
    pub fn new(variable: &str, x: &[f64], dim: usize) -> Result<Self, BasisError> {
        let basis = SplineBasis::fit(x, dim)?;
        let smoother = GcvSmoother::new(basis.reduced_design(x), basis.reduced_penalty())?;
        Ok(SmoothBlock {
            variable: variable.to_string(),
            basis,
            smoother,
        })
    }
}

/// Splits requested smooth columns into usable smooth blocks and columns that
/// must enter linearly instead. Constant columns are dropped.
pub fn prepare_smooths(
    data: &Dataset,
    smooth_vars: &[usize],
    dim: usize,
) -> (Vec<SmoothBlock>, Vec<usize>, Vec<String>) {
    let built = crate::par::map_slice(smooth_vars, |&c| {
        let name = data.name(c);
        let x = data.column(c);
        let distinct = distinct_count(x);
        if distinct < 2 || data.kind(c) == ColumnKind::Excluded {
            return Err((None, format!("`{name}` is constant or excluded; dropped")));
        }
        if data.kind(c) == ColumnKind::Binary || distinct < dim + 2 {
            return Err((
                Some(c),
                format!("`{name}` has {distinct} distinct values; treated as linear"),
            ));
        }
        SmoothBlock::new(name, x, dim).map_err(|e| (Some(c), format!("`{name}`: {e}; treated as linear")))
    });
    let mut blocks = Vec::new();
    let mut demoted = Vec::new();
    let mut warnings = Vec::new();
    for b in built {
        match b {
            Ok(b) => blocks.push(b),
            Err((c, w)) => {
                demoted.extend(c);
                warnings.push(w);
            }
        }
    }
    (blocks, demoted, warnings)
}

/// Raw output of the backfitting loop.
#[derive(Debug, Clone)]
pub struct Backfit {
    pub intercept: f64,
    /// Coefficients of the raw (uncentred) linear columns; dependent columns are 0.
    pub gamma: Vec<f64>,
    pub pinned: Vec<usize>,
    pub linear_rank: usize,
    pub betas: Vec<Vec<f64>>,
    pub psi: Vec<f64>,
    pub boundary: Vec<bool>,
    pub edf: Vec<f64>,
    pub components: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    pub cycles: usize,
    pub objective: Vec<f64>,
}

/// Backfitting of `y` on an intercept, a linear block and the smooth blocks.
/// The linear block is solved jointly by least squares at every cycle.
pub fn backfit(
    blocks: &[SmoothBlock],
    linear: &DMatrix<f64>,
    y: &[f64],
    config: &GamConfig,
) -> Result<Backfit, GamError> {
    let n = y.len();
    let k = linear.ncols();
    if blocks.is_empty() && k == 0 {
        return Err(GamError::EmptyModel);
    }
    let ybar = linalg::mean(y);
    let tol = config.tol * linalg::sample_sd(y).max(f64::MIN_POSITIVE);

    let means: Vec<f64> = (0..k).map(|j| linear.column(j).mean()).collect();
    let mut lc = linear.clone();
    for (j, m) in means.iter().enumerate() {
        lc.column_mut(j).add_scalar_mut(-m);
    }
    let proj = Projector::new(&lc);

    let s = blocks.len();
    let mut comps = vec![vec![0.0; n]; s];
    let mut total = vec![0.0; n];
    let mut lin_fit = vec![0.0; n];
    let mut gamma = vec![0.0; k];
    let mut betas: Vec<Vec<f64>> = blocks.iter().map(|b| vec![0.0; b.smoother.ncols()]).collect();
    let mut psi = vec![0.0; s];
    let mut boundary = vec![false; s];
    let mut objective = Vec::new();
    let mut r = vec![0.0; n];
    let mut converged = false;
    let mut cycles = 0;

    for cycle in 0..config.max_cycles {
        cycles = cycle + 1;
        let mut change = 0.0f64;
        if k > 0 {
            for i in 0..n {
                r[i] = y[i] - ybar - total[i];
            }
            gamma = proj.solve(&r);
            let new = (&lc * DVector::from_column_slice(&gamma)).as_slice().to_vec();
            for (o, v) in lin_fit.iter_mut().zip(&new) {
                change = change.max((*o - v).abs());
                *o = *v;
            }
        }
        for (j, block) in blocks.iter().enumerate() {
            for i in 0..n {
                r[i] = y[i] - ybar - lin_fit[i] - total[i] + comps[j][i];
            }
            let b = block.smoother.project(&r);
            if cycle < config.gcv_cycles {
                let choice = block
                    .smoother
                    .select(&b, linalg::dot(&r, &r), n, config.grid_points);
                psi[j] = choice.psi;
                boundary[j] = choice.boundary;
            }
            betas[j] = block.smoother.coefficients(&b, psi[j]);
            let new = block.smoother.fitted(&betas[j]);
            for i in 0..n {
                change = change.max((comps[j][i] - new[i]).abs());
                total[i] += new[i] - comps[j][i];
            }
            comps[j] = new;
        }
        if cycle + 1 == config.gcv_cycles.max(1) {
            // With psi frozen the backfitting fixed point solves one penalized
            // least-squares system; jumping there avoids the slow zig-zag
            // between near-collinear blocks.
            if let Some((g, bs)) = joint_solve(blocks, &lc, proj.pinned(), &psi, y, ybar) {
                gamma = g;
                let new = (&lc * DVector::from_column_slice(&gamma)).as_slice().to_vec();
                for (o, v) in lin_fit.iter_mut().zip(&new) {
                    change = change.max((*o - v).abs());
                    *o = *v;
                }
                for (j, block) in blocks.iter().enumerate() {
                    let new = block.smoother.fitted(&bs[j]);
                    for i in 0..n {
                        change = change.max((comps[j][i] - new[i]).abs());
                        total[i] += new[i] - comps[j][i];
                    }
                    comps[j] = new;
                    betas[j] = bs[j].clone();
                }
            }
        }
        let rss: f64 = (0..n)
            .map(|i| {
                let e = y[i] - ybar - lin_fit[i] - total[i];
                e * e
            })
            .sum();
        let pen: f64 = blocks
            .iter()
            .zip(&betas)
            .zip(&psi)
            .map(|((bl, be), p)| {
                let v = DVector::from_column_slice(be);
                p * (v.transpose() * bl.smoother.penalty() * &v)[0]
            })
            .sum();
        objective.push(rss + pen);
        if change < tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(GamError::NoConvergence {
            cycles,
            trace: objective,
        });
    }
    let residuals = (0..n).map(|i| y[i] - ybar - lin_fit[i] - total[i]).collect();
    let intercept = ybar - gamma.iter().zip(&means).map(|(g, m)| g * m).sum::<f64>();
    let edf = blocks
        .iter()
        .zip(&psi)
        .map(|(b, p)| b.smoother.edf(*p))
        .collect();
    Ok(Backfit {
        intercept,
        gamma,
        pinned: proj.pinned().to_vec(),
        linear_rank: proj.rank(),
        betas,
        psi,
        boundary,
        edf,
        components: comps,
        residuals,
        cycles,
        objective,
    })
}

/// Minimizes `|y - ybar - L g - sum B_j b_j|^2 + sum psi_j b_j' P_j b_j`
/// jointly; pinned linear columns stay at zero. `None` if the system is
/// numerically singular.
fn joint_solve(
    blocks: &[SmoothBlock],
    lc: &DMatrix<f64>,
    pinned: &[usize],
    psi: &[f64],
    y: &[f64],
    ybar: f64,
) -> Option<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = y.len();
    let free: Vec<usize> = (0..lc.ncols()).filter(|j| !pinned.contains(j)).collect();
    let widths: Vec<usize> = blocks.iter().map(|b| b.smoother.ncols()).collect();
    let total = free.len() + widths.iter().sum::<usize>();
    let mut m = DMatrix::zeros(n, total);
    for (a, &j) in free.iter().enumerate() {
        m.set_column(a, &lc.column(j));
    }
    let mut off = free.len();
    for (b, w) in blocks.iter().zip(&widths) {
        m.columns_mut(off, *w).copy_from(b.smoother.design());
        off += w;
    }
    let mut a = linalg::gram(&m);
    let mut off = free.len();
    for ((b, w), p) in blocks.iter().zip(&widths).zip(psi) {
        let mut view = a.view_mut((off, off), (*w, *w));
        view += b.smoother.penalty() * *p;
        off += w;
    }
    let yc = DVector::from_iterator(n, y.iter().map(|v| v - ybar));
    let rhs = m.tr_mul(&yc);
    let sol = linalg::spd_solve(&a, &rhs)?;
    if sol.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let mut gamma = vec![0.0; lc.ncols()];
    for (a, &j) in free.iter().enumerate() {
        gamma[j] = sol[a];
    }
    let mut betas = Vec::with_capacity(blocks.len());
    let mut off = free.len();
    for w in &widths {
        betas.push(sol.as_slice()[off..off + w].to_vec());
        off += w;
    }
    Some((gamma, betas))
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct LinearTerm {
    pub term: Term,
    pub coefficient: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SmoothTerm {
    pub variable: String,
    pub basis: SplineBasis,
    /// Full-length coefficients (sum to zero).
    pub coefficients: Vec<f64>,
    pub psi: f64,
    pub edf: f64,
    #[serde(default)]
    pub psi_at_boundary: bool,
    /// Bayesian posterior covariance of the coefficients, `dim x dim` rows.
    pub covariance: Vec<Vec<f64>>,
}

impl SmoothTerm {
    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        self.basis.eval_many(&self.coefficients, x)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.basis.derivative(&self.coefficients, x, 1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmoothStat {
    pub variable: String,
    pub edf: f64,
    pub ref_df: f64,
    pub f: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdditiveModel {
    pub family: Family,
    pub intercept: f64,
    pub linear_terms: Vec<LinearTerm>,
    pub smooths: Vec<SmoothTerm>,
    /// Residual degrees of freedom `n - total edf`.
    pub residual_df: f64,
    pub sigma2: f64,
    #[serde(default)]
    pub warnings: Vec<String>,
    #[serde(default)]
    pub cycles: usize,
    #[serde(skip)]
    pub residuals: Vec<f64>,
    #[serde(skip)]
    pub objective_trace: Vec<f64>,
}

/// Fits `y = a + sum gamma_k z_k + sum g_j(x_j)`.
pub fn fit_gam(
    data: &Dataset,
    smooth_vars: &[usize],
    linear_vars: &[usize],
    family: Family,
    config: &GamConfig,
) -> Result<AdditiveModel, GamError> {
    let terms: Vec<Term> = linear_vars.iter().map(|&c| Term::var(data.name(c))).collect();
    fit_gam_terms(data, smooth_vars, &terms, family, config)
}

/// As [`fit_gam`] with arbitrary linear terms (powers, interactions).
pub fn fit_gam_terms(
    data: &Dataset,
    smooth_vars: &[usize],
    linear_terms: &[Term],
    family: Family,
    config: &GamConfig,
) -> Result<AdditiveModel, GamError> {
    for &c in smooth_vars {
        let name = data.name(c);
        if linear_terms.iter().any(|t| t.as_var() == Some(name)) {
            return Err(GamError::Overlap(name.to_string()));
        }
    }
    let (blocks, demoted, warnings) = prepare_smooths(data, smooth_vars, config.dim);
    let mut terms = linear_terms.to_vec();
    terms.extend(demoted.iter().map(|&c| Term::var(data.name(c))));
    fit_with_blocks(data, &blocks, &terms, family, config, warnings)
}

/// Fits using pre-built smooth blocks (shared across several responses).
pub fn fit_with_blocks(
    data: &Dataset,
    blocks: &[SmoothBlock],
    terms: &[Term],
    family: Family,
    config: &GamConfig,
    mut warnings: Vec<String>,
) -> Result<AdditiveModel, GamError> {
    let linear = term_matrix(terms, data).map_err(|e| GamError::SchemaMismatch(e.to_string()))?;
    let y = data.target();
    let fit = backfit(blocks, &linear, y, config)?;
    for &p in &fit.pinned {
        warnings.push(format!("`{}` is collinear with earlier terms; coefficient fixed at 0", terms[p]));
    }
    Ok(assemble(blocks, terms, family, fit, warnings))
}

pub(crate) fn assemble(
    blocks: &[SmoothBlock],
    terms: &[Term],
    family: Family,
    fit: Backfit,
    warnings: Vec<String>,
) -> AdditiveModel {
    let n = fit.residuals.len();
    let rss = linalg::dot(&fit.residuals, &fit.residuals);
    let total_edf = 1.0 + fit.linear_rank as f64 + fit.edf.iter().sum::<f64>();
    let residual_df = (n as f64 - total_edf).max(1.0);
    let sigma2 = rss / residual_df;
    let smooths = blocks
        .iter()
        .enumerate()
        .map(|(j, b)| {
            let sm = &b.smoother;
            let psi = fit.psi[j];
            // sigma^2 (X'X + psi P)^-1 = sigma^2 W diag(1/(1 + psi lambda)) W'
            let m = sm.ncols();
            let mut d = DMatrix::zeros(m, m);
            for i in 0..m {
                d[(i, i)] = 1.0 / (1.0 + psi * sm.lambda[i]);
            }
            let vr = &sm.w * d * sm.w.transpose() * sigma2;
            let c = b.basis.constraint();
            let v = &c * vr * c.transpose();
            SmoothTerm {
                variable: b.variable.clone(),
                basis: b.basis.clone(),
                coefficients: b.basis.expand(&fit.betas[j]),
                psi,
                edf: fit.edf[j],
                psi_at_boundary: fit.boundary[j],
                covariance: (0..v.nrows())
                    .map(|i| v.row(i).iter().copied().collect())
                    .collect(),
            }
        })
        .collect();
    AdditiveModel {
        family,
        intercept: fit.intercept,
        linear_terms: terms
            .iter()
            .zip(&fit.gamma)
            .map(|(t, g)| LinearTerm {
                term: t.clone(),
                coefficient: *g,
            })
            .collect(),
        smooths,
        residual_df,
        sigma2,
        warnings,
        cycles: fit.cycles,
        residuals: fit.residuals,
        objective_trace: fit.objective,
    }
}

impl AdditiveModel {
    /// Input columns the model reads.
    pub fn columns(&self) -> Vec<String> {
        let mut cols: Vec<String> = self.smooths.iter().map(|s| s.variable.clone()).collect();
        for lt in &self.linear_terms {
            for f in &lt.term.factors {
                cols.push(f.column.clone());
            }
        }
        cols.sort();
        cols.dedup();
        cols
    }

    pub fn predict(&self, data: &Dataset) -> Result<Vec<f64>, GamError> {
        let mut out = vec![self.intercept; data.n_rows()];
        for lt in &self.linear_terms {
            if lt.coefficient == 0.0 {
                continue;
            }
            let v = lt
                .term
                .evaluate(data)
                .map_err(|e| GamError::SchemaMismatch(e.to_string()))?;
            for (o, x) in out.iter_mut().zip(v) {
                *o += lt.coefficient * x;
            }
        }
        for s in &self.smooths {
            let idx = data
                .index_of(&s.variable)
                .ok_or_else(|| GamError::SchemaMismatch(format!("missing column `{}`", s.variable)))?;
            for (o, g) in out.iter_mut().zip(s.eval(data.column(idx))) {
                *o += g;
            }
        }
        Ok(out)
    }

    pub fn smooth(&self, variable: &str) -> Option<&SmoothTerm> {
        self.smooths.iter().find(|s| s.variable == variable)
    }

    pub fn smooth_curve(&self, variable: &str, grid: &[f64]) -> Result<Vec<f64>, GamError> {
        let s = self
            .smooth(variable)
            .ok_or_else(|| GamError::UnknownVariable(variable.to_string()))?;
        Ok(s.eval(grid))
    }

    pub fn coefficient(&self, term: &Term) -> Option<f64> {
        self.linear_terms
            .iter()
            .find(|lt| &lt.term == term)
            .map(|lt| lt.coefficient)
    }

    /// Wald-type F statistic per smooth with the edf as numerator degrees of
    /// freedom. Approximate: the coefficients are penalized.
    pub fn smooth_summary(&self) -> Vec<SmoothStat> {
        self.smooths
            .iter()
            .map(|s| {
                let dim = s.basis.dim();
                let (f, p_value) = wald_f(s, self.residual_df);
                SmoothStat {
                    variable: s.variable.clone(),
                    edf: s.edf,
                    ref_df: (dim - 1) as f64,
                    f,
                    p_value,
                }
            })
            .collect()
    }
}

fn wald_f(s: &SmoothTerm, residual_df: f64) -> (f64, f64) {
    if s.coefficients.iter().all(|&c| c == 0.0) || s.edf < 1e-8 {
        return (0.0, 1.0);
    }
    let c = s.basis.constraint();
    let dim = s.basis.dim();
    let v = DMatrix::from_fn(dim, dim, |i, j| s.covariance[i][j]);
    let vr = c.transpose() * v * &c;
    let beta = c.tr_mul(&DVector::from_column_slice(&s.coefficients));
    let q = match nalgebra::Cholesky::new(vr) {
        Some(ch) => beta.dot(&ch.solve(&beta)),
        None => f64::INFINITY,
    };
    let f = (q / s.edf).max(0.0);
    let p = if f.is_infinite() {
        0.0
    } else {
        match FisherSnedecor::new(s.edf, residual_df.max(1.0)) {
            Ok(dist) => dist.sf(f).clamp(0.0, 1.0),
            Err(_) => 1.0,
        }
    };
    (f, p)
}
