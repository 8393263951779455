//! Partial linear models: additive smooths plus linearly entering pairwise
//! interactions chosen on double residuals.
//!
//! Step one fits an additive model of the target and of every interaction
//! column on the smooth variables and keeps the residuals. Step two runs a
//! selection engine of the target residuals on the interaction residuals (or,
//! for the naive variants, on the raw interactions). Step three refits the
//! additive model with the selected interactions as linear terms.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::data::{ColumnKind, Dataset};
use crate::design::{pairwise_terms, Term};
use crate::gam::{self, AdditiveModel, Family, GamConfig, GamError, SmoothBlock};
use crate::linalg::{self, Projector};
use crate::selection::{self, Engine, SelectionError, SelectionResult};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GamlaError {
    #[error("at least two eligible variables are needed to form interactions")]
    TooFewVariables,
    #[error("concurvity: {share:.0}% of interaction columns are additive in the smooth variables ({columns:?})", share = share * 100.0)]
    ConcurvityViolation { columns: Vec<String>, share: f64 },
    #[error("no smooth term for `{0}`")]
    UnknownVariable(String),
    #[error(transparent)]
    Gam(#[from] GamError),
    #[error(transparent)]
    Selection(#[from] SelectionError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Gamla,
    GamlaAlasso,
    Gama,
    GamlaStar,
    GamlaAlassoStar,
    GamaStar,
}

impl Variant {
    pub fn of(engine: Engine, naive: bool) -> Self {
        match (engine, naive) {
            (Engine::Lasso { .. }, false) => Variant::Gamla,
            (Engine::AdaptiveLasso { .. }, false) => Variant::GamlaAlasso,
            (Engine::Gets { .. }, false) => Variant::Gama,
            (Engine::Lasso { .. }, true) => Variant::GamlaStar,
            (Engine::AdaptiveLasso { .. }, true) => Variant::GamlaAlassoStar,
            (Engine::Gets { .. }, true) => Variant::GamaStar,
        }
    }

    pub fn is_naive(self) -> bool {
        matches!(self, Variant::GamlaStar | Variant::GamlaAlassoStar | Variant::GamaStar)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GamlaConfig {
    pub gam: GamConfig,
    /// CV folds for the lasso engines.
    pub cv_folds: usize,
    /// Relative eigenvalue below which the residualized candidates are
    /// considered degenerate.
    pub concurvity_tol: f64,
    /// Above this share of offending columns concurvity is an error.
    pub max_violation_share: f64,
}

impl Default for GamlaConfig {
    fn default() -> Self {
        GamlaConfig {
            gam: GamConfig::default(),
            cv_folds: 10,
            concurvity_tol: 1e-8,
            max_violation_share: 0.2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct InteractionCatalog {
    pub terms: Vec<Term>,
    /// Positions of columns that are linearly dependent on earlier ones.
    pub collinear: Vec<usize>,
    pub warnings: Vec<String>,
}

/// All pairwise products of the active features in column order; constant
/// products are dropped.
pub fn build_interactions(data: &Dataset) -> Result<(DMatrix<f64>, InteractionCatalog), GamlaError> {
    let active = data.active_features();
    if active.len() < 2 {
        return Err(GamlaError::TooFewVariables);
    }
    let mut terms = Vec::new();
    let mut cols = Vec::new();
    let mut warnings = Vec::new();
    for t in pairwise_terms(data, &active) {
        let v = t.evaluate(data).expect("columns come from the dataset");
        if linalg::variance(&v) <= 1e-24 * (1.0 + linalg::mean(&v).powi(2)) {
            warnings.push(format!("interaction `{t}` is constant; dropped"));
            continue;
        }
        terms.push(t);
        cols.push(v);
    }
    let n = data.n_rows();
    let z = DMatrix::from_fn(n, cols.len(), |i, j| cols[j][i]);
    let mut zc = z.clone();
    for j in 0..zc.ncols() {
        let m = zc.column(j).mean();
        zc.column_mut(j).add_scalar_mut(-m);
    }
    let collinear = Projector::new(&zc).pinned().to_vec();
    for &j in &collinear {
        warnings.push(format!("interaction `{}` is collinear with earlier interactions", terms[j]));
    }
    Ok((
        z,
        InteractionCatalog {
            terms,
            collinear,
            warnings,
        },
    ))
}

#[derive(Debug, Clone)]
pub struct DoubleResiduals {
    pub u_y: Vec<f64>,
    /// Residualized candidates, one column per entry of `columns`.
    pub v_z: DMatrix<f64>,
    /// Catalog positions of the columns of `v_z` (first-stage failures removed).
    pub columns: Vec<usize>,
    /// Smallest eigenvalue of `v_z' v_z / n`.
    pub gram_check: f64,
    pub warnings: Vec<String>,
}

/// First-stage residuals of `y` and of each column of `z` on the smooth blocks
/// (plus the base linear columns).
pub fn double_residuals(
    y: &[f64],
    z: &DMatrix<f64>,
    blocks: &[SmoothBlock],
    base: &DMatrix<f64>,
    config: &GamConfig,
) -> Result<DoubleResiduals, GamError> {
    let u_y = gam::backfit(blocks, base, y, config)?.residuals;
    let fits = crate::par::map_indexed(z.ncols(), |s| {
        let col: Vec<f64> = z.column(s).iter().copied().collect();
        gam::backfit(blocks, base, &col, config).map(|b| b.residuals)
    });
    let mut columns = Vec::new();
    let mut resid = Vec::new();
    let mut warnings = Vec::new();
    for (s, f) in fits.into_iter().enumerate() {
        match f {
            Ok(r) => {
                columns.push(s);
                resid.push(r);
            }
            Err(e) => warnings.push(format!("first-stage fit of candidate {s} failed ({e}); removed")),
        }
    }
    let n = y.len();
    let v_z = DMatrix::from_fn(n, resid.len(), |i, j| resid[j][i]);
    let gram_check = if v_z.ncols() == 0 {
        0.0
    } else {
        let g = linalg::gram(&v_z) / n as f64;
        SymmetricEigen::new(g).eigenvalues.min()
    };
    Ok(DoubleResiduals {
        u_y,
        v_z,
        columns,
        gram_check,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConcurvityReport {
    pub ok: bool,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    /// Positions (within `v_z`) of the offending columns.
    pub offending: Vec<usize>,
}

/// Each residualized column is divided by the standard deviation of its raw
/// column, so the check ignores units. Offending columns are those loading
/// most heavily on eigenvectors of the scaled `v_z' v_z / n` whose eigenvalue
/// is at most `tol` times the largest. With a single candidate the ratio is
/// trivially one, so its scaled residual variance is compared with `tol`.
pub fn check_concurvity(dr: &DoubleResiduals, z: &DMatrix<f64>, tol: f64) -> ConcurvityReport {
    let n = dr.v_z.nrows() as f64;
    let m = dr.v_z.ncols();
    if m == 0 {
        return ConcurvityReport {
            ok: true,
            min_eigenvalue: 0.0,
            max_eigenvalue: 0.0,
            offending: Vec::new(),
        };
    }
    let sd: Vec<f64> = dr
        .columns
        .iter()
        .map(|&c| linalg::variance(&z.column(c).iter().copied().collect::<Vec<_>>()).sqrt())
        .collect();
    let mut scaled = dr.v_z.clone();
    for (j, &s) in sd.iter().enumerate() {
        if s > 0.0 {
            scaled.column_mut(j).scale_mut(1.0 / s);
        }
    }
    let eig = SymmetricEigen::new(linalg::gram(&scaled) / n);
    let lmax = eig.eigenvalues.max();
    let lmin = eig.eigenvalues.min();
    let mut offending: Vec<usize> = (0..m).filter(|&j| sd[j] == 0.0).collect();
    if m == 1 {
        if lmax <= tol {
            offending.push(0);
        }
    } else {
        for (k, &l) in eig.eigenvalues.iter().enumerate() {
            if l <= tol * lmax {
                let v = eig.eigenvectors.column(k);
                let worst = (0..m)
                    .max_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs()).then(b.cmp(&a)))
                    .unwrap();
                offending.push(worst);
            }
        }
    }
    offending.sort_unstable();
    offending.dedup();
    ConcurvityReport {
        ok: offending.is_empty(),
        min_eigenvalue: lmin,
        max_eigenvalue: lmax,
        offending,
    }
}

/// Everything step two needs, shareable across engines and variants.
#[derive(Debug, Clone)]
pub struct FirstStage {
    pub blocks: Vec<SmoothBlock>,
    /// Binary and demoted variables entering linearly.
    pub base_terms: Vec<Term>,
    pub catalog: InteractionCatalog,
    pub z: DMatrix<f64>,
    pub residuals: DoubleResiduals,
    pub concurvity: ConcurvityReport,
    /// Catalog positions eligible for selection, with the matching column in
    /// `residuals.v_z`.
    pub candidates: Vec<(usize, usize)>,
    pub warnings: Vec<String>,
    pub family: Family,
}

pub fn first_stage(data: &Dataset, config: &GamlaConfig) -> Result<FirstStage, GamlaError> {
    let smooth_vars = data.continuous_features();
    let (blocks, demoted, mut warnings) = gam::prepare_smooths(data, &smooth_vars, config.gam.dim);
    let mut base_cols: Vec<usize> = data
        .features()
        .into_iter()
        .filter(|&c| data.kind(c) == ColumnKind::Binary)
        .collect();
    base_cols.extend(demoted);
    base_cols.sort_unstable();
    let base_terms: Vec<Term> = base_cols.iter().map(|&c| Term::var(data.name(c))).collect();
    let base = crate::design::term_matrix(&base_terms, data).expect("columns come from the dataset");

    let (z, catalog) = build_interactions(data)?;
    warnings.extend(catalog.warnings.iter().cloned());
    let residuals = double_residuals(data.target(), &z, &blocks, &base, &config.gam)?;
    warnings.extend(residuals.warnings.iter().cloned());
    let concurvity = check_concurvity(&residuals, &z, config.concurvity_tol);
    if !concurvity.ok {
        let names: Vec<String> = concurvity
            .offending
            .iter()
            .map(|&j| catalog.terms[residuals.columns[j]].to_string())
            .collect();
        let share = names.len() as f64 / residuals.columns.len() as f64;
        if share > config.max_violation_share {
            return Err(GamlaError::ConcurvityViolation { columns: names, share });
        }
        for nm in names {
            warnings.push(format!("interaction `{nm}` is additive in the smooth variables; dropped"));
        }
    }
    let candidates = residuals
        .columns
        .iter()
        .enumerate()
        .filter(|(j, _)| !concurvity.offending.contains(j))
        .map(|(j, &s)| (s, j))
        .collect();
    let family = if data.target_is_binary() {
        Family::LinearProbability
    } else {
        Family::Gaussian
    };
    Ok(FirstStage {
        blocks,
        base_terms,
        catalog,
        z,
        residuals,
        concurvity,
        candidates,
        warnings,
        family,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PartialLinearModel {
    pub variant: Variant,
    pub engine: Engine,
    pub fit: AdditiveModel,
    pub selection: Option<SelectionResult>,
    /// Interaction candidates in catalog order.
    pub catalog: Vec<Term>,
    /// Catalog positions of the retained interactions.
    pub selected: Vec<usize>,
    /// Sorted training values of every variable that appears in a retained
    /// interaction, for context quantiles.
    pub context: BTreeMap<String, Vec<f64>>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

/// Steps two and three on a prepared first stage.
pub fn second_stage(
    data: &Dataset,
    fs: &FirstStage,
    engine: Engine,
    naive: bool,
    seed: u64,
    config: &GamlaConfig,
) -> Result<PartialLinearModel, GamlaError> {
    let mut warnings = fs.warnings.clone();
    let (selection, selected) = if fs.candidates.is_empty() {
        (None, Vec::new())
    } else {
        let x = if naive {
            let cols: Vec<usize> = fs.candidates.iter().map(|c| c.0).collect();
            fs.z.select_columns(&cols)
        } else {
            let cols: Vec<usize> = fs.candidates.iter().map(|c| c.1).collect();
            fs.residuals.v_z.select_columns(&cols)
        };
        let sel = selection::select(engine, &x, &fs.residuals.u_y, config.cv_folds, seed)?;
        warnings.extend(sel.warnings.iter().cloned());
        let selected: Vec<usize> = sel.retained.iter().map(|&j| fs.candidates[j].0).collect();
        (Some(sel), selected)
    };
    let mut terms = fs.base_terms.clone();
    terms.extend(selected.iter().map(|&s| fs.catalog.terms[s].clone()));
    let fit = gam::fit_with_blocks(data, &fs.blocks, &terms, fs.family, &config.gam, Vec::new())?;
    warnings.extend(fit.warnings.iter().cloned());

    let mut context = BTreeMap::new();
    for &s in &selected {
        for f in &fs.catalog.terms[s].factors {
            context.entry(f.column.clone()).or_insert_with(|| {
                let idx = data.index_of(&f.column).expect("catalog column");
                linalg::sorted(data.column(idx))
            });
        }
    }
    Ok(PartialLinearModel {
        variant: Variant::of(engine, naive),
        engine,
        fit,
        selection,
        catalog: fs.catalog.terms.clone(),
        selected,
        context,
        warnings,
    })
}

pub fn fit_partial_linear(
    data: &Dataset,
    engine: Engine,
    naive: bool,
    seed: u64,
    config: &GamlaConfig,
) -> Result<PartialLinearModel, GamlaError> {
    let fs = first_stage(data, config)?;
    second_stage(data, &fs, engine, naive, seed, config)
}

/// Lasso or adaptive-lasso selection on double residuals.
pub fn fit_gamla(
    data: &Dataset,
    adaptive: bool,
    rule: selection::LambdaRule,
    seed: u64,
) -> Result<PartialLinearModel, GamlaError> {
    let engine = if adaptive {
        Engine::AdaptiveLasso { rule }
    } else {
        Engine::Lasso { rule }
    };
    fit_partial_linear(data, engine, false, seed, &GamlaConfig::default())
}

/// General-to-specific selection on double residuals.
pub fn fit_gama(data: &Dataset, alpha: f64, seed: u64) -> Result<PartialLinearModel, GamlaError> {
    fit_partial_linear(data, Engine::Gets { alpha }, false, seed, &GamlaConfig::default())
}

/// Selection of the target residuals on the raw interactions.
pub fn fit_naive_variant(
    data: &Dataset,
    engine: Engine,
    seed: u64,
) -> Result<PartialLinearModel, GamlaError> {
    fit_partial_linear(data, engine, true, seed, &GamlaConfig::default())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContextCurve {
    pub label: String,
    pub quantile: f64,
    /// Constant added to the base curve.
    pub shift: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarginalEffectCurve {
    pub variable: String,
    pub grid: Vec<f64>,
    /// Derivative of the smooth term.
    pub base: Vec<f64>,
    pub contexts: Vec<ContextCurve>,
}

pub const DEFAULT_QUANTILES: [f64; 3] = [0.025, 0.5, 0.975];

impl PartialLinearModel {
    pub fn predict(&self, data: &Dataset) -> Result<Vec<f64>, GamError> {
        self.fit.predict(data)
    }

    pub fn selected_terms(&self) -> Vec<&Term> {
        self.selected.iter().map(|&s| &self.catalog[s]).collect()
    }

    pub fn selected_pairs(&self) -> Vec<(String, String)> {
        self.selected_terms()
            .iter()
            .filter_map(|t| t.as_pair().map(|(a, b)| (a.to_string(), b.to_string())))
            .collect()
    }

    /// `dy/dx_j = g_j'(x_j) + c_j`, with `c_j` the retained interaction
    /// coefficients involving `x_j` times the partner variables held at the
    /// given training quantiles.
    pub fn marginal_effects(
        &self,
        variable: &str,
        grid: &[f64],
        quantiles: &[f64],
    ) -> Result<MarginalEffectCurve, GamlaError> {
        let smooth = self
            .fit
            .smooth(variable)
            .ok_or_else(|| GamlaError::UnknownVariable(variable.to_string()))?;
        let base: Vec<f64> = grid.iter().map(|&x| smooth.derivative(x)).collect();
        let partners: Vec<(String, f64)> = self
            .selected_terms()
            .into_iter()
            .filter_map(|t| {
                let (a, b) = t.as_pair()?;
                let partner = if a == variable {
                    b
                } else if b == variable {
                    a
                } else {
                    return None;
                };
                Some((partner.to_string(), self.fit.coefficient(t).unwrap_or(0.0)))
            })
            .collect();
        let contexts = quantiles
            .iter()
            .map(|&q| {
                let shift: f64 = partners
                    .iter()
                    .map(|(p, g)| g * linalg::quantile_sorted(&self.context[p], q))
                    .sum();
                ContextCurve {
                    label: format!("q{}", q * 100.0),
                    quantile: q,
                    shift,
                    values: base.iter().map(|b| b + shift).collect(),
                }
            })
            .collect();
        Ok(MarginalEffectCurve {
            variable: variable.to_string(),
            grid: grid.to_vec(),
            base,
            contexts,
        })
    }
}
