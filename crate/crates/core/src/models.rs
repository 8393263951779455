//! Uniform model specifications and fitted models.
//!
//! A spec is written `name[:key=value,...]`, e.g. `gama:alpha=0.01`,
//! `gamla:lambda=1se`, `forest:trees=200,mtry=4`. Unknown names or keys are
//! configuration errors.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::baselines::{
    self, augment, fit_gradient_boosting, fit_ols, fit_pltr, fit_random_forest, fit_tree, task_of,
    BoostingConfig, EnsembleModel, ForestConfig, LinearModel, PltrConfig, PltrModel, TreeModel,
};
use crate::data::{ColumnKind, Dataset};
use crate::design::{term_matrix, Term};
use crate::error::Error;
use crate::gam::{fit_gam, AdditiveModel, Family, GamConfig};
use crate::gamla::{fit_partial_linear, GamlaConfig, PartialLinearModel};
use crate::selection::{self, Engine, LambdaRule, SelectionResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Gam,
    Gamla,
    GamlaAlasso,
    Gama,
    GamlaStar,
    GamlaAlassoStar,
    GamaStar,
    Ols,
    OlsAugmented,
    Lasso,
    Alasso,
    Am,
    Tree,
    Forest,
    Boosting,
    Pltr,
}

const NAMES: [(&str, ModelKind); 16] = [
    ("gam", ModelKind::Gam),
    ("gamla", ModelKind::Gamla),
    ("gamla-alasso", ModelKind::GamlaAlasso),
    ("gama", ModelKind::Gama),
    ("gamla-star", ModelKind::GamlaStar),
    ("gamla-alasso-star", ModelKind::GamlaAlassoStar),
    ("gama-star", ModelKind::GamaStar),
    ("ols", ModelKind::Ols),
    ("ols-augmented", ModelKind::OlsAugmented),
    ("lasso", ModelKind::Lasso),
    ("alasso", ModelKind::Alasso),
    ("am", ModelKind::Am),
    ("tree", ModelKind::Tree),
    ("forest", ModelKind::Forest),
    ("boosting", ModelKind::Boosting),
    ("pltr", ModelKind::Pltr),
];

impl ModelKind {
    pub fn name(self) -> &'static str {
        NAMES.iter().find(|(_, k)| *k == self).map(|(n, _)| *n).expect("every kind is named")
    }

    fn uses_lambda(self) -> bool {
        use ModelKind::*;
        matches!(self, Gamla | GamlaAlasso | GamlaStar | GamlaAlassoStar | Lasso | Alasso)
    }

    fn uses_alpha(self) -> bool {
        matches!(self, ModelKind::Gama | ModelKind::GamaStar | ModelKind::Am)
    }

    fn uses_dim(self) -> bool {
        use ModelKind::*;
        matches!(self, Gam | Gamla | GamlaAlasso | Gama | GamlaStar | GamlaAlassoStar | GamaStar)
    }

    fn uses_augmentation(self) -> bool {
        matches!(self, ModelKind::OlsAugmented | ModelKind::Lasso | ModelKind::Alasso | ModelKind::Am)
    }

    /// Models whose output includes a set of selected interactions.
    pub fn selects_interactions(self) -> bool {
        self.uses_lambda() || self.uses_alpha()
    }
}

/// Fully resolved model specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub lambda: LambdaRule,
    pub alpha: f64,
    pub dim: usize,
    pub powers: u32,
    pub interactions: bool,
    /// CV folds for lasso tuning.
    pub folds: usize,
    pub trees: usize,
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub mtry: Option<usize>,
    pub learning_rate: f64,
}

impl ModelSpec {
    pub fn new(kind: ModelKind) -> Self {
        let (trees, max_depth, min_leaf) = match kind {
            ModelKind::Boosting => (500, Some(3), 1),
            ModelKind::Forest => (500, None, 5),
            _ => (0, None, 5),
        };
        ModelSpec {
            kind,
            lambda: LambdaRule::default(),
            alpha: 0.05,
            dim: crate::basis::DEFAULT_DIM,
            powers: 3,
            interactions: true,
            folds: 10,
            trees,
            max_depth,
            min_leaf,
            mtry: None,
            learning_rate: 0.1,
        }
    }

    /// Short tuning label such as `lambda=1se` or `alpha=0.01`.
    pub fn tuning_label(&self) -> String {
        if self.kind.uses_lambda() {
            format!("lambda={}", self.lambda)
        } else if self.kind.uses_alpha() {
            format!("alpha={}", self.alpha)
        } else {
            String::new()
        }
    }

    /// Whether `key` is a meaningful option for this model family.
    pub fn accepts(&self, key: &str) -> bool {
        let kind = self.kind;
        match key {
            "lambda" => kind.uses_lambda(),
            "alpha" => kind.uses_alpha(),
            "dim" => kind.uses_dim(),
            "powers" | "interactions" => kind.uses_augmentation(),
            "folds" => kind.uses_lambda() || kind == ModelKind::Pltr,
            "trees" | "lr" => matches!(kind, ModelKind::Forest | ModelKind::Boosting),
            "mtry" => kind == ModelKind::Forest,
            "depth" | "min_leaf" => matches!(kind, ModelKind::Tree | ModelKind::Forest | ModelKind::Boosting),
            _ => false,
        }
    }

    /// Applies a comma-separated `key=value` list.
    pub fn apply(&mut self, options: &str) -> Result<(), Error> {
        for kv in options.split(',').filter(|kv| !kv.trim().is_empty()) {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("expected key=value, got `{kv}`")))?;
            self.set(k.trim(), v.trim()).map_err(Error::Config)?;
        }
        Ok(())
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let bad = || format!("invalid value `{value}` for `{key}`");
        if !self.accepts(key) {
            return Err(format!("unknown key `{key}` for model `{}`", self.kind.name()));
        }
        match key {
            "lambda" => self.lambda = value.parse().map_err(|_| bad())?,
            "alpha" => {
                let a: f64 = value.parse().map_err(|_| bad())?;
                if !(a > 0.0 && a < 1.0) {
                    return Err(bad());
                }
                self.alpha = a;
            }
            "dim" => {
                self.dim = value.parse().map_err(|_| bad())?;
                if self.dim < 4 {
                    return Err(bad());
                }
            }
            "powers" => {
                self.powers = value.parse().map_err(|_| bad())?;
                if !(1..=3).contains(&self.powers) {
                    return Err(bad());
                }
            }
            "interactions" => self.interactions = value.parse().map_err(|_| bad())?,
            "folds" => {
                self.folds = value.parse().map_err(|_| bad())?;
                if self.folds < 2 {
                    return Err(bad());
                }
            }
            "trees" => self.trees = value.parse().map_err(|_| bad())?,
            "lr" => self.learning_rate = value.parse().map_err(|_| bad())?,
            "mtry" => self.mtry = Some(value.parse().map_err(|_| bad())?),
            "depth" => self.max_depth = if value == "none" { None } else { Some(value.parse().map_err(|_| bad())?) },
            "min_leaf" => self.min_leaf = value.parse().map_err(|_| bad())?,
            _ => unreachable!(),
        }
        Ok(())
    }
}

impl FromStr for ModelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let (name, rest) = match s.split_once(':') {
            Some((n, r)) => (n.trim(), Some(r)),
            None => (s.trim(), None),
        };
        let kind = NAMES
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, k)| *k)
            .ok_or_else(|| Error::Config(format!("unknown model `{name}`")))?;
        let mut spec = ModelSpec::new(kind);
        if let Some(rest) = rest {
            spec.apply(rest)?;
        }
        Ok(spec)
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let default = ModelSpec::new(self.kind);
        let mut parts = Vec::new();
        if self.kind.uses_lambda() {
            parts.push(format!("lambda={}", self.lambda));
        }
        if self.kind.uses_alpha() {
            parts.push(format!("alpha={}", self.alpha));
        }
        if self.kind.uses_dim() && self.dim != default.dim {
            parts.push(format!("dim={}", self.dim));
        }
        if self.kind.uses_augmentation() {
            if self.powers != default.powers {
                parts.push(format!("powers={}", self.powers));
            }
            if self.interactions != default.interactions {
                parts.push(format!("interactions={}", self.interactions));
            }
        }
        if self.folds != default.folds {
            parts.push(format!("folds={}", self.folds));
        }
        if self.trees != default.trees {
            parts.push(format!("trees={}", self.trees));
        }
        if self.learning_rate != default.learning_rate {
            parts.push(format!("lr={}", self.learning_rate));
        }
        if let Some(m) = self.mtry {
            parts.push(format!("mtry={m}"));
        }
        if self.max_depth != default.max_depth {
            parts.push(match self.max_depth {
                Some(d) => format!("depth={d}"),
                None => "depth=none".to_string(),
            });
        }
        if self.min_leaf != default.min_leaf {
            parts.push(format!("min_leaf={}", self.min_leaf));
        }
        if parts.is_empty() {
            write!(f, "{}", self.kind.name())
        } else {
            write!(f, "{}:{}", self.kind.name(), parts.join(","))
        }
    }
}

/// Linear model on a subset of candidate terms chosen by a selection engine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseLinearModel {
    pub candidates: Vec<Term>,
    pub terms: Vec<Term>,
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub selection: SelectionResult,
}

impl SparseLinearModel {
    pub fn predict(&self, data: &Dataset) -> Result<Vec<f64>, Error> {
        let x = term_matrix(&self.terms, data)?;
        let f = x * DVector::from_column_slice(&self.coefficients);
        Ok(f.iter().map(|v| v + self.intercept).collect())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", content = "fit", rename_all = "kebab-case")]
pub enum FittedModel {
    Additive(AdditiveModel),
    PartialLinear(PartialLinearModel),
    Linear(LinearModel),
    Sparse(SparseLinearModel),
    Tree(TreeModel),
    Ensemble(EnsembleModel),
    Pltr(PltrModel),
}

fn family_of(data: &Dataset) -> Family {
    if data.target_is_binary() {
        Family::LinearProbability
    } else {
        Family::Gaussian
    }
}

fn engine_of(spec: &ModelSpec) -> Engine {
    use ModelKind::*;
    match spec.kind {
        Gamla | GamlaStar | Lasso => Engine::Lasso { rule: spec.lambda },
        GamlaAlasso | GamlaAlassoStar | Alasso => Engine::AdaptiveLasso { rule: spec.lambda },
        _ => Engine::Gets { alpha: spec.alpha },
    }
}

/// Fits `spec` on `data`. The seed drives CV folds, bootstrap draws and
/// validation splits.
pub fn fit_model(spec: &ModelSpec, data: &Dataset, seed: u64) -> Result<FittedModel, Error> {
    use ModelKind::*;
    let gam_config = GamConfig {
        dim: spec.dim,
        ..GamConfig::default()
    };
    Ok(match spec.kind {
        Gam => {
            let binary: Vec<usize> = data
                .features()
                .into_iter()
                .filter(|&c| data.kind(c) == ColumnKind::Binary)
                .collect();
            FittedModel::Additive(fit_gam(data, &data.continuous_features(), &binary, family_of(data), &gam_config)?)
        }
        Gamla | GamlaAlasso | Gama | GamlaStar | GamlaAlassoStar | GamaStar => {
            let naive = matches!(spec.kind, GamlaStar | GamlaAlassoStar | GamaStar);
            let config = GamlaConfig {
                gam: gam_config,
                cv_folds: spec.folds,
                ..GamlaConfig::default()
            };
            FittedModel::PartialLinear(fit_partial_linear(data, engine_of(spec), naive, seed, &config)?)
        }
        Ols => {
            let terms: Vec<Term> = data.active_features().into_iter().map(|c| Term::var(data.name(c))).collect();
            FittedModel::Linear(fit_ols(data, &terms, true)?)
        }
        OlsAugmented => {
            let design = augment(data, spec.powers, spec.interactions);
            FittedModel::Linear(fit_ols(data, &design.terms, true)?)
        }
        Lasso | Alasso | Am => {
            let design = augment(data, spec.powers, spec.interactions);
            let x = design.matrix(data)?;
            let sel = selection::select(engine_of(spec), &x, data.target(), spec.folds, seed)?;
            FittedModel::Sparse(SparseLinearModel {
                terms: sel.retained.iter().map(|&j| design.terms[j].clone()).collect(),
                intercept: sel.intercept,
                coefficients: sel.coefficients.clone(),
                candidates: design.terms,
                selection: sel,
            })
        }
        Tree => {
            let (names, cols) = baselines::feature_columns(data);
            FittedModel::Tree(fit_tree(names, &cols, data.target(), task_of(data), spec.max_depth, spec.min_leaf))
        }
        Forest => {
            let (names, cols) = baselines::feature_columns(data);
            let cfg = ForestConfig {
                trees: spec.trees,
                mtry: spec.mtry,
                min_leaf: spec.min_leaf,
                max_depth: spec.max_depth,
                bootstrap: true,
            };
            FittedModel::Ensemble(fit_random_forest(names, &cols, data.target(), task_of(data), &cfg, seed))
        }
        Boosting => {
            let (names, cols) = baselines::feature_columns(data);
            let cfg = BoostingConfig {
                trees: spec.trees,
                learning_rate: spec.learning_rate,
                max_depth: spec.max_depth.unwrap_or(3),
                min_leaf: spec.min_leaf,
                ..BoostingConfig::default()
            };
            FittedModel::Ensemble(fit_gradient_boosting(names, &cols, data.target(), task_of(data), &cfg, seed))
        }
        Pltr => {
            let cfg = PltrConfig {
                folds: spec.folds,
                ..PltrConfig::default()
            };
            FittedModel::Pltr(fit_pltr(data, &cfg, seed)?)
        }
    })
}

impl FittedModel {
    pub fn predict(&self, data: &Dataset) -> Result<Vec<f64>, Error> {
        Ok(match self {
            FittedModel::Additive(m) => m.predict(data)?,
            FittedModel::PartialLinear(m) => m.predict(data)?,
            FittedModel::Linear(m) => m.predict(data)?,
            FittedModel::Sparse(m) => m.predict(data)?,
            FittedModel::Tree(m) => m.predict_columns(&baselines::columns_for(data, &m.features)?),
            FittedModel::Ensemble(m) => m.predict_columns(&baselines::columns_for(data, &m.features)?),
            FittedModel::Pltr(m) => m.predict(data)?,
        })
    }

    /// Interaction pairs entering the model linearly, for selecting models.
    pub fn selected_pairs(&self) -> Option<Vec<(String, String)>> {
        let pairs = |terms: &[&Term]| {
            terms
                .iter()
                .filter_map(|t| t.as_pair().map(|(a, b)| (a.to_string(), b.to_string())))
                .collect()
        };
        match self {
            FittedModel::PartialLinear(m) => Some(m.selected_pairs()),
            FittedModel::Sparse(m) => Some(pairs(&m.terms.iter().collect::<Vec<_>>())),
            _ => None,
        }
    }

    pub fn selection(&self) -> Option<&SelectionResult> {
        match self {
            FittedModel::PartialLinear(m) => m.selection.as_ref(),
            FittedModel::Sparse(m) => Some(&m.selection),
            _ => None,
        }
    }

    pub fn additive(&self) -> Option<&AdditiveModel> {
        match self {
            FittedModel::Additive(m) => Some(m),
            FittedModel::PartialLinear(m) => Some(&m.fit),
            _ => None,
        }
    }

    pub fn warnings(&self) -> Vec<String> {
        match self {
            FittedModel::Additive(m) => m.warnings.clone(),
            FittedModel::PartialLinear(m) => m.warnings.clone(),
            FittedModel::Linear(m) => m.warnings.clone(),
            FittedModel::Sparse(m) => m.selection.warnings.clone(),
            FittedModel::Pltr(m) => m.warnings.clone(),
            FittedModel::Tree(_) | FittedModel::Ensemble(_) => Vec::new(),
        }
    }
}
