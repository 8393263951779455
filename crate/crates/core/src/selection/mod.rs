//! Variable selection on a linear regression: lasso and adaptive lasso with
//! cross-validated penalty, and a general-to-specific search with a target
//! size.

mod diagnostics;
mod gets;
mod lasso;

use serde::{Deserialize, Serialize};

pub use diagnostics::{diagnostic_battery, doornik_hansen, reset_test, white_test, Diagnostic};
pub use gets::{gets_select, GetsConfig};
pub use lasso::{
    cv_lambda, fit_adaptive_lasso, fit_lasso, fit_weighted_lasso, lasso_select, ridge_gcv, CvCurve,
    LassoFit, Standardized, LAMBDA_GRID,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SelectionError {
    #[error("need at least {needed} observations, have {have}")]
    TooFewObservations { needed: usize, have: usize },
    #[error("general-to-specific search needs n > k + 10 (n = {n}, k = {k})")]
    InsufficientDf { n: usize, k: usize },
    #[error("no usable candidate columns")]
    NoCandidates,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum LambdaRule {
    #[serde(rename = "min")]
    Min,
    #[default]
    #[serde(rename = "1se")]
    OneSe,
}

impl std::str::FromStr for LambdaRule {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "min" => Ok(LambdaRule::Min),
            "1se" => Ok(LambdaRule::OneSe),
            other => Err(format!("unknown lambda rule `{other}` (min|1se)")),
        }
    }
}

impl std::fmt::Display for LambdaRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LambdaRule::Min => "min",
            LambdaRule::OneSe => "1se",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Tuning {
    Lambda {
        rule: LambdaRule,
        value: f64,
        lambda_min: f64,
        lambda_1se: f64,
    },
    Alpha {
        alpha: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathPoint {
    pub lambda: f64,
    pub cv_error: f64,
    pub cv_se: f64,
    pub nonzero: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub method: String,
    /// Candidate column positions, ascending.
    pub retained: Vec<usize>,
    /// Aligned with `retained`.
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub tuning: Tuning,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub path: Vec<PathPoint>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<Diagnostic>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    /// The search found no reduction passing its checks and fell back to the
    /// unrestricted model.
    #[serde(default)]
    pub no_valid_reduction: bool,
}

impl SelectionResult {
    pub fn is_retained(&self, col: usize) -> bool {
        self.retained.binary_search(&col).is_ok()
    }
}

/// Selection engine for the second stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "engine", rename_all = "kebab-case")]
pub enum Engine {
    Lasso { rule: LambdaRule },
    AdaptiveLasso { rule: LambdaRule },
    Gets { alpha: f64 },
}

/// Runs one engine. `k` is the number of CV folds for the lasso engines.
pub fn select(
    engine: Engine,
    x: &nalgebra::DMatrix<f64>,
    y: &[f64],
    k: usize,
    seed: u64,
) -> Result<SelectionResult, SelectionError> {
    match engine {
        Engine::Lasso { rule } => lasso_select(x, y, None, rule, k, seed),
        Engine::AdaptiveLasso { rule } => fit_adaptive_lasso(x, y, 1.0, rule, k, seed),
        Engine::Gets { alpha } => gets_select(x, y, alpha, &GetsConfig::default()),
    }
}
