//! Random forests and gradient boosting on CART trees.

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::tree::{grow_tree, Presorted, Task, Tree, TreeConfig};
use crate::rng::{self, stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnsembleKind {
    Forest,
    Boosting,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Loss {
    Squared,
    Logistic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestConfig {
    pub trees: usize,
    /// Defaults to ceil(p/3) for regression and ceil(sqrt p) for classification.
    pub mtry: Option<usize>,
    pub min_leaf: usize,
    pub max_depth: Option<usize>,
    pub bootstrap: bool,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            trees: 500,
            mtry: None,
            min_leaf: 5,
            max_depth: None,
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoostingConfig {
    pub trees: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Share of rows held out to choose the number of trees; 0 disables.
    pub validation_fraction: f64,
    /// Rounds without validation improvement before stopping.
    pub patience: usize,
}

impl Default for BoostingConfig {
    fn default() -> Self {
        BoostingConfig {
            trees: 500,
            learning_rate: 0.1,
            max_depth: 3,
            min_leaf: 1,
            validation_fraction: 0.2,
            patience: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleModel {
    pub kind: EnsembleKind,
    pub task: Task,
    pub loss: Loss,
    pub features: Vec<String>,
    pub trees: Vec<Tree>,
    /// 1/B for forests, the learning rate for boosting.
    pub weights: Vec<f64>,
    /// Boosting starting value on the link scale; 0 for forests.
    pub init: f64,
    pub min_leaf: usize,
    pub max_depth: Option<usize>,
    pub mtry: Option<usize>,
    /// Training loss after each boosting stage (index 0 is the initial fit).
    #[serde(default)]
    pub train_loss: Vec<f64>,
    #[serde(default)]
    pub valid_loss: Vec<f64>,
}

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

impl EnsembleModel {
    /// Link-scale score for one row.
    pub fn raw_with(&self, row: &dyn Fn(usize) -> f64) -> f64 {
        self.init
            + self
                .trees
                .iter()
                .zip(&self.weights)
                .map(|(t, w)| w * t.predict_with(row))
                .sum::<f64>()
    }

    pub fn predict_with(&self, row: &dyn Fn(usize) -> f64) -> f64 {
        let raw = self.raw_with(row);
        match self.loss {
            Loss::Logistic => sigmoid(raw),
            Loss::Squared => raw,
        }
    }

    pub fn predict_columns(&self, columns: &[Vec<f64>]) -> Vec<f64> {
        let n = columns.first().map_or(0, Vec::len);
        (0..n).map(|i| self.predict_with(&|f| columns[f][i])).collect()
    }

    /// Total impurity reduction per feature, normalized to sum to one and
    /// sorted in decreasing order.
    pub fn variable_importance(&self) -> Vec<(String, f64)> {
        let p = self.features.len();
        let mut total = vec![0.0; p];
        for (t, w) in self.trees.iter().zip(&self.weights) {
            for (acc, g) in total.iter_mut().zip(t.gains(p)) {
                *acc += w * g;
            }
        }
        let s: f64 = total.iter().sum();
        let mut out: Vec<(String, f64)> = self
            .features
            .iter()
            .cloned()
            .zip(total.into_iter().map(|g| if s > 0.0 { g / s } else { 0.0 }))
            .collect();
        out.sort_by(|a, b| b.1.total_cmp(&a.1));
        out
    }
}

pub fn default_mtry(p: usize, task: Task) -> usize {
    match task {
        Task::Regression => p.div_ceil(3),
        Task::Classification => (p as f64).sqrt().ceil() as usize,
    }
    .clamp(1, p.max(1))
}

pub fn fit_random_forest(
    features: Vec<String>,
    columns: &[Vec<f64>],
    y: &[f64],
    task: Task,
    config: &ForestConfig,
    seed: u64,
) -> EnsembleModel {
    let data = Presorted::new(columns);
    let n = y.len();
    let p = columns.len();
    let mtry = config.mtry.unwrap_or_else(|| default_mtry(p, task)).clamp(1, p.max(1));
    let tree_cfg = TreeConfig {
        max_depth: config.max_depth,
        min_leaf: config.min_leaf,
        mtry: Some(mtry),
    };
    let base = rng::derive(seed, stream::TREES);
    let trees = crate::par::map_indexed(config.trees, |b| {
        let mut r = rng::child(base, b as u64);
        let counts: Option<Vec<u32>> = config.bootstrap.then(|| {
            let mut c = vec![0u32; n];
            for _ in 0..n {
                c[r.random_range(0..n)] += 1;
            }
            c
        });
        grow_tree(&data, y, counts.as_deref(), &tree_cfg, Some(&mut r))
    });
    let b = trees.len().max(1);
    EnsembleModel {
        kind: EnsembleKind::Forest,
        task,
        loss: Loss::Squared,
        features,
        weights: vec![1.0 / b as f64; trees.len()],
        trees,
        init: 0.0,
        min_leaf: config.min_leaf,
        max_depth: config.max_depth,
        mtry: Some(mtry),
        train_loss: Vec::new(),
        valid_loss: Vec::new(),
    }
}

fn loss_value(loss: Loss, y: f64, raw: f64) -> f64 {
    match loss {
        Loss::Squared => (y - raw).powi(2),
        Loss::Logistic => {
            // log(1 + e^raw) - y raw, computed stably
            let softplus = if raw > 0.0 { raw + (-raw).exp().ln_1p() } else { raw.exp().ln_1p() };
            softplus - y * raw
        }
    }
}

fn negative_gradient(loss: Loss, y: f64, raw: f64) -> f64 {
    match loss {
        Loss::Squared => y - raw,
        Loss::Logistic => y - sigmoid(raw),
    }
}

/// Stagewise boosting: each tree fits the negative gradient of the loss at
/// the current scores and enters with weight `learning_rate`.
pub fn fit_gradient_boosting(
    features: Vec<String>,
    columns: &[Vec<f64>],
    y: &[f64],
    task: Task,
    config: &BoostingConfig,
    seed: u64,
) -> EnsembleModel {
    let n = y.len();
    let loss = match task {
        Task::Regression => Loss::Squared,
        Task::Classification => Loss::Logistic,
    };
    let mut is_train = vec![true; n];
    let n_valid = ((n as f64) * config.validation_fraction).floor() as usize;
    if n_valid > 0 && n - n_valid >= 2 {
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng::child(seed, stream::VALIDATION));
        for &i in &perm[..n_valid] {
            is_train[i] = false;
        }
    }
    let counts: Vec<u32> = is_train.iter().map(|&t| t as u32).collect();
    let train: Vec<usize> = (0..n).filter(|&i| is_train[i]).collect();
    let valid: Vec<usize> = (0..n).filter(|&i| !is_train[i]).collect();

    let ybar = train.iter().map(|&i| y[i]).sum::<f64>() / train.len().max(1) as f64;
    let init = match loss {
        Loss::Squared => ybar,
        Loss::Logistic => {
            let p = ybar.clamp(1e-6, 1.0 - 1e-6);
            (p / (1.0 - p)).ln()
        }
    };
    let data = Presorted::new(columns);
    let tree_cfg = TreeConfig {
        max_depth: Some(config.max_depth),
        min_leaf: config.min_leaf,
        mtry: None,
    };
    let mean_loss = |rows: &[usize], raw: &[f64]| -> f64 {
        rows.iter().map(|&i| loss_value(loss, y[i], raw[i])).sum::<f64>() / rows.len().max(1) as f64
    };
    let mut raw = vec![init; n];
    let mut trees = Vec::new();
    let mut train_loss = vec![mean_loss(&train, &raw)];
    let mut valid_loss = if valid.is_empty() { Vec::new() } else { vec![mean_loss(&valid, &raw)] };
    let (mut best, mut best_at) = (valid_loss.first().copied().unwrap_or(f64::INFINITY), 0);
    for b in 0..config.trees {
        let g: Vec<f64> = (0..n).map(|i| negative_gradient(loss, y[i], raw[i])).collect();
        let tree = grow_tree(&data, &g, Some(&counts), &tree_cfg, None);
        for (i, r) in raw.iter_mut().enumerate() {
            *r += config.learning_rate * tree.predict(columns, i);
        }
        trees.push(tree);
        train_loss.push(mean_loss(&train, &raw));
        if !valid.is_empty() {
            let v = mean_loss(&valid, &raw);
            valid_loss.push(v);
            if v < best {
                best = v;
                best_at = b + 1;
            } else if b + 1 - best_at >= config.patience {
                break;
            }
        }
    }
    if !valid.is_empty() {
        trees.truncate(best_at);
        train_loss.truncate(best_at + 1);
    }
    EnsembleModel {
        kind: EnsembleKind::Boosting,
        task,
        loss,
        features,
        weights: vec![config.learning_rate; trees.len()],
        trees,
        init,
        min_leaf: config.min_leaf,
        max_depth: Some(config.max_depth),
        mtry: None,
        train_loss,
        valid_loss,
    }
}
