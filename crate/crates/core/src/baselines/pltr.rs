//! Penalized logistic tree regression: threshold indicators taken from
//! one-split trees on each variable and two-split trees on each pair, added to
//! the raw variables in an adaptive-lasso logistic regression.
//!
//! From a pair tree one of the two deepest leaves is kept. By default that is
//! the left leaf of the left child when that child splits, otherwise the left
//! leaf of the right child; [`DeepLeaf::Right`] prefers the right child.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::logistic::{fit_adaptive_logistic, AdaptiveLogistic};
use super::tree::{fit_tree, Node, Task, Tree};
use super::{columns_for, feature_columns, BaselineError};
use crate::data::{distinct_count, Dataset};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub feature: String,
    pub threshold: f64,
    /// `x <= threshold` when true, `x > threshold` otherwise.
    pub below: bool,
}

/// Product of threshold conditions; 1 inside the leaf region, 0 outside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Indicator {
    pub conditions: Vec<Condition>,
}

impl Indicator {
    pub fn label(&self) -> String {
        self.conditions
            .iter()
            .map(|c| format!("{}{}{}", c.feature, if c.below { "<=" } else { ">" }, c.threshold))
            .collect::<Vec<_>>()
            .join("&")
    }

    fn eval(&self, value: &dyn Fn(&str) -> f64) -> f64 {
        let inside = self.conditions.iter().all(|c| {
            let v = value(&c.feature);
            if c.below {
                v <= c.threshold
            } else {
                v > c.threshold
            }
        });
        f64::from(u8::from(inside))
    }
}

/// Which child subtree of a pair tree supplies the retained deep leaf.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeepLeaf {
    #[default]
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PltrConfig {
    pub min_leaf: usize,
    pub folds: usize,
    pub nu: f64,
    pub deep_leaf: DeepLeaf,
}

impl Default for PltrConfig {
    fn default() -> Self {
        PltrConfig {
            min_leaf: 5,
            folds: 10,
            nu: 1.0,
            deep_leaf: DeepLeaf::Left,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PltrModel {
    pub features: Vec<String>,
    /// Univariate indicators first, then bivariate ones.
    pub indicators: Vec<Indicator>,
    pub n_univariate: usize,
    pub logistic: AdaptiveLogistic,
    #[serde(default)]
    pub warnings: Vec<String>,
}

fn split_of(tree: &Tree, i: usize) -> Option<(usize, f64, usize, usize)> {
    match tree.nodes[i] {
        Node::Split {
            feature,
            threshold,
            left,
            right,
            ..
        } => Some((feature, threshold, left, right)),
        Node::Leaf { .. } => None,
    }
}

fn univariate(name: &str, x: &[f64], y: &[f64], min_leaf: usize) -> Option<Indicator> {
    let t = fit_tree(vec![name.to_string()], &[x.to_vec()], y, Task::Classification, Some(1), min_leaf);
    let (_, threshold, _, _) = split_of(&t.tree, 0)?;
    Some(Indicator {
        conditions: vec![Condition {
            feature: name.to_string(),
            threshold,
            below: true,
        }],
    })
}

fn bivariate(names: [&str; 2], cols: [&[f64]; 2], y: &[f64], min_leaf: usize, prefer: DeepLeaf) -> Option<Indicator> {
    let feats = vec![names[0].to_string(), names[1].to_string()];
    let t = fit_tree(feats, &[cols[0].to_vec(), cols[1].to_vec()], y, Task::Classification, Some(2), min_leaf);
    let (f0, t0, left, right) = split_of(&t.tree, 0)?;
    let (side, (f1, t1, _, _)) = match (split_of(&t.tree, left), split_of(&t.tree, right), prefer) {
        (Some(s), _, DeepLeaf::Left) | (Some(s), None, DeepLeaf::Right) => (true, s),
        (_, Some(s), _) => (false, s),
        (None, None, _) => return None,
    };
    Some(Indicator {
        conditions: vec![
            Condition {
                feature: names[f0].to_string(),
                threshold: t0,
                below: side,
            },
            Condition {
                feature: names[f1].to_string(),
                threshold: t1,
                below: true,
            },
        ],
    })
}

fn design(features: &[String], columns: &[Vec<f64>], indicators: &[Indicator]) -> DMatrix<f64> {
    let n = columns.first().map_or(0, Vec::len);
    let p = features.len();
    DMatrix::from_fn(n, p + indicators.len(), |i, j| {
        if j < p {
            columns[j][i]
        } else {
            let look = |name: &str| {
                let f = features.iter().position(|x| x == name).expect("indicator feature");
                columns[f][i]
            };
            indicators[j - p].eval(&look)
        }
    })
}

pub fn fit_pltr(data: &Dataset, config: &PltrConfig, seed: u64) -> Result<PltrModel, BaselineError> {
    if !data.target_is_binary() {
        return Err(BaselineError::NotBinary);
    }
    let (features, columns) = feature_columns(data);
    if features.len() < 2 {
        return Err(BaselineError::TooFewVariables);
    }
    let y = data.target();
    let mut warnings = Vec::new();
    let mut indicators = Vec::new();
    let usable: Vec<bool> = columns.iter().map(|c| distinct_count(c) >= 2).collect();
    for ((name, col), &ok) in features.iter().zip(&columns).zip(&usable) {
        if !ok {
            warnings.push(format!("`{name}` is constant; no tree built"));
            continue;
        }
        match univariate(name, col, y, config.min_leaf) {
            Some(ind) => indicators.push(ind),
            None => warnings.push(format!("no valid split on `{name}`; skipped")),
        }
    }
    let n_univariate = indicators.len();
    let pairs: Vec<(usize, usize)> = (0..features.len())
        .flat_map(|a| (a + 1..features.len()).map(move |b| (a, b)))
        .filter(|&(a, b)| usable[a] && usable[b])
        .collect();
    let deep = crate::par::map_slice(&pairs, |&(a, b)| {
        bivariate(
            [&features[a], &features[b]],
            [&columns[a], &columns[b]],
            y,
            config.min_leaf,
            config.deep_leaf,
        )
    });
    for (&(a, b), ind) in pairs.iter().zip(deep) {
        match ind {
            Some(ind) => indicators.push(ind),
            None => warnings.push(format!(
                "no valid two-split tree on `{}`/`{}`; skipped",
                features[a], features[b]
            )),
        }
    }
    let x = design(&features, &columns, &indicators);
    let logistic = fit_adaptive_logistic(&x, y, config.nu, config.folds, seed);
    Ok(PltrModel {
        features,
        indicators,
        n_univariate,
        logistic,
        warnings,
    })
}

impl PltrModel {
    pub fn design(&self, data: &Dataset) -> Result<DMatrix<f64>, BaselineError> {
        let columns = columns_for(data, &self.features)?;
        Ok(design(&self.features, &columns, &self.indicators))
    }

    pub fn predict(&self, data: &Dataset) -> Result<Vec<f64>, BaselineError> {
        Ok(self.logistic.fit.predict(&self.design(data)?))
    }
}
