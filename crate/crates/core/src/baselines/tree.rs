//! CART regression and classification trees.
//!
//! Splits are chosen greedily by exhaustive scan over the sorted distinct
//! values of every candidate variable; a row goes left when `x <= threshold`.
//! Classification targets are 0/1, for which the weighted Gini impurity is
//! exactly twice the within-node sum of squares, so both tasks share the same
//! scan and leaves hold the class-one share.
//!
//! Each feature is sorted once. Nodes are grown by stable partitioning of
//! those orders, and bootstrap samples are expressed as row multiplicities,
//! so no sorting happens below the root.

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Regression,
    Classification,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        /// Impurity reduction achieved by the split.
        gain: f64,
    },
    Leaf {
        value: f64,
        region: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    fn leaf_node(&self, row: &dyn Fn(usize) -> f64) -> &Node {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => i = if row(*feature) <= *threshold { *left } else { *right },
                leaf => return leaf,
            }
        }
    }

    /// Prediction for one row, given a feature accessor.
    pub fn predict_with(&self, row: &dyn Fn(usize) -> f64) -> f64 {
        match self.leaf_node(row) {
            Node::Leaf { value, .. } => *value,
            Node::Split { .. } => unreachable!(),
        }
    }

    pub fn region_with(&self, row: &dyn Fn(usize) -> f64) -> usize {
        match self.leaf_node(row) {
            Node::Leaf { region, .. } => *region,
            Node::Split { .. } => unreachable!(),
        }
    }

    pub fn predict(&self, columns: &[Vec<f64>], i: usize) -> f64 {
        self.predict_with(&|f| columns[f][i])
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
            }
        }
        go(&self.nodes, 0)
    }

    /// Impurity reduction per feature.
    pub fn gains(&self, n_features: usize) -> Vec<f64> {
        let mut g = vec![0.0; n_features];
        for node in &self.nodes {
            if let Node::Split { feature, gain, .. } = node {
                g[*feature] += gain;
            }
        }
        g
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    /// Features sampled per split; all when `None`.
    pub mtry: Option<usize>,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            max_depth: None,
            min_leaf: 5,
            mtry: None,
        }
    }
}

/// Feature columns with their row orders, shared by every tree grown on them.
#[derive(Debug, Clone)]
pub struct Presorted<'a> {
    pub columns: &'a [Vec<f64>],
    orders: Vec<Vec<u32>>,
}

impl<'a> Presorted<'a> {
    pub fn new(columns: &'a [Vec<f64>]) -> Self {
        let orders = columns
            .iter()
            .map(|c| {
                let mut o: Vec<u32> = (0..c.len() as u32).collect();
                o.sort_by(|&a, &b| c[a as usize].total_cmp(&c[b as usize]).then(a.cmp(&b)));
                o
            })
            .collect();
        Presorted { columns, orders }
    }

    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }
}

struct Grower<'a, 'r> {
    data: &'a Presorted<'a>,
    y: &'a [f64],
    config: &'a TreeConfig,
    rng: Option<&'r mut Rng>,
    /// Per-feature sample orders; duplicates appear consecutively.
    orders: Vec<Vec<u32>>,
    scratch: Vec<u32>,
    goes_left: Vec<bool>,
    scale: f64,
    nodes: Vec<Node>,
    regions: usize,
}

struct Split {
    feature: usize,
    threshold: f64,
    gain: f64,
    n_left: usize,
}

impl Grower<'_, '_> {
    fn best_split(&mut self, lo: usize, hi: usize, sum: f64) -> Option<Split> {
        let m = hi - lo;
        let min_leaf = self.config.min_leaf.max(1);
        if m < 2 * min_leaf {
            return None;
        }
        let p = self.data.n_features();
        let features: Vec<usize> = match (self.config.mtry, self.rng.as_deref_mut()) {
            (Some(k), Some(rng)) if k < p => {
                let mut f = sample(rng, p, k).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..p).collect(),
        };
        let parent = sum * sum / m as f64;
        let mut best: Option<Split> = None;
        for f in features {
            let col = &self.data.columns[f];
            let order = &self.orders[f][lo..hi];
            let mut s_left = 0.0;
            for (i, w) in order.windows(2).enumerate() {
                s_left += self.y[w[0] as usize];
                let n_left = i + 1;
                let (a, b) = (col[w[0] as usize], col[w[1] as usize]);
                if b <= a || n_left < min_leaf || m - n_left < min_leaf {
                    continue;
                }
                let s_right = sum - s_left;
                let gain = s_left * s_left / n_left as f64 + s_right * s_right / (m - n_left) as f64 - parent;
                if best.as_ref().is_none_or(|bs| gain > bs.gain) {
                    let mid = 0.5 * (a + b);
                    let threshold = if mid < b { mid } else { a };
                    best = Some(Split {
                        feature: f,
                        threshold,
                        gain,
                        n_left,
                    });
                }
            }
        }
        best.filter(|s| s.gain > 1e-12 * self.scale)
    }

    fn grow(&mut self, lo: usize, hi: usize, depth: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { value: 0.0, region: 0 });
        let rows = &self.orders[0][lo..hi];
        let sum: f64 = rows.iter().map(|&r| self.y[r as usize]).sum();
        let m = (hi - lo) as f64;
        let sse: f64 = rows.iter().map(|&r| (self.y[r as usize] - sum / m).powi(2)).sum();
        let can_split = self.config.max_depth.is_none_or(|d| depth < d) && sse > 0.0;
        let split = if can_split { self.best_split(lo, hi, sum) } else { None };
        let Some(split) = split else {
            self.nodes[id] = Node::Leaf {
                value: sum / m,
                region: self.regions,
            };
            self.regions += 1;
            return id;
        };
        let col = &self.data.columns[split.feature];
        for &r in &self.orders[split.feature][lo..hi] {
            self.goes_left[r as usize] = col[r as usize] <= split.threshold;
        }
        let mid = lo + split.n_left;
        for f in 0..self.orders.len() {
            let seg = &mut self.orders[f][lo..hi];
            self.scratch.clear();
            let mut w = 0;
            for k in 0..seg.len() {
                let r = seg[k];
                if self.goes_left[r as usize] {
                    seg[w] = r;
                    w += 1;
                } else {
                    self.scratch.push(r);
                }
            }
            debug_assert_eq!(w, split.n_left);
            seg[w..].copy_from_slice(&self.scratch);
        }
        let left = self.grow(lo, mid, depth + 1);
        let right = self.grow(mid, hi, depth + 1);
        self.nodes[id] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
            gain: split.gain,
        };
        id
    }
}

/// Grows a tree on the rows with positive multiplicity in `counts` (all rows
/// once when `None`). `rng` drives feature subsampling when `mtry` is set.
pub fn grow_tree(
    data: &Presorted,
    y: &[f64],
    counts: Option<&[u32]>,
    config: &TreeConfig,
    rng: Option<&mut Rng>,
) -> Tree {
    let orders: Vec<Vec<u32>> = data
        .orders
        .iter()
        .map(|o| match counts {
            None => o.clone(),
            Some(c) => o
                .iter()
                .flat_map(|&r| std::iter::repeat_n(r, c[r as usize] as usize))
                .collect(),
        })
        .collect();
    let m = orders.first().map_or(0, Vec::len);
    let mean = orders[0].iter().map(|&r| y[r as usize]).sum::<f64>() / m.max(1) as f64;
    let scale = orders[0]
        .iter()
        .map(|&r| (y[r as usize] - mean).powi(2))
        .sum::<f64>()
        .max(f64::MIN_POSITIVE);
    let mut g = Grower {
        data,
        y,
        config,
        rng,
        orders,
        scratch: Vec::with_capacity(m),
        goes_left: vec![false; data.n_rows()],
        scale,
        nodes: Vec::new(),
        regions: 0,
    };
    if m > 0 {
        g.grow(0, m, 0);
    }
    Tree { nodes: g.nodes }
}

/// A single fitted tree with the names of the features it splits on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub task: Task,
    pub features: Vec<String>,
    pub tree: Tree,
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
}

impl TreeModel {
    pub fn predict_columns(&self, columns: &[Vec<f64>]) -> Vec<f64> {
        let n = columns.first().map_or(0, Vec::len);
        (0..n).map(|i| self.tree.predict(columns, i)).collect()
    }
}

/// CART on the given feature columns.
pub fn fit_tree(
    features: Vec<String>,
    columns: &[Vec<f64>],
    y: &[f64],
    task: Task,
    max_depth: Option<usize>,
    min_leaf: usize,
) -> TreeModel {
    let data = Presorted::new(columns);
    let config = TreeConfig {
        max_depth,
        min_leaf,
        mtry: None,
    };
    let tree = grow_tree(&data, y, None, &config, None);
    TreeModel {
        task,
        features,
        tree,
        max_depth,
        min_leaf,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_function_needs_one_split() {
        let x: Vec<f64> = (0..20).map(|i| i as f64 / 19.0).collect();
        let y: Vec<f64> = x.iter().map(|&v| if v <= 0.5 { 1.0 } else { 3.0 }).collect();
        let m = fit_tree(vec!["x".into()], std::slice::from_ref(&x), &y, Task::Regression, None, 1);
        assert_eq!(m.tree.depth(), 1);
        match m.tree.nodes[0] {
            Node::Split { threshold, .. } => assert!((threshold - 0.5).abs() < 1.0 / 19.0),
            _ => panic!(),
        }
        assert_eq!(m.predict_columns(&[x]), y);
    }

    #[test]
    fn constant_target_is_a_single_leaf() {
        let x: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let m = fit_tree(vec!["x".into()], &[x], &[2.5; 20], Task::Regression, None, 1);
        assert_eq!(m.tree.nodes, vec![Node::Leaf { value: 2.5, region: 0 }]);
    }

    #[test]
    fn multiplicities_match_explicit_duplication() {
        let x = vec![0.3, 0.1, 0.7, 0.5, 0.9, 0.2];
        let y = vec![1.0, 0.0, 2.0, 1.5, 3.0, 0.2];
        let counts = [2, 0, 1, 3, 1, 1];
        let data = Presorted::new(std::slice::from_ref(&x));
        let cfg = TreeConfig {
            max_depth: None,
            min_leaf: 1,
            mtry: None,
        };
        let a = grow_tree(&data, &y, Some(&counts), &cfg, None);
        let (mut xd, mut yd) = (Vec::new(), Vec::new());
        for (i, &c) in counts.iter().enumerate() {
            for _ in 0..c {
                xd.push(x[i]);
                yd.push(y[i]);
            }
        }
        let dd = [xd];
        let b = grow_tree(&Presorted::new(&dd), &yd, None, &cfg, None);
        assert_eq!(a, b);
    }
}
