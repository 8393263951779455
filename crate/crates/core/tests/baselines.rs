use nalgebra::DMatrix;
use plam::baselines::linear::expected_columns;
use plam::baselines::tree::{grow_tree, Node, Presorted};
use plam::baselines::{
    augment, fit_gradient_boosting, fit_ols, fit_ols_matrix, fit_pltr, fit_random_forest, fit_tree,
    BoostingConfig, ForestConfig, PltrConfig, Task, TreeConfig,
};
use plam::data::{ColumnKind, Dataset};
use plam::design::Term;
use plam::rng;
use rand::Rng;
use rand_distr::StandardNormal;

mod oracles;
use oracles::brute_split;

fn dataset(xs: Vec<Vec<f64>>, y: Vec<f64>) -> Dataset {
    let mut names: Vec<String> = (1..=xs.len()).map(|j| format!("x{j}")).collect();
    names.push("y".into());
    let mut cols = xs;
    cols.push(y);
    Dataset::from_columns(names, cols, Some("y")).unwrap()
}

fn uniforms(r: &mut rng::Rng, n: usize, p: usize) -> Vec<Vec<f64>> {
    (0..p).map(|_| (0..n).map(|_| r.random_range(0.0..1.0)).collect()).collect()
}

fn normals(r: &mut rng::Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| r.sample::<f64, _>(StandardNormal)).collect()
}

#[test]
fn augmented_column_counts() {
    let mut r = rng::rng(1);
    let d = dataset(uniforms(&mut r, 40, 10), normals(&mut r, 40));
    assert_eq!(augment(&d, 3, true).len(), 75);
    assert_eq!(expected_columns(&d, 3, true), 75);

    let plain = augment(&d, 1, false);
    let names: Vec<String> = (1..=10).map(|j| format!("x{j}")).collect();
    assert_eq!(plain.terms, names.iter().map(|n| Term::var(n)).collect::<Vec<_>>());
    let m = plain.matrix(&d).unwrap();
    for j in 0..10 {
        assert_eq!(m.column(j).as_slice(), d.column(j));
    }

    let mut xs = uniforms(&mut r, 40, 3);
    xs[1] = (0..40).map(|i| (i % 2) as f64).collect();
    let d3 = dataset(xs, normals(&mut r, 40));
    assert_eq!(d3.kind(1), ColumnKind::Binary);
    let aug = augment(&d3, 3, true);
    // 2 continuous * 3 powers + 1 binary + 3 pairs
    assert_eq!(aug.len(), 10);
    assert_eq!(expected_columns(&d3, 3, true), 10);
    assert!(!aug.terms.iter().any(|t| t.factors.iter().any(|f| f.column == "x2" && f.power > 1)));
    assert!(aug.terms.contains(&Term::pair("x1", "x2")));
}

#[test]
fn ols_exact_line_and_pinned_duplicate() {
    let x: Vec<f64> = (0..10).map(|i| i as f64 * 0.7 - 1.0).collect();
    let y: Vec<f64> = x.iter().map(|v| 3.0 * v - 2.0).collect();
    let d = dataset(vec![x.clone(), x.clone()], y.clone());
    let single = fit_ols(&d, &[Term::var("x1")], false).unwrap();
    assert!((single.intercept + 2.0).abs() < 1e-10);
    assert!((single.coefficients[0] - 3.0).abs() < 1e-10);

    let dup = fit_ols(&d, &[Term::var("x1"), Term::var("x2")], false).unwrap();
    assert_eq!(dup.pinned, vec![Term::var("x2")]);
    assert_eq!(dup.coefficients[1], 0.0);
    let a = single.predict(&d).unwrap();
    let b = dup.predict(&d).unwrap();
    for (u, v) in a.iter().zip(&b) {
        assert!((u - v).abs() < 1e-10);
    }
}

#[test]
fn ols_matches_normal_equations() {
    let mut r = rng::rng(2);
    let x = DMatrix::from_fn(20, 5, |_, _| r.sample::<f64, _>(StandardNormal));
    let y = normals(&mut r, 20);
    let fit = fit_ols_matrix(&x, &y, false).unwrap();
    let mut design = DMatrix::from_element(20, 6, 1.0);
    design.columns_mut(1, 5).copy_from(&x);
    let xtx = design.transpose() * &design;
    let xty = design.transpose() * nalgebra::DVector::from_column_slice(&y);
    let beta = xtx.lu().solve(&xty).unwrap();
    assert!((fit.intercept - beta[0]).abs() < 1e-8);
    for j in 0..5 {
        assert!((fit.coefficients[j] - beta[j + 1]).abs() < 1e-8);
    }
    assert!(fit_ols_matrix(&x.rows(0, 5).into_owned(), &y[..5], false).is_err());
    assert!(fit_ols_matrix(&x.rows(0, 5).into_owned(), &y[..5], true).is_ok());
}

#[test]
fn tree_splits_match_brute_force() {
    for seed in 0..30 {
        let mut r = rng::rng(100 + seed);
        let cols = uniforms(&mut r, 30, 3);
        let y: Vec<f64> = (0..30)
            .map(|i| (cols[0][i] > 0.4) as u8 as f64 * 2.0 + cols[1][i] + 0.3 * r.sample::<f64, _>(StandardNormal))
            .collect();
        let m = fit_tree(vec!["a".into(), "b".into(), "c".into()], &cols, &y, Task::Regression, Some(2), 2);
        let all: Vec<usize> = (0..30).collect();
        let mut stack = vec![(0usize, all)];
        while let Some((id, rows)) = stack.pop() {
            let Node::Split { feature, threshold, left, right, .. } = m.tree.nodes[id] else {
                continue;
            };
            let (sse, f, t) = brute_split(&cols, &y, &rows, 2).unwrap();
            let (l, rr): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| cols[feature][i] <= threshold);
            let sse_of = |rs: &[usize]| {
                let mu = rs.iter().map(|&i| y[i]).sum::<f64>() / rs.len() as f64;
                rs.iter().map(|&i| (y[i] - mu).powi(2)).sum::<f64>()
            };
            let got = sse_of(&l) + sse_of(&rr);
            assert!((got - sse).abs() < 1e-9, "seed {seed}: {got} vs {sse}");
            assert_eq!((feature, threshold), (f, t), "seed {seed}");
            stack.push((left, l));
            stack.push((right, rr));
        }
    }
}

#[test]
fn leaves_partition_and_hold_means() {
    let mut r = rng::rng(3);
    let cols = uniforms(&mut r, 200, 4);
    let y = normals(&mut r, 200);
    let m = fit_tree(vec!["a".into(), "b".into(), "c".into(), "d".into()], &cols, &y, Task::Regression, Some(4), 5);
    let leaves = m.tree.n_leaves();
    let mut sums = vec![(0.0, 0usize); leaves];
    for i in 0..200 {
        let reg = m.tree.region_with(&|f| cols[f][i]);
        sums[reg].0 += y[i];
        sums[reg].1 += 1;
    }
    for i in 0..200 {
        let reg = m.tree.region_with(&|f| cols[f][i]);
        let mean = sums[reg].0 / sums[reg].1 as f64;
        assert!((m.tree.predict(&cols, i) - mean).abs() < 1e-12);
        assert!(sums[reg].1 >= 5);
    }
}

#[test]
fn single_tree_forest_is_cart() {
    let mut r = rng::rng(4);
    let cols = uniforms(&mut r, 100, 3);
    let y: Vec<f64> = (0..100).map(|i| cols[0][i].sin() + cols[2][i]).collect();
    let names = vec!["a".to_string(), "b".into(), "c".into()];
    let cfg = ForestConfig {
        trees: 1,
        mtry: Some(3),
        min_leaf: 5,
        max_depth: None,
        bootstrap: false,
    };
    let forest = fit_random_forest(names.clone(), &cols, &y, Task::Regression, &cfg, 9);
    let tree = fit_tree(names, &cols, &y, Task::Regression, None, 5);
    assert_eq!(forest.trees[0], tree.tree);
    assert_eq!(forest.predict_columns(&cols), tree.predict_columns(&cols));
}

#[test]
fn forest_prediction_is_tree_average() {
    let mut r = rng::rng(5);
    let cols = uniforms(&mut r, 150, 4);
    let y: Vec<f64> = (0..150).map(|i| 2.0 * cols[0][i] + r.sample::<f64, _>(StandardNormal)).collect();
    let names: Vec<String> = (0..4).map(|j| format!("v{j}")).collect();
    let cfg = ForestConfig {
        trees: 25,
        ..ForestConfig::default()
    };
    let forest = fit_random_forest(names, &cols, &y, Task::Regression, &cfg, 11);
    let pts = uniforms(&mut r, 10, 4);
    let pred = forest.predict_columns(&pts);
    for i in 0..10 {
        let mean = forest.trees.iter().map(|t| t.predict(&pts, i)).sum::<f64>() / 25.0;
        assert!((pred[i] - mean).abs() < 1e-12);
    }
    // same seed, same forest
    let again = fit_random_forest(forest.features.clone(), &cols, &y, Task::Regression, &cfg, 11);
    assert_eq!(again, forest);
}

#[test]
fn one_stage_boosting_is_a_tree_on_centred_target() {
    let mut r = rng::rng(6);
    let cols = uniforms(&mut r, 120, 2);
    let y: Vec<f64> = (0..120).map(|i| (3.0 * cols[0][i]).cos() + 0.2 * r.sample::<f64, _>(StandardNormal)).collect();
    let names = vec!["a".to_string(), "b".into()];
    let cfg = BoostingConfig {
        trees: 1,
        learning_rate: 1.0,
        max_depth: 3,
        min_leaf: 1,
        validation_fraction: 0.0,
        patience: 10,
    };
    let b = fit_gradient_boosting(names.clone(), &cols, &y, Task::Regression, &cfg, 1);
    let ybar = y.iter().sum::<f64>() / 120.0;
    let centred: Vec<f64> = y.iter().map(|v| v - ybar).collect();
    let t = fit_tree(names, &cols, &centred, Task::Regression, Some(3), 1);
    let tp = t.predict_columns(&cols);
    for (i, p) in b.predict_columns(&cols).into_iter().enumerate() {
        assert!((p - ybar - tp[i]).abs() < 1e-12);
    }
}

#[test]
fn boosting_training_loss_never_increases() {
    let mut r = rng::rng(7);
    let cols = uniforms(&mut r, 300, 3);
    let y: Vec<f64> = (0..300).map(|i| cols[0][i] * cols[1][i] * 4.0 + r.sample::<f64, _>(StandardNormal)).collect();
    let names: Vec<String> = (0..3).map(|j| format!("v{j}")).collect();
    let cfg = BoostingConfig {
        trees: 200,
        ..BoostingConfig::default()
    };
    let b = fit_gradient_boosting(names.clone(), &cols, &y, Task::Regression, &cfg, 3);
    assert_eq!(b.train_loss.len(), b.trees.len() + 1);
    for w in b.train_loss.windows(2) {
        assert!(w[1] <= w[0] + 1e-12);
    }
    let yb: Vec<f64> = y.iter().map(|v| (*v > 1.0) as u8 as f64).collect();
    let c = fit_gradient_boosting(names, &cols, &yb, Task::Classification, &cfg, 3);
    for w in c.train_loss.windows(2) {
        assert!(w[1] <= w[0] + 1e-12);
    }
    assert!(c.predict_columns(&cols).iter().all(|p| (0.0..=1.0).contains(p)));
}

#[test]
fn importance_concentrates_on_the_signal() {
    let mut r = rng::rng(8);
    let cols = uniforms(&mut r, 300, 4);
    let y: Vec<f64> = (0..300).map(|i| 5.0 * cols[2][i] + 0.1 * r.sample::<f64, _>(StandardNormal)).collect();
    let names: Vec<String> = (0..4).map(|j| format!("v{j}")).collect();
    let cfg = ForestConfig {
        trees: 50,
        ..ForestConfig::default()
    };
    let f = fit_random_forest(names, &cols, &y, Task::Regression, &cfg, 1);
    let imp = f.variable_importance();
    assert_eq!(imp[0].0, "v2");
    assert!(imp[0].1 > 0.9);
    assert!((imp.iter().map(|v| v.1).sum::<f64>() - 1.0).abs() < 1e-9);
    for w in imp.windows(2) {
        assert!(w[0].1 >= w[1].1);
    }
}

#[test]
fn symmetric_variables_share_importance() {
    let names: Vec<String> = vec!["a".into(), "b".into()];
    let cfg = ForestConfig {
        trees: 30,
        ..ForestConfig::default()
    };
    let mut share_a = 0.0;
    for seed in 0..50 {
        let mut r = rng::rng(500 + seed);
        let cols = uniforms(&mut r, 200, 2);
        let y: Vec<f64> = (0..200).map(|i| cols[0][i] + cols[1][i] + 0.1 * r.sample::<f64, _>(StandardNormal)).collect();
        let f = fit_random_forest(names.clone(), &cols, &y, Task::Regression, &cfg, seed);
        share_a += f.variable_importance().iter().find(|v| v.0 == "a").unwrap().1;
    }
    let mean = share_a / 50.0;
    assert!((0.35..=0.65).contains(&mean), "{mean}");
    assert!((0.35..=0.65).contains(&(1.0 - mean)));
}

#[test]
fn bootstrap_multiplicities_come_from_the_seed() {
    let mut r = rng::rng(9);
    let cols = uniforms(&mut r, 50, 2);
    let y = normals(&mut r, 50);
    let data = Presorted::new(&cols);
    let cfg = TreeConfig {
        max_depth: Some(3),
        min_leaf: 2,
        mtry: Some(1),
    };
    let a = grow_tree(&data, &y, None, &cfg, Some(&mut rng::rng(1)));
    let b = grow_tree(&data, &y, None, &cfg, Some(&mut rng::rng(1)));
    assert_eq!(a, b);
}

#[test]
fn pltr_separates_a_threshold_and_skips_constants() {
    let mut r = rng::rng(10);
    let n = 200;
    let mut xs = uniforms(&mut r, n, 3);
    xs[2] = vec![1.0; n];
    let y: Vec<f64> = xs[0].iter().map(|&v| (v > 0.6) as u8 as f64).collect();
    let mut d = dataset(xs, y.clone());
    d.set_kind(2, ColumnKind::Continuous).ok();
    let m = fit_pltr(&d, &PltrConfig::default(), 1).unwrap();
    assert!(m.indicators.iter().all(|ind| ind.conditions.iter().all(|c| c.feature != "x3")));
    // the x1/x2 tree stops after the perfect first split, so no deep leaf
    assert_eq!(m.indicators.len(), 2);
    assert!(m.warnings.iter().any(|w| w.contains("`x1`/`x2`")));
    assert_eq!(m.n_univariate, 2);
    let x = m.design(&d).unwrap();
    for j in m.features.len()..x.ncols() {
        assert!(x.column(j).iter().all(|&v| v == 0.0 || v == 1.0));
    }
    let p = m.predict(&d).unwrap();
    let (mut conc, mut pairs) = (0.0, 0.0);
    for i in 0..n {
        for k in 0..n {
            if y[i] == 1.0 && y[k] == 0.0 {
                pairs += 1.0;
                conc += if p[i] > p[k] { 1.0 } else if p[i] == p[k] { 0.5 } else { 0.0 };
            }
        }
    }
    assert_eq!(conc / pairs, 1.0);
}

#[test]
fn pltr_needs_binary_target() {
    let mut r = rng::rng(11);
    let d = dataset(uniforms(&mut r, 50, 2), normals(&mut r, 50));
    assert!(fit_pltr(&d, &PltrConfig::default(), 1).is_err());
}
