use nalgebra::DMatrix;
use plam::baselines::fit_ols;
use plam::design::Term;
use plam::evaluation::*;
use plam::rng;
use plam::{Dataset, Error};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

mod oracles;
use oracles::brute_auc;

#[test]
fn mse_cases() {
    let t = [1.0, -2.0, 3.5];
    assert_eq!(mse(&t, &t).unwrap(), 0.0);
    let shifted: Vec<f64> = t.iter().map(|v| v + 1.0).collect();
    assert_eq!(mse(&shifted, &t).unwrap(), 1.0);
    assert!(matches!(mse(&t, &t[..2]), Err(EvalError::LengthMismatch { .. })));

    let mut r = rng::rng(5);
    let a: Vec<f64> = (0..10).map(|_| r.random::<f64>()).collect();
    let b: Vec<f64> = (0..10).map(|_| r.random::<f64>()).collect();
    let mut acc = 0.0;
    for i in 0..10 {
        acc += (a[i] - b[i]) * (a[i] - b[i]);
    }
    assert!((mse(&a, &b).unwrap() - acc / 10.0).abs() < 1e-12);
}

#[test]
fn auc_rank_method_matches_brute_force() {
    for inst in 0..50u64 {
        let mut r = rng::rng(inst);
        let n = r.random_range(4..200);
        let mut labels: Vec<f64> = (0..n).map(|_| f64::from(r.random_bool(0.4) as u8)).collect();
        labels[0] = 1.0;
        labels[1] = 0.0;
        // Coarse rounding creates ties; some scores fall outside [0, 1].
        let scores: Vec<f64> = (0..n)
            .map(|i| ((labels[i] * 0.3 + r.random::<f64>() * 1.2 - 0.1) * 10.0).round() / 10.0)
            .collect();
        let fast = auc(&scores, &labels).unwrap();
        assert!((fast - brute_auc(&scores, &labels)).abs() < 1e-12, "instance {inst}");
    }
}

#[test]
fn auc_trivial_cases() {
    let labels = [0.0, 0.0, 1.0, 1.0];
    assert_eq!(auc(&[0.1, 0.2, 0.8, 0.9], &labels).unwrap(), 1.0);
    assert_eq!(auc(&[0.9, 0.8, 0.2, 0.1], &labels).unwrap(), 0.0);
    assert!(matches!(auc(&[0.1, 0.2], &[1.0, 1.0]), Err(EvalError::SingleClass)));
    assert!(auc(&[0.1, 0.2], &[1.0, 2.0]).is_err());
}

#[test]
fn auc_of_uninformative_scores_is_one_half() {
    let mut r = rng::rng(11);
    let n = 10_000;
    let labels: Vec<f64> = (0..n).map(|_| f64::from(r.random_bool(0.5) as u8)).collect();
    let scores: Vec<f64> = (0..n).map(|_| r.random::<f64>()).collect();
    assert!((auc(&scores, &labels).unwrap() - 0.5).abs() < 0.02);
}

proptest! {
    #[test]
    fn auc_invariant_to_monotone_transform(raw in prop::collection::vec(0.0f64..1.0, 6..60), seed in 0u64..1000) {
        let mut r = rng::rng(seed);
        let mut labels: Vec<f64> = raw.iter().map(|_| f64::from(r.random_bool(0.5) as u8)).collect();
        labels[0] = 0.0;
        labels[1] = 1.0;
        let squashed: Vec<f64> = raw.iter().map(|v| v * v * v).collect();
        let a = auc(&raw, &labels).unwrap();
        prop_assert!((a - auc(&squashed, &labels).unwrap()).abs() < 1e-12);
        let t = auc_test(&raw, &squashed, &labels).unwrap();
        prop_assert_eq!(t.auc1, t.auc2);
        prop_assert_eq!(t.p_value, 1.0);
    }

    #[test]
    fn auc_test_is_antisymmetric(seed in 0u64..500) {
        let mut r = rng::rng(seed);
        let n = 80;
        let labels: Vec<f64> = (0..n).map(|i| f64::from((i % 2) as u8)).collect();
        let s1: Vec<f64> = labels.iter().map(|l| (0.2 * l + r.random::<f64>()).min(1.0)).collect();
        let s2: Vec<f64> = labels.iter().map(|l| (0.1 * l + r.random::<f64>()).min(1.0)).collect();
        let ab = auc_test(&s1, &s2, &labels).unwrap();
        let ba = auc_test(&s2, &s1, &labels).unwrap();
        prop_assert!((ab.z + ba.z).abs() < 1e-12);
        prop_assert!((ab.p_value - ba.p_value).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&ab.p_value));
    }
}

#[test]
fn auc_test_identical_scores() {
    let labels = [0.0, 1.0, 0.0, 1.0, 1.0];
    let s = [0.1, 0.7, 0.3, 0.6, 0.2];
    let t = auc_test(&s, &s, &labels).unwrap();
    assert_eq!(t.z, 0.0);
    assert_eq!(t.p_value, 1.0);
}

#[test]
fn auc_test_has_nominal_size() {
    let (n, trials) = (500, 1000);
    let rejections = (0..trials)
        .filter(|&t| {
            let mut r = rng::rng(1000 + t);
            let labels: Vec<f64> = (0..n).map(|_| f64::from(r.random_bool(0.5) as u8)).collect();
            let score = |r: &mut rng::Rng, l: f64| {
                let e: f64 = r.sample(StandardNormal);
                1.0 / (1.0 + (-(0.8 * l + e)).exp())
            };
            let s1: Vec<f64> = labels.iter().map(|&l| score(&mut r, l)).collect();
            let s2: Vec<f64> = labels.iter().map(|&l| score(&mut r, l)).collect();
            auc_test(&s1, &s2, &labels).unwrap().p_value < 0.05
        })
        .count();
    let rate = rejections as f64 / trials as f64;
    assert!((0.03..=0.08).contains(&rate), "rejection rate {rate}");
}

#[test]
fn mcs_keeps_a_dominant_model_alone() {
    let seeds = 100;
    let alone = (0..seeds)
        .filter(|&s| {
            let mut r = rng::rng(500 + s);
            let n = 200;
            let losses = DMatrix::from_fn(n, 3, |_, _| 0.0);
            let mut losses = losses;
            for i in 0..n {
                let base: f64 = r.sample::<f64, _>(StandardNormal).powi(2);
                losses[(i, 0)] = base;
                losses[(i, 1)] = base + 0.5 + 0.3 * r.random::<f64>();
                losses[(i, 2)] = base + 0.4 + 0.3 * r.random::<f64>();
            }
            let res = mcs(&losses, 1000, 0.2, s).unwrap();
            res.surviving == vec![0]
        })
        .count();
    assert!(alone >= 95, "dominant model alone in {alone}/100 seeds");
}

#[test]
fn mcs_identical_columns_all_survive() {
    let mut r = rng::rng(3);
    let col: Vec<f64> = (0..50).map(|_| r.random::<f64>()).collect();
    let losses = DMatrix::from_fn(50, 4, |i, _| col[i]);
    let res = mcs(&losses, 500, 0.1, 1).unwrap();
    assert_eq!(res.surviving, vec![0, 1, 2, 3]);
    assert!(res.p_values.iter().all(|&p| p == 1.0));
}

#[test]
fn mcs_p_values_and_alpha_monotonicity() {
    let mut r = rng::rng(9);
    let n = 120;
    let losses = DMatrix::from_fn(n, 5, |_, j| {
        let e: f64 = r.sample(StandardNormal);
        (1.0 + 0.05 * j as f64 + 0.3 * e).abs()
    });
    let res = mcs(&losses, 2000, 0.1, 4).unwrap();
    let best = *res.elimination.last().unwrap();
    assert_eq!(res.p_values[best], 1.0);
    let along: Vec<f64> = res.elimination.iter().map(|&j| res.p_values[j]).collect();
    assert!(along.windows(2).all(|w| w[0] <= w[1]), "{along:?}");
    let mut prev = usize::MAX;
    for alpha in [0.01, 0.05, 0.1, 0.2, 0.5, 0.9] {
        let s = mcs(&losses, 2000, alpha, 4).unwrap().surviving;
        assert!(s.len() <= prev);
        assert!(s.contains(&best));
        prev = s.len();
    }
    assert!(matches!(mcs(&losses.columns(0, 1).into_owned(), 10, 0.1, 1), Err(EvalError::TooFewModels(1))));
}

#[test]
fn loss_matrix_csv_round_trip() {
    let names = vec!["a".to_string(), "b".to_string()];
    let m = DMatrix::from_row_slice(3, 2, &[0.1, 0.2, 1.0 / 3.0, 4.0, 5e-17, 6.0]);
    let mut buf = Vec::new();
    write_loss_csv(&mut buf, &names, &m).unwrap();
    let (n2, m2) = read_loss_csv(buf.as_slice()).unwrap();
    assert_eq!(n2, names);
    assert_eq!(m2, m);
}

fn pairs(v: &[(&str, &str)]) -> Vec<(String, String)> {
    v.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect()
}

#[test]
fn potency_and_gauge_hand_counts() {
    let relevant = pairs(&[("x1", "x6"), ("x2", "x7"), ("x3", "x8"), ("x4", "x9"), ("x5", "x10")]);
    assert_eq!(potency(&relevant, &relevant).unwrap(), 1.0);
    assert_eq!(gauge(&relevant, &relevant, 45).unwrap(), 0.0);
    assert_eq!(potency(&[], &relevant).unwrap(), 0.0);
    assert_eq!(gauge(&[], &relevant, 45).unwrap(), 0.0);
    // Order within a pair does not matter.
    let selected = pairs(&[
        ("x6", "x1"),
        ("x2", "x7"),
        ("x3", "x8"),
        ("x1", "x2"),
        ("x1", "x3"),
        ("x4", "x5"),
        ("x9", "x10"),
    ]);
    assert!((potency(&selected, &relevant).unwrap() - 0.6).abs() < 1e-15);
    assert!((gauge(&selected, &relevant, 45).unwrap() - 0.1).abs() < 1e-15);
    assert!(matches!(potency(&selected, &[]), Err(EvalError::EmptyRelevant)));
}

fn regression_data(n: usize, seed: u64) -> Dataset {
    let mut r = rng::rng(seed);
    let x: Vec<f64> = (0..n).map(|_| r.sample(StandardNormal)).collect();
    let noise: Vec<f64> = (0..n).map(|_| r.sample(StandardNormal)).collect();
    let y: Vec<f64> = x.iter().zip(&noise).map(|(a, e)| 2.0 * a + e).collect();
    Dataset::from_columns(vec!["x".into(), "y".into()], vec![x, y], Some("y")).unwrap()
}

fn mean_model(_: usize, train: &Dataset, test: &Dataset) -> Result<Vec<f64>, Error> {
    let m = train.target().iter().sum::<f64>() / train.n_rows() as f64;
    Ok(vec![m; test.n_rows()])
}

#[test]
fn cv_constant_model_predicts_training_means() {
    let data = regression_data(53, 1);
    let cv = kfold_cv(&data, 10, 7, "mean", mean_model).unwrap();
    let mut sizes = [0usize; 10];
    for &f in &cv.folds {
        sizes[f] += 1;
    }
    assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    for i in 0..data.n_rows() {
        let train: Vec<f64> = (0..data.n_rows())
            .filter(|&j| cv.folds[j] != cv.folds[i])
            .map(|j| data.target()[j])
            .collect();
        let m = train.iter().sum::<f64>() / train.len() as f64;
        assert!((cv.predictions[i] - m).abs() < 1e-12);
    }
}

#[test]
fn cv_is_deterministic_and_csv_stable() {
    let data = regression_data(60, 2);
    let a = kfold_cv(&data, 10, 99, "mean", mean_model).unwrap();
    let b = kfold_cv(&data, 10, 99, "mean", mean_model).unwrap();
    let (mut ba, mut bb) = (Vec::new(), Vec::new());
    a.write_csv(&mut ba).unwrap();
    b.write_csv(&mut bb).unwrap();
    assert_eq!(ba, bb);
    let back = CvPredictions::read_csv(ba.as_slice(), 10, 99, "mean").unwrap();
    assert_eq!(back, a);
    assert_ne!(fold_assignment(60, 10, 99), fold_assignment(60, 10, 100));
}

#[test]
fn cv_leakage_canary() {
    let data = regression_data(200, 3);
    let x = data.column(0).to_vec();
    let y = data.target().to_vec();
    let mut r = rng::rng(4);
    let mut shuffled = y.clone();
    use rand::seq::SliceRandom;
    shuffled.shuffle(&mut r);
    let with = |extra: Vec<f64>| {
        Dataset::from_columns(
            vec!["x".into(), "leak".into(), "y".into()],
            vec![x.clone(), extra, y.clone()],
            Some("y"),
        )
        .unwrap()
    };
    let ols = |_: usize, train: &Dataset, test: &Dataset| -> Result<Vec<f64>, Error> {
        let m = fit_ols(train, &[Term::var("x"), Term::var("leak")], false)?;
        Ok(m.predict(test)?)
    };
    let leaky = with(y.clone());
    let cv = kfold_cv(&leaky, 10, 1, "ols", ols).unwrap();
    assert!(mse(&cv.predictions, &y).unwrap() < 1e-12);
    let canary = with(shuffled);
    let cv = kfold_cv(&canary, 10, 1, "ols", ols).unwrap();
    assert!(mse(&cv.predictions, &y).unwrap() > 0.8);
}

#[test]
fn cv_with_k_equal_n_is_leave_one_out() {
    let data = regression_data(20, 5);
    let cv = kfold_cv(&data, 10, 1, "mean", mean_model);
    assert!(cv.is_ok());
    let n = data.n_rows();
    let folds: Vec<usize> = (0..n).collect();
    let loo = cv_with_folds(&data, &folds, n, 0, "mean", mean_model).unwrap();
    let total: f64 = data.target().iter().sum();
    for i in 0..n {
        let expect = (total - data.target()[i]) / (n - 1) as f64;
        assert!((loo.predictions[i] - expect).abs() < 1e-12);
    }
}

#[test]
fn cv_errors_carry_the_fold() {
    let data = regression_data(40, 6);
    let failing = |f: usize, _: &Dataset, test: &Dataset| -> Result<Vec<f64>, Error> {
        if f == 3 {
            Err(Error::Config("boom".into()))
        } else {
            Ok(vec![0.0; test.n_rows()])
        }
    };
    match kfold_cv(&data, 5, 1, "x", failing) {
        Err(Error::Fold { fold: 3, .. }) => {}
        other => panic!("unexpected {other:?}"),
    }
    assert!(matches!(
        kfold_cv(&data, 30, 1, "x", mean_model),
        Err(Error::Evaluation(EvalError::TooFewRows { .. }))
    ));
}
