use nalgebra::DMatrix;
use plam::evaluation::{auc, auc_test, cv_with_folds, fold_assignment, mcs, mse, write_loss_csv, EvalError};
use plam::models::fit_model;
use plam::persist::write_atomic;
use plam::{rng, Error};
use serde::Serialize;

use crate::args::EvaluateArgs;
use crate::output::{load_data, resolve_models, write_json, RunConfig};

#[derive(Debug, Serialize)]
struct ModelScore {
    model: String,
    mse: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    auc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mcs_p_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    in_mcs: Option<bool>,
}

#[derive(Debug, Serialize)]
struct McsSummary {
    alpha: f64,
    bootstrap: usize,
    surviving: Vec<String>,
    elimination: Vec<String>,
}

#[derive(Debug, Serialize)]
struct Report {
    config: RunConfig,
    fold_sizes: Vec<usize>,
    scores: Vec<ModelScore>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mcs: Option<McsSummary>,
    /// Two-sided p-values of pairwise AUC equality tests.
    #[serde(skip_serializing_if = "Option::is_none")]
    auc_p_values: Option<Vec<Vec<f64>>>,
}

pub fn run(args: EvaluateArgs) -> Result<(), Error> {
    let models = resolve_models(&args.models, args.tuning.as_deref())?;
    if !(args.mcs_alpha > 0.0 && args.mcs_alpha < 1.0) {
        return Err(Error::Config(format!("--mcs-alpha must lie in (0, 1), got {}", args.mcs_alpha)));
    }
    let (data, kinds) = load_data(&args.data.data, &args.data.target, args.data.kinds.as_deref())?;
    let n = data.n_rows();
    if args.k < 2 || n < 2 * args.k {
        return Err(EvalError::TooFewRows { n, k: args.k }.into());
    }
    let folds = fold_assignment(n, args.k, args.seed);
    let y = data.target().to_vec();
    let binary = data.target_is_binary();

    let mut predictions = Vec::with_capacity(models.len());
    for spec in &models {
        let label = spec.to_string();
        eprintln!("evaluating {label}");
        let cv = cv_with_folds(&data, &folds, args.k, args.seed, &label, |fold, train, test| {
            fit_model(spec, train, rng::derive(args.seed, fold as u64))?.predict(test)
        })?;
        predictions.push(cv.predictions);
    }

    let m = models.len();
    let losses = DMatrix::from_fn(n, m, |i, j| (predictions[j][i] - y[i]).powi(2));
    let names: Vec<String> = models.iter().map(ToString::to_string).collect();
    let mut scores: Vec<ModelScore> = names
        .iter()
        .zip(&predictions)
        .map(|(name, p)| {
            Ok(ModelScore {
                model: name.clone(),
                mse: mse(p, &y)?,
                auc: if binary { Some(auc(p, &y)?) } else { None },
                mcs_p_value: None,
                in_mcs: None,
            })
        })
        .collect::<Result<_, EvalError>>()?;

    let mut mcs_summary = None;
    let mut auc_p = None;
    if binary {
        let mut p = vec![vec![1.0; m]; m];
        for a in 0..m {
            for b in a + 1..m {
                let t = auc_test(&predictions[a], &predictions[b], &y)?;
                p[a][b] = t.p_value;
                p[b][a] = t.p_value;
            }
        }
        auc_p = Some(p);
    } else if m >= 2 {
        let res = mcs(&losses, args.bootstrap, args.mcs_alpha, rng::derive(args.seed, rng::stream::BOOTSTRAP))?;
        for (j, s) in scores.iter_mut().enumerate() {
            s.mcs_p_value = Some(res.p_values[j]);
            s.in_mcs = Some(res.surviving.contains(&j));
        }
        mcs_summary = Some(McsSummary {
            alpha: res.alpha,
            bootstrap: res.bootstrap,
            surviving: res.surviving.iter().map(|&j| names[j].clone()).collect(),
            elimination: res.elimination.iter().map(|&j| names[j].clone()).collect(),
        });
    }

    print_table(&scores, auc_p.as_deref());

    let mut config = RunConfig::new("evaluate", args.seed);
    config.data = Some(args.data.data.clone());
    config.target = Some(args.data.target.clone());
    config.kinds = kinds;
    config.models = models;
    config.tuning = args.tuning.clone();
    config.k = Some(args.k);
    if let Some(path) = &args.losses {
        let mut buf = config.csv_comment()?.into_bytes();
        write_loss_csv(&mut buf, &names, &losses)?;
        write_atomic(path, &buf)?;
    }
    let report = Report {
        config,
        fold_sizes: (0..args.k).map(|f| folds.iter().filter(|&&g| g == f).count()).collect(),
        scores,
        mcs: mcs_summary,
        auc_p_values: auc_p,
    };
    if let Some(path) = &args.out {
        write_json(path, &report)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn print_table(scores: &[ModelScore], auc_p: Option<&[Vec<f64>]>) {
    let width = scores.iter().map(|s| s.model.len()).max().unwrap_or(5).max(5);
    match auc_p {
        Some(p) => {
            println!("{:<width$} | {:>8} | {:>8}", "Model", "AUC", "MSE");
            for s in scores {
                println!("{:<width$} | {:>8.4} | {:>8.4}", s.model, s.auc.unwrap_or(f64::NAN), s.mse);
            }
            println!();
            println!("pairwise AUC test p-values");
            for (s, row) in scores.iter().zip(p) {
                let cells: Vec<String> = row.iter().map(|v| format!("{v:>7.4}")).collect();
                println!("{:<width$} | {}", s.model, cells.join(" "));
            }
        }
        None => {
            println!("{:<width$} | {:>10} | {:>8} | in MCS", "Model", "MSE", "MCS p");
            for s in scores {
                let p = s.mcs_p_value.map_or("-".to_string(), |p| format!("{p:.4}"));
                let inside = s.in_mcs.map_or("-", |b| if b { "yes" } else { "no" });
                println!("{:<width$} | {:>10.4} | {:>8} | {}", s.model, s.mse, p, inside);
            }
        }
    }
}
