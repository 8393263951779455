//! Out-of-sample evaluation: k-fold cross-validation, MSE, AUC and the
//! DeLong comparison of correlated AUCs, the model confidence set, and
//! potency/gauge of interaction selection.

use std::collections::BTreeSet;
use std::io::{Read, Write};

use nalgebra::DMatrix;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::data::Dataset;
use crate::error::Error;
use crate::rng::{self, stream};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("both classes must be present")]
    SingleClass,
    #[error("labels must be 0 or 1")]
    NonBinaryLabel,
    #[error("potency is undefined without relevant candidates")]
    EmptyRelevant,
    #[error("{n} rows are too few for {k} folds")]
    TooFewRows { n: usize, k: usize },
    #[error("at least two models are needed, got {0}")]
    TooFewModels(usize),
    #[error("malformed CSV: {0}")]
    Csv(String),
}

impl EvalError {
    /// Errors caused by the inputs rather than by a fit.
    pub fn is_data_error(&self) -> bool {
        !matches!(self, EvalError::EmptyRelevant | EvalError::TooFewModels(_))
    }
}

fn check_len(a: usize, b: usize) -> Result<(), EvalError> {
    if a == b {
        Ok(())
    } else {
        Err(EvalError::LengthMismatch { left: a, right: b })
    }
}

pub fn mse(pred: &[f64], truth: &[f64]) -> Result<f64, EvalError> {
    check_len(pred.len(), truth.len())?;
    if pred.is_empty() {
        return Ok(0.0);
    }
    Ok(pred.iter().zip(truth).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / pred.len() as f64)
}

/// 1-based ranks with ties given their average rank.
pub fn midranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = rank;
        }
        i = j + 1;
    }
    r
}

fn split_classes(scores: &[f64], labels: &[f64]) -> Result<(Vec<f64>, Vec<f64>), EvalError> {
    check_len(scores.len(), labels.len())?;
    let (mut pos, mut neg) = (Vec::new(), Vec::new());
    for (&s, &l) in scores.iter().zip(labels) {
        let s = s.clamp(0.0, 1.0);
        if l == 1.0 {
            pos.push(s);
        } else if l == 0.0 {
            neg.push(s);
        } else {
            return Err(EvalError::NonBinaryLabel);
        }
    }
    if pos.is_empty() || neg.is_empty() {
        return Err(EvalError::SingleClass);
    }
    Ok((pos, neg))
}

/// Placement values: for each positive the share of negatives it outscores,
/// for each negative the share of positives outscoring it (ties count half).
fn placements(pos: &[f64], neg: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let (n1, n0) = (pos.len(), neg.len());
    let all: Vec<f64> = pos.iter().chain(neg).copied().collect();
    let r_all = midranks(&all);
    let r_pos = midranks(pos);
    let r_neg = midranks(neg);
    let v10 = (0..n1).map(|i| (r_all[i] - r_pos[i]) / n0 as f64).collect();
    let v01 = (0..n0).map(|j| 1.0 - (r_all[n1 + j] - r_neg[j]) / n1 as f64).collect();
    (v10, v01)
}

/// Area under the ROC curve of scores clamped to [0, 1].
pub fn auc(scores: &[f64], labels: &[f64]) -> Result<f64, EvalError> {
    let (pos, neg) = split_classes(scores, labels)?;
    let (v10, _) = placements(&pos, &neg);
    Ok(v10.iter().sum::<f64>() / pos.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AucTestResult {
    pub auc1: f64,
    pub auc2: f64,
    pub z: f64,
    pub p_value: f64,
    /// Estimated variance of `auc1 - auc2`.
    pub variance: f64,
}

fn cov(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len();
    if n < 2 {
        return 0.0;
    }
    let (ma, mb) = (crate::linalg::mean(a), crate::linalg::mean(b));
    a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (n - 1) as f64
}

/// DeLong test of equal AUCs for two score vectors on the same sample. A zero
/// variance estimate (e.g. identical rankings) yields `z = 0`, `p = 1`.
pub fn auc_test(scores1: &[f64], scores2: &[f64], labels: &[f64]) -> Result<AucTestResult, EvalError> {
    check_len(scores1.len(), scores2.len())?;
    let (p1, n1) = split_classes(scores1, labels)?;
    let (p2, n2) = split_classes(scores2, labels)?;
    let (a10, a01) = placements(&p1, &n1);
    let (b10, b01) = placements(&p2, &n2);
    let auc1 = crate::linalg::mean(&a10);
    let auc2 = crate::linalg::mean(&b10);
    let (m, k) = (p1.len() as f64, n1.len() as f64);
    let variance = (cov(&a10, &a10) + cov(&b10, &b10) - 2.0 * cov(&a10, &b10)) / m
        + (cov(&a01, &a01) + cov(&b01, &b01) - 2.0 * cov(&a01, &b01)) / k;
    let diff = auc1 - auc2;
    let (z, p_value) = if variance > 1e-300 && diff.is_finite() {
        let z = diff / variance.sqrt();
        let p = 2.0 * Normal::standard().sf(z.abs());
        (z, p.clamp(0.0, 1.0))
    } else {
        (0.0, 1.0)
    };
    Ok(AucTestResult {
        auc1,
        auc2,
        z,
        p_value,
        variance: variance.max(0.0),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvPredictions {
    pub k: usize,
    pub seed: u64,
    /// Model spec the predictions belong to.
    pub spec: String,
    pub folds: Vec<usize>,
    pub predictions: Vec<f64>,
}

/// Seeded balanced fold labels shared by every model evaluated with `seed`.
pub fn fold_assignment(n: usize, k: usize, seed: u64) -> Vec<usize> {
    rng::assign_folds(n, k, &mut rng::child(seed, stream::FOLDS))
}

/// Refits on each fold's complement and predicts the held-out rows.
/// `fit_predict(fold, train, test)` must return one prediction per test row.
pub fn kfold_cv<F>(data: &Dataset, k: usize, seed: u64, spec: &str, fit_predict: F) -> Result<CvPredictions, Error>
where
    F: Fn(usize, &Dataset, &Dataset) -> Result<Vec<f64>, Error> + Sync + Send,
{
    let n = data.n_rows();
    if k < 2 || n < 2 * k {
        return Err(EvalError::TooFewRows { n, k }.into());
    }
    let folds = fold_assignment(n, k, seed);
    cv_with_folds(data, &folds, k, seed, spec, fit_predict)
}

/// As [`kfold_cv`] with a given assignment.
pub fn cv_with_folds<F>(
    data: &Dataset,
    folds: &[usize],
    k: usize,
    seed: u64,
    spec: &str,
    fit_predict: F,
) -> Result<CvPredictions, Error>
where
    F: Fn(usize, &Dataset, &Dataset) -> Result<Vec<f64>, Error> + Sync + Send,
{
    let n = data.n_rows();
    check_len(folds.len(), n)?;
    let results = crate::par::map_indexed(k, |f| {
        let train: Vec<usize> = (0..n).filter(|&i| folds[i] != f).collect();
        let test: Vec<usize> = (0..n).filter(|&i| folds[i] == f).collect();
        let pred = fit_predict(f, &data.subset(&train), &data.subset(&test)).map_err(|e| Error::Fold {
            fold: f,
            source: Box::new(e),
        })?;
        check_len(pred.len(), test.len()).map_err(|e| Error::Fold {
            fold: f,
            source: Box::new(e.into()),
        })?;
        Ok::<_, Error>((test, pred))
    });
    let mut predictions = vec![f64::NAN; n];
    for r in results {
        let (test, pred) = r?;
        for (i, p) in test.into_iter().zip(pred) {
            predictions[i] = p;
        }
    }
    Ok(CvPredictions {
        k,
        seed,
        spec: spec.to_string(),
        folds: folds.to_vec(),
        predictions,
    })
}

impl CvPredictions {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), EvalError> {
        let mut wr = csv::Writer::from_writer(w);
        let err = |e: csv::Error| EvalError::Csv(e.to_string());
        wr.write_record(["row", "fold", "prediction"]).map_err(err)?;
        for (i, (f, p)) in self.folds.iter().zip(&self.predictions).enumerate() {
            wr.write_record([i.to_string(), f.to_string(), p.to_string()]).map_err(err)?;
        }
        wr.flush().map_err(|e| EvalError::Csv(e.to_string()))
    }

    pub fn read_csv<R: Read>(r: R, k: usize, seed: u64, spec: &str) -> Result<Self, EvalError> {
        let mut rd = csv::Reader::from_reader(r);
        let (mut folds, mut predictions) = (Vec::new(), Vec::new());
        for rec in rd.records() {
            let rec = rec.map_err(|e| EvalError::Csv(e.to_string()))?;
            let parse = |i: usize| rec.get(i).ok_or_else(|| EvalError::Csv("short record".into()));
            folds.push(parse(1)?.parse().map_err(|_| EvalError::Csv("bad fold".into()))?);
            predictions.push(parse(2)?.parse().map_err(|_| EvalError::Csv("bad prediction".into()))?);
        }
        Ok(CvPredictions {
            k,
            seed,
            spec: spec.to_string(),
            folds,
            predictions,
        })
    }
}

/// Writes an n x m loss matrix with one named column per model.
pub fn write_loss_csv<W: Write>(w: W, names: &[String], losses: &DMatrix<f64>) -> Result<(), EvalError> {
    let err = |e: csv::Error| EvalError::Csv(e.to_string());
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(names).map_err(err)?;
    for i in 0..losses.nrows() {
        wr.write_record(losses.row(i).iter().map(|v| v.to_string())).map_err(err)?;
    }
    wr.flush().map_err(|e| EvalError::Csv(e.to_string()))
}

pub fn read_loss_csv<R: Read>(r: R) -> Result<(Vec<String>, DMatrix<f64>), EvalError> {
    let mut rd = csv::Reader::from_reader(r);
    let names: Vec<String> = rd
        .headers()
        .map_err(|e| EvalError::Csv(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(|e| EvalError::Csv(e.to_string()))?;
        let row: Result<Vec<f64>, _> = rec.iter().map(|v| v.trim().parse::<f64>()).collect();
        let row = row.map_err(|_| EvalError::Csv(format!("non-numeric loss on line {}", rows.len() + 2)))?;
        check_len(row.len(), names.len())?;
        rows.push(row);
    }
    let m = DMatrix::from_fn(rows.len(), names.len(), |i, j| rows[i][j]);
    Ok((names, m))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McsResult {
    /// Model indices retained at `alpha`, ascending.
    pub surviving: Vec<usize>,
    /// Model indices in the order they were eliminated; the last entry is
    /// the final survivor.
    pub elimination: Vec<usize>,
    /// MCS p-value per model (by model index).
    pub p_values: Vec<f64>,
    pub alpha: f64,
    pub bootstrap: usize,
    pub block: usize,
}

/// Model confidence set with the T_max statistic and an iid (block length
/// one) bootstrap of the row means. Each elimination step tests equal
/// predictive ability of the remaining set and drops the model with the
/// largest standardized excess loss; a model's p-value is the largest test
/// p-value up to its elimination.
pub fn mcs(losses: &DMatrix<f64>, b: usize, alpha: f64, seed: u64) -> Result<McsResult, EvalError> {
    let (n, m) = losses.shape();
    if m < 2 {
        return Err(EvalError::TooFewModels(m));
    }
    if n < 2 {
        return Err(EvalError::TooFewRows { n, k: 1 });
    }
    let means: Vec<f64> = (0..m).map(|j| losses.column(j).mean()).collect();
    let base = rng::derive(seed, stream::BOOTSTRAP);
    let boot: Vec<Vec<f64>> = crate::par::map_indexed(b, |d| {
        let mut r = rng::child(base, d as u64);
        let mut s = vec![0.0; m];
        for _ in 0..n {
            let i = r.random_range(0..n);
            for (j, acc) in s.iter_mut().enumerate() {
                *acc += losses[(i, j)];
            }
        }
        s.iter().map(|v| v / n as f64).collect()
    });

    let mut alive: Vec<usize> = (0..m).collect();
    let mut p_values = vec![1.0; m];
    let mut elimination = Vec::with_capacity(m);
    let mut running = 0.0f64;
    let scale = means.iter().map(|v| v.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    while alive.len() > 1 {
        let k = alive.len() as f64;
        let avg = alive.iter().map(|&j| means[j]).sum::<f64>() / k;
        let d: Vec<f64> = alive.iter().map(|&j| means[j] - avg).collect();
        let zeta: Vec<Vec<f64>> = boot
            .iter()
            .map(|bm| {
                let bavg = alive.iter().map(|&j| bm[j]).sum::<f64>() / k;
                alive.iter().zip(&d).map(|(&j, dj)| bm[j] - bavg - dj).collect()
            })
            .collect();
        let var: Vec<f64> = (0..alive.len())
            .map(|a| zeta.iter().map(|z| z[a] * z[a]).sum::<f64>() / b.max(1) as f64)
            .collect();
        let tiny = 1e-24 * scale * scale;
        let t: Vec<f64> = d
            .iter()
            .zip(&var)
            .map(|(dj, v)| {
                if *v > tiny {
                    dj / v.sqrt()
                } else if dj.abs() > 1e-12 * scale {
                    dj.signum() * f64::INFINITY
                } else {
                    0.0
                }
            })
            .collect();
        let t_max = t.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let p = if var.iter().all(|v| *v <= tiny) && t_max <= 0.0 {
            1.0
        } else {
            let exceed = zeta
                .iter()
                .filter(|z| {
                    let tb = z
                        .iter()
                        .zip(&var)
                        .map(|(zj, v)| if *v > tiny { zj / v.sqrt() } else { 0.0 })
                        .fold(f64::NEG_INFINITY, f64::max);
                    tb >= t_max
                })
                .count();
            exceed as f64 / b.max(1) as f64
        };
        running = running.max(p);
        let worst = (0..alive.len())
            .max_by(|&x, &y| t[x].total_cmp(&t[y]).then(y.cmp(&x)))
            .expect("non-empty set");
        let model = alive.remove(worst);
        p_values[model] = running;
        elimination.push(model);
    }
    elimination.push(alive[0]);
    p_values[alive[0]] = 1.0;
    let surviving = (0..m).filter(|&j| p_values[j] >= alpha).collect();
    Ok(McsResult {
        surviving,
        elimination,
        p_values,
        alpha,
        bootstrap: b,
        block: 1,
    })
}

fn pair_set(pairs: &[(String, String)]) -> BTreeSet<(String, String)> {
    pairs
        .iter()
        .map(|(a, b)| if a <= b { (a.clone(), b.clone()) } else { (b.clone(), a.clone()) })
        .collect()
}

/// Share of relevant pairs that were selected.
pub fn potency(selected: &[(String, String)], relevant: &[(String, String)]) -> Result<f64, EvalError> {
    let rel = pair_set(relevant);
    if rel.is_empty() {
        return Err(EvalError::EmptyRelevant);
    }
    let sel = pair_set(selected);
    Ok(sel.intersection(&rel).count() as f64 / rel.len() as f64)
}

/// Share of the `s - |relevant|` irrelevant candidates that were selected.
pub fn gauge(selected: &[(String, String)], relevant: &[(String, String)], s: usize) -> Result<f64, EvalError> {
    let rel = pair_set(relevant);
    let irrelevant = s.saturating_sub(rel.len());
    if irrelevant == 0 {
        return Ok(0.0);
    }
    let sel = pair_set(selected);
    Ok(sel.difference(&rel).count() as f64 / irrelevant as f64)
}
