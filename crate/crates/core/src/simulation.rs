//! Monte Carlo designs: covariates, generating functions, coefficient
//! calibration by non-centrality, and replication sweeps.
//!
//! Every design has `p` covariates of which the first `q` carry an additive
//! effect `g_j(x_j)` and the pairs `(x_j, x_{j+q})` carry a linear interaction
//! `gamma_j x_j x_{j+q}`:
//!
//! ```text
//! y = sum_{j<=q} g_j(x_j) + sum_{j<=q} gamma_j x_j x_{j+q} + eps
//! ```
//!
//! Setups 1 and 3 make `x_{j+q}` depend on `x_j` through
//! `x_{j+q} = -g_j(x_j) / x_j + u`, so that the relevant products are nearly
//! collinear with the additive part. Setups 3 and 4 replace `g_j(x_j)` in `y`
//! by `beta_j x_j`.

use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Dataset;
use crate::evaluation::{gauge, mse, potency};
use crate::linalg;
use crate::models::{fit_model, ModelSpec};
use crate::rng::{self, stream, Rng};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimulationError {
    #[error("estimated E(W'W) is ill-conditioned (condition number {0:.3e})")]
    SingularGram(f64),
    #[error("invalid design: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DgpConfig {
    /// 1 nonlinear+correlated, 2 nonlinear+uncorrelated, 3 linear+correlated,
    /// 4 linear+uncorrelated.
    pub setup: u8,
    pub p: usize,
    pub q: usize,
    pub n_in: usize,
    pub n_out: usize,
    pub noise_sd: f64,
    /// Variance of `u` in the dependence equation.
    pub u_variance: f64,
    /// Target non-centrality of each relevant coefficient.
    pub xi: f64,
    pub calibration_rows: usize,
    pub seed: u64,
}

impl Default for DgpConfig {
    fn default() -> Self {
        DgpConfig {
            setup: 1,
            p: 10,
            q: 5,
            n_in: 1000,
            n_out: 1000,
            noise_sd: 1.0,
            u_variance: 0.4,
            xi: 6.0,
            calibration_rows: 1_000_000,
            seed: 42,
        }
    }
}

impl DgpConfig {
    pub fn setup(setup: u8) -> Self {
        DgpConfig {
            setup,
            ..DgpConfig::default()
        }
    }

    pub fn correlated(&self) -> bool {
        matches!(self.setup, 1 | 3)
    }

    pub fn linear(&self) -> bool {
        matches!(self.setup, 3 | 4)
    }

    pub fn validate(&self) -> Result<(), SimulationError> {
        let bad = |m: &str| Err(SimulationError::Invalid(m.to_string()));
        if !(1..=4).contains(&self.setup) {
            return bad("setup must be 1, 2, 3 or 4");
        }
        if self.q == 0 || self.q > 5 {
            return bad("q must be between 1 and 5");
        }
        if self.p < 2 * self.q {
            return bad("p must be at least 2q");
        }
        if self.n_in < 2 || self.n_out == 0 || self.calibration_rows < self.n_in {
            return bad("sample sizes must be positive and calibration_rows >= n_in");
        }
        if !(self.noise_sd > 0.0 && self.u_variance >= 0.0 && self.xi.is_finite()) {
            return bad("noise scales must be positive");
        }
        Ok(())
    }

    /// Number of candidate interactions, `p(p-1)/2`.
    pub fn n_interactions(&self) -> usize {
        self.p * (self.p - 1) / 2
    }
}

/// Generating function `g_j` (1-based `j`); zero beyond the fifth.
pub fn eval_g(j: usize, x: f64) -> f64 {
    match j {
        1 => (5.0 * x).sin(),
        2 => {
            if x > 0.0 {
                0.0
            } else {
                5.0 * x
            }
        }
        3 => {
            if x <= 0.0 {
                0.0
            } else {
                let s = 0.5;
                (-(x.ln()).powi(2) / (2.0 * s * s)).exp() / (x * s * (2.0 * std::f64::consts::PI).sqrt())
            }
        }
        4 => x.exp(),
        5 => (10.0 * x).atan(),
        _ => 0.0,
    }
}

/// Value substituted for `-g_j(x)/x` when `|x| < 1e-12`.
const RATIO_LIMIT: [f64; 5] = [-5.0, -5.0, 0.0, -1.0, -10.0];

fn neg_ratio(j: usize, x: f64) -> f64 {
    if x.abs() < 1e-12 {
        RATIO_LIMIT.get(j - 1).copied().unwrap_or(0.0)
    } else {
        -eval_g(j, x) / x
    }
}

/// Ground truth of one design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpTruth {
    pub setup: u8,
    pub q: usize,
    /// Relevant interactions `(x_j, x_{j+q})`.
    pub relevant: Vec<(String, String)>,
    /// Coefficients of the relevant interactions, aligned with `relevant`.
    pub gamma: Vec<f64>,
    /// Linear coefficients replacing `g_j` in setups 3 and 4; empty otherwise.
    pub beta: Vec<f64>,
    /// Condition number of the scaled `E(W'W)` estimate.
    pub condition: f64,
}

impl DgpTruth {
    /// `E(y | x)` for one covariate row (0-based columns `x1..xp`).
    pub fn mean_row(&self, x: &[f64]) -> f64 {
        let mut f = 0.0;
        for j in 0..self.q {
            f += if self.beta.is_empty() {
                eval_g(j + 1, x[j])
            } else {
                self.beta[j] * x[j]
            };
            f += self.gamma[j] * x[j] * x[j + self.q];
        }
        f
    }

    /// `E(y | x)` for every row of a generated dataset.
    pub fn mean(&self, data: &Dataset) -> Vec<f64> {
        let p = data.n_columns() - 1;
        (0..data.n_rows())
            .map(|i| {
                let row: Vec<f64> = (0..p).map(|c| data.column(c)[i]).collect();
                self.mean_row(&row)
            })
            .collect()
    }
}

fn variable(j: usize) -> String {
    format!("x{}", j + 1)
}

/// Draws `n` covariate rows as columns.
fn covariates(config: &DgpConfig, n: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
    let (p, q) = (config.p, config.q);
    let mut cols = vec![vec![0.0; n]; p];
    let u_sd = config.u_variance.sqrt();
    for i in 0..n {
        for col in cols.iter_mut() {
            col[i] = rng.sample(StandardNormal);
        }
        if config.correlated() {
            for j in 0..q {
                // The dependence equation keeps the nonlinear g_j in every
                // correlated setup.
                cols[j + q][i] = neg_ratio(j + 1, cols[j][i]) + u_sd * cols[j + q][i];
            }
        }
    }
    cols
}

/// Columns of `W`: all pairwise products in lexicographic order, then
/// `g_j(x_j)` (or `x_j` in the linear setups) for `j <= q`.
fn w_matrix(config: &DgpConfig, cols: &[Vec<f64>]) -> DMatrix<f64> {
    let n = cols[0].len();
    let p = config.p;
    let s = config.n_interactions();
    let mut w = DMatrix::zeros(n, s + config.q);
    let mut c = 0;
    for a in 0..p {
        for b in a + 1..p {
            for i in 0..n {
                w[(i, c)] = cols[a][i] * cols[b][i];
            }
            c += 1;
        }
    }
    for j in 0..config.q {
        for i in 0..n {
            w[(i, s + j)] = if config.linear() { cols[j][i] } else { eval_g(j + 1, cols[j][i]) };
        }
    }
    w
}

/// Position of pair `(a, b)`, `a < b`, in the lexicographic product order.
fn pair_index(p: usize, a: usize, b: usize) -> usize {
    a * p - a * (a + 1) / 2 + (b - a - 1)
}

/// Estimates `E(W'W)` for `n_in`-row samples as the mean of block Gram
/// matrices over a calibration super-sample.
pub fn expected_gram(config: &DgpConfig) -> Result<DMatrix<f64>, SimulationError> {
    config.validate()?;
    let blocks = config.calibration_rows / config.n_in;
    let base = rng::derive(config.seed, stream::CALIBRATION);
    let grams = crate::par::map_indexed(blocks, |b| {
        let mut r = rng::child(base, b as u64);
        let cols = covariates(config, config.n_in, &mut r);
        let w = w_matrix(config, &cols);
        w.tr_mul(&w)
    });
    let k = config.n_interactions() + config.q;
    let mut sum = DMatrix::zeros(k, k);
    for g in &grams {
        sum += g;
    }
    Ok(sum / blocks as f64)
}

/// Calibrates `gamma_j = xi * sqrt([E(W'W)^-1]_jj)` for each relevant pair
/// (and likewise `beta_j` for the linear setups).
pub fn calibrate_gamma(config: &DgpConfig) -> Result<DgpTruth, SimulationError> {
    let g = expected_gram(config)?;
    let k = g.nrows();
    // Conditioning is judged on the unit-diagonal rescaling, which removes
    // the arbitrary column scales.
    let d: Vec<f64> = (0..k).map(|i| g[(i, i)].sqrt()).collect();
    if d.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(SimulationError::SingularGram(f64::INFINITY));
    }
    let scaled = DMatrix::from_fn(k, k, |i, j| g[(i, j)] / (d[i] * d[j]));
    let condition = linalg::condition_number(&scaled);
    if condition > 1e10 {
        return Err(SimulationError::SingularGram(condition));
    }
    let inv = linalg::spd_inverse(&scaled).ok_or(SimulationError::SingularGram(condition))?;
    let coef = |c: usize| config.xi * (inv[(c, c)]).sqrt() / d[c];
    let (p, q) = (config.p, config.q);
    let s = config.n_interactions();
    Ok(DgpTruth {
        setup: config.setup,
        q,
        relevant: (0..q).map(|j| (variable(j), variable(j + q))).collect(),
        gamma: (0..q).map(|j| coef(pair_index(p, j, j + q))).collect(),
        beta: if config.linear() {
            (0..q).map(|j| coef(s + j)).collect()
        } else {
            Vec::new()
        },
        condition,
    })
}

/// A calibrated design ready to generate replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dgp {
    pub config: DgpConfig,
    pub truth: DgpTruth,
}

impl Dgp {
    pub fn new(config: DgpConfig) -> Result<Self, SimulationError> {
        let truth = calibrate_gamma(&config)?;
        Ok(Dgp { config, truth })
    }

    /// Seed of replication `rep`; model fits in that replication use it too.
    pub fn replication_seed(&self, rep: usize) -> u64 {
        rng::derive(rng::derive(self.config.seed, stream::REPLICATION), rep as u64)
    }

    fn sample(&self, n: usize, rng: &mut Rng) -> Dataset {
        let mut cols = covariates(&self.config, n, rng);
        let y: Vec<f64> = (0..n)
            .map(|i| {
                let row: Vec<f64> = cols.iter().map(|c| c[i]).collect();
                let e: f64 = rng.sample(StandardNormal);
                self.truth.mean_row(&row) + self.config.noise_sd * e
            })
            .collect();
        let mut names: Vec<String> = (0..self.config.p).map(variable).collect();
        names.push("y".into());
        cols.push(y);
        Dataset::from_columns(names, cols, Some("y")).expect("generated columns are well formed")
    }

    /// Training and test samples of replication `rep`.
    pub fn generate(&self, rep: usize) -> (Dataset, Dataset) {
        let mut r = rng::child(self.replication_seed(rep), stream::DATA);
        let train = self.sample(self.config.n_in, &mut r);
        let test = self.sample(self.config.n_out, &mut r);
        (train, test)
    }
}

/// Calibrates and generates one replication.
pub fn gen_dgp(config: &DgpConfig, rep: usize) -> Result<(Dataset, Dataset, DgpTruth), SimulationError> {
    let dgp = Dgp::new(config.clone())?;
    let (train, test) = dgp.generate(rep);
    Ok((train, test, dgp.truth))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloRow {
    pub model: String,
    pub tuning: String,
    /// Absent for models that do not select interactions.
    pub potency: Option<f64>,
    pub gauge: Option<f64>,
    /// Absent when every replication failed.
    pub mse: Option<f64>,
    pub mse_sd: f64,
    pub replications: usize,
    pub failures: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failure_messages: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub config: DgpConfig,
    pub truth: DgpTruth,
    pub n_r: usize,
    pub seed: u64,
    pub rows: Vec<MonteCarloRow>,
}

/// Outcome of one model in one replication.
#[derive(Debug, Clone, PartialEq)]
enum Outcome {
    Ok {
        mse: f64,
        potency: Option<f64>,
        gauge: Option<f64>,
    },
    Failed(String),
}

/// Fits every spec on `n_r` replications of `config` and averages potency,
/// gauge and out-of-sample MSE. Replications run in parallel; results are
/// aggregated in replication order.
pub fn run_monte_carlo(
    config: &DgpConfig,
    specs: &[ModelSpec],
    n_r: usize,
) -> Result<MonteCarloReport, SimulationError> {
    let dgp = Dgp::new(config.clone())?;
    let s = config.n_interactions();
    let outcomes: Vec<Vec<Outcome>> = crate::par::map_indexed(n_r, |rep| {
        let (train, test) = dgp.generate(rep);
        let seed = dgp.replication_seed(rep);
        specs
            .iter()
            .map(|spec| {
                let run = || -> Result<Outcome, crate::Error> {
                    let model = fit_model(spec, &train, seed)?;
                    let pred = model.predict(&test)?;
                    let m = mse(&pred, test.target())?;
                    let (pot, gau) = match model.selected_pairs() {
                        Some(sel) => (
                            Some(potency(&sel, &dgp.truth.relevant)?),
                            Some(gauge(&sel, &dgp.truth.relevant, s)?),
                        ),
                        None => (None, None),
                    };
                    Ok(Outcome::Ok {
                        mse: m,
                        potency: pot,
                        gauge: gau,
                    })
                };
                run().unwrap_or_else(|e| Outcome::Failed(format!("replication {rep}: {e}")))
            })
            .collect()
    });
    let rows = specs
        .iter()
        .enumerate()
        .map(|(m, spec)| {
            let (mut mses, mut pots, mut gaus, mut failures) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
            for rep in &outcomes {
                match &rep[m] {
                    Outcome::Ok { mse, potency, gauge } => {
                        mses.push(*mse);
                        pots.extend(*potency);
                        gaus.extend(*gauge);
                    }
                    Outcome::Failed(msg) => failures.push(msg.clone()),
                }
            }
            let avg = |v: &[f64]| (!v.is_empty()).then(|| linalg::mean(v));
            MonteCarloRow {
                model: spec.to_string(),
                tuning: spec.tuning_label(),
                potency: avg(&pots),
                gauge: avg(&gaus),
                mse: avg(&mses),
                mse_sd: if mses.len() > 1 { linalg::sample_sd(&mses) } else { 0.0 },
                replications: mses.len(),
                failures: failures.len(),
                failure_messages: failures,
            }
        })
        .collect();
    Ok(MonteCarloReport {
        config: config.clone(),
        truth: dgp.truth,
        n_r,
        seed: config.seed,
        rows,
    })
}

impl MonteCarloReport {
    pub fn row(&self, model: &str) -> Option<&MonteCarloRow> {
        self.rows.iter().find(|r| r.model == model)
    }

    /// Writes the CSV atomically.
    pub fn write_csv(&self, path: &Path) -> Result<(), crate::Error> {
        let mut buf = Vec::new();
        self.write_csv_to(&mut buf)?;
        crate::persist::write_atomic(path, &buf)
    }

    pub fn write_csv_to<W: Write>(&self, out: W) -> Result<(), crate::Error> {
        let csv_err = |e: csv::Error| crate::evaluation::EvalError::Csv(e.to_string());
        let mut w = csv::Writer::from_writer(out);
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        w.write_record(["setup", "seed", "model", "tuning", "potency", "gauge", "mse", "mse_sd", "replications", "failures"])
            .map_err(csv_err)?;
        for r in &self.rows {
            w.write_record([
                self.config.setup.to_string(),
                self.seed.to_string(),
                r.model.clone(),
                r.tuning.clone(),
                opt(r.potency),
                opt(r.gauge),
                opt(r.mse),
                r.mse_sd.to_string(),
                r.replications.to_string(),
                r.failures.to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Plain-text table with columns Model | Tuning | Potency | Gauge | MSE.
    pub fn write_table(&self, out: &mut impl Write) -> std::io::Result<()> {
        let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.3}"));
        writeln!(
            out,
            "setup {} | n_r = {} | seed = {}",
            self.config.setup, self.n_r, self.seed
        )?;
        writeln!(out, "{:<28} {:<14} {:>8} {:>8} {:>8} {:>8}", "Model", "Tuning", "Potency", "Gauge", "MSE", "Failed")?;
        for r in &self.rows {
            writeln!(
                out,
                "{:<28} {:<14} {:>8} {:>8} {:>8} {:>8}",
                r.model.split(':').next().unwrap_or(&r.model),
                r.tuning,
                fmt(r.potency),
                fmt(r.gauge),
                fmt(r.mse),
                r.failures
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_index_matches_enumeration() {
        let p = 7;
        let mut c = 0;
        for a in 0..p {
            for b in a + 1..p {
                assert_eq!(pair_index(p, a, b), c);
                c += 1;
            }
        }
    }

    #[test]
    fn ratio_limits_are_used_at_zero() {
        assert_eq!(neg_ratio(1, 0.0), -5.0);
        assert_eq!(neg_ratio(4, 1e-13), -1.0);
        assert!((neg_ratio(1, 1e-6) + 5.0).abs() < 1e-6);
        assert!((neg_ratio(5, -1e-6) + 10.0).abs() < 1e-6);
    }
}
