//! Versioned JSON model files.
//!
//! The summary fields (`intercept`, `linear_terms`, `smooths`, `trees`,
//! `selection`) are there for readers of the file; `model` carries the full
//! fitted state and is what [`ModelFile::model`] reloads. Doubles round-trip
//! exactly, so a reloaded model predicts bit-identically.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baselines::Tree;
use crate::data::Dataset;
use crate::error::Error;
use crate::models::{FittedModel, ModelSpec};
use crate::selection::SelectionResult;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothSummary {
    pub variable: String,
    pub knots: Vec<f64>,
    pub coefficients: Vec<f64>,
    pub psi: f64,
    pub edf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSummary {
    pub term: String,
    pub coefficient: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub schema_version: u32,
    pub variant: String,
    pub spec: String,
    /// Fully resolved specification.
    pub config: ModelSpec,
    pub seed: u64,
    pub target: Option<String>,
    /// Feature columns of the training data, in file order.
    pub columns: Vec<String>,
    pub intercept: Option<f64>,
    pub linear_terms: Vec<LinearSummary>,
    pub smooths: Vec<SmoothSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trees: Option<Vec<Tree>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection: Option<SelectionResult>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    pub model: FittedModel,
}

impl ModelFile {
    pub fn new(spec: &ModelSpec, seed: u64, data: &Dataset, model: FittedModel) -> Self {
        let mut intercept = None;
        let mut linear_terms = Vec::new();
        let mut smooths = Vec::new();
        if let Some(am) = model.additive() {
            intercept = Some(am.intercept);
            linear_terms = am
                .linear_terms
                .iter()
                .map(|t| LinearSummary {
                    term: t.term.to_string(),
                    coefficient: t.coefficient,
                })
                .collect();
            smooths = am
                .smooths
                .iter()
                .map(|s| SmoothSummary {
                    variable: s.variable.clone(),
                    knots: s.basis.knots().to_vec(),
                    coefficients: s.coefficients.clone(),
                    psi: s.psi,
                    edf: s.edf,
                })
                .collect();
        }
        let linear = |terms: &[crate::design::Term], coefs: &[f64]| {
            terms
                .iter()
                .zip(coefs)
                .map(|(t, c)| LinearSummary {
                    term: t.to_string(),
                    coefficient: *c,
                })
                .collect::<Vec<_>>()
        };
        let trees = match &model {
            FittedModel::Linear(m) => {
                intercept = Some(m.intercept);
                linear_terms = linear(&m.terms, &m.coefficients);
                None
            }
            FittedModel::Sparse(m) => {
                intercept = Some(m.intercept);
                linear_terms = linear(&m.terms, &m.coefficients);
                None
            }
            FittedModel::Tree(m) => Some(vec![m.tree.clone()]),
            FittedModel::Ensemble(m) => Some(m.trees.clone()),
            _ => None,
        };
        ModelFile {
            schema_version: SCHEMA_VERSION,
            variant: spec.kind.name().to_string(),
            spec: spec.to_string(),
            config: spec.clone(),
            seed,
            target: data.target_name().map(str::to_string),
            columns: data.features().into_iter().map(|c| data.name(c).to_string()).collect(),
            intercept,
            linear_terms,
            smooths,
            trees,
            selection: model.selection().cloned(),
            warnings: model.warnings(),
            model,
        }
    }

    pub fn to_json(&self) -> Result<String, Error> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, Error> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.schema_version > SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "model file schema {} is newer than supported ({SCHEMA_VERSION})",
                file.schema_version
            )));
        }
        Ok(file)
    }

    pub fn save(&self, path: &Path) -> Result<(), Error> {
        write_atomic(path, self.to_json()?.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

/// Writes to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), Error> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}
