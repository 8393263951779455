//! Column-labelled numeric tables and CSV ingestion.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("target column `{0}` not found")]
    MissingTarget(String),
    #[error("non-numeric cell `{value}` in column `{column}` at data row {row}")]
    NonNumericCell {
        row: usize,
        column: String,
        value: String,
    },
    #[error("file has no data rows")]
    EmptyFile,
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("column `{0}` declared binary but has more than two distinct values")]
    NotBinary(String),
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("row {row} has {found} cells, expected {expected}")]
    RaggedRow {
        row: usize,
        found: usize,
        expected: usize,
    },
    #[error("invalid kind override `{0}` (expected name=continuous|binary|excluded)")]
    BadOverride(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Continuous,
    Binary,
    /// Constant or user-excluded: never enters powers, smooths or interactions.
    Excluded,
}

impl std::str::FromStr for ColumnKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "continuous" | "c" => Ok(ColumnKind::Continuous),
            "binary" | "b" => Ok(ColumnKind::Binary),
            "excluded" | "x" | "exclude" => Ok(ColumnKind::Excluded),
            other => Err(format!("unknown column kind `{other}`")),
        }
    }
}

/// Numeric table stored column by column. The target column, when present, is
/// part of `columns` and is skipped by [`Dataset::features`].
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
    kinds: Vec<ColumnKind>,
    target: Option<usize>,
    pub source: Option<PathBuf>,
    pub rejected_rows: usize,
}

fn infer_kind(col: &[f64]) -> ColumnKind {
    let mut first = None;
    let mut second = None;
    for &v in col {
        match (first, second) {
            (None, _) => first = Some(v),
            (Some(a), None) if v != a => second = Some(v),
            (Some(a), Some(b)) if v != a && v != b => return ColumnKind::Continuous,
            _ => {}
        }
    }
    match second {
        None => ColumnKind::Excluded,
        Some(_) => ColumnKind::Binary,
    }
}

pub fn distinct_count(col: &[f64]) -> usize {
    let mut v = col.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    v.dedup();
    v.len()
}

impl Dataset {
    /// Builds a dataset from named columns, inferring kinds.
    pub fn from_columns(
        names: Vec<String>,
        columns: Vec<Vec<f64>>,
        target: Option<&str>,
    ) -> Result<Self, DataError> {
        assert_eq!(names.len(), columns.len(), "one name per column");
        if columns.is_empty() || columns[0].is_empty() {
            return Err(DataError::EmptyFile);
        }
        let n = columns[0].len();
        for (name, c) in names.iter().zip(&columns) {
            if c.len() != n {
                return Err(DataError::SchemaMismatch(format!(
                    "column `{name}` has {} rows, expected {n}",
                    c.len()
                )));
            }
        }
        let target = match target {
            Some(t) => Some(
                names
                    .iter()
                    .position(|c| c == t)
                    .ok_or_else(|| DataError::MissingTarget(t.to_string()))?,
            ),
            None => None,
        };
        let kinds = columns.iter().map(|c| infer_kind(c)).collect();
        Ok(Dataset {
            names,
            columns,
            kinds,
            target,
            source: None,
            rejected_rows: 0,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn n_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, col: usize) -> &str {
        &self.names[col]
    }

    pub fn column(&self, col: usize) -> &[f64] {
        &self.columns[col]
    }

    pub fn kind(&self, col: usize) -> ColumnKind {
        self.kinds[col]
    }

    pub fn kinds(&self) -> &[ColumnKind] {
        &self.kinds
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|c| c == name)
    }

    pub fn target_index(&self) -> Option<usize> {
        self.target
    }

    pub fn target_name(&self) -> Option<&str> {
        self.target.map(|t| self.names[t].as_str())
    }

    pub fn target(&self) -> &[f64] {
        let t = self.target.expect("dataset has no target column");
        &self.columns[t]
    }

    /// Target is 0/1 valued.
    pub fn target_is_binary(&self) -> bool {
        self.target.is_some() && self.target().iter().all(|&v| v == 0.0 || v == 1.0)
    }

    /// Feature columns in file order (target excluded).
    pub fn features(&self) -> Vec<usize> {
        (0..self.columns.len())
            .filter(|&c| Some(c) != self.target)
            .collect()
    }

    /// Feature columns that are not excluded.
    pub fn active_features(&self) -> Vec<usize> {
        self.features()
            .into_iter()
            .filter(|&c| self.kinds[c] != ColumnKind::Excluded)
            .collect()
    }

    pub fn continuous_features(&self) -> Vec<usize> {
        self.features()
            .into_iter()
            .filter(|&c| self.kinds[c] == ColumnKind::Continuous)
            .collect()
    }

    pub fn set_kind(&mut self, col: usize, kind: ColumnKind) -> Result<(), DataError> {
        if kind == ColumnKind::Binary && distinct_count(&self.columns[col]) > 2 {
            return Err(DataError::NotBinary(self.names[col].clone()));
        }
        self.kinds[col] = kind;
        Ok(())
    }

    pub fn set_target(&mut self, name: &str) -> Result<(), DataError> {
        self.target = Some(
            self.index_of(name)
                .ok_or_else(|| DataError::MissingTarget(name.to_string()))?,
        );
        Ok(())
    }

    /// Applies `name=kind` overrides.
    pub fn apply_overrides(&mut self, overrides: &BTreeMap<String, ColumnKind>) -> Result<(), DataError> {
        for (name, kind) in overrides {
            let col = self
                .index_of(name)
                .ok_or_else(|| DataError::UnknownColumn(name.clone()))?;
            self.set_kind(col, *kind)?;
        }
        Ok(())
    }

    /// Row subset; kinds are kept from the parent so folds share one schema.
    pub fn subset(&self, rows: &[usize]) -> Dataset {
        Dataset {
            names: self.names.clone(),
            columns: self
                .columns
                .iter()
                .map(|c| rows.iter().map(|&r| c[r]).collect())
                .collect(),
            kinds: self.kinds.clone(),
            target: self.target,
            source: self.source.clone(),
            rejected_rows: 0,
        }
    }

    /// Same schema, new values (used for evaluation grids).
    pub fn with_columns(&self, columns: Vec<Vec<f64>>) -> Dataset {
        assert_eq!(columns.len(), self.columns.len());
        Dataset {
            names: self.names.clone(),
            columns,
            kinds: self.kinds.clone(),
            target: self.target,
            source: None,
            rejected_rows: 0,
        }
    }

    /// Column index in `self` for every feature name the caller expects,
    /// failing on the first missing one.
    pub fn resolve(&self, names: &[String]) -> Result<Vec<usize>, DataError> {
        names
            .iter()
            .map(|n| {
                self.index_of(n)
                    .ok_or_else(|| DataError::SchemaMismatch(format!("missing column `{n}`")))
            })
            .collect()
    }
}

/// Parses `A=binary,B=excluded`.
pub fn parse_overrides(spec: &str) -> Result<BTreeMap<String, ColumnKind>, DataError> {
    let mut out = BTreeMap::new();
    for part in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (name, kind) = part
            .split_once('=')
            .ok_or_else(|| DataError::BadOverride(part.to_string()))?;
        let kind = kind
            .trim()
            .parse()
            .map_err(|_| DataError::BadOverride(part.to_string()))?;
        out.insert(name.trim().to_string(), kind);
    }
    Ok(out)
}

fn is_missing(cell: &str) -> bool {
    matches!(cell, "" | "NA" | "na" | "NaN" | "nan" | "?" | "null" | "NULL")
}

/// Reads a comma-separated file with a header row. Rows with missing cells are
/// dropped and counted in `rejected_rows`; any other non-numeric cell is an error.
pub fn ingest_csv(
    path: &Path,
    target: Option<&str>,
    overrides: &BTreeMap<String, ColumnKind>,
) -> Result<Dataset, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)?;
    let names: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if names.is_empty() {
        return Err(DataError::EmptyFile);
    }
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
    let mut rejected = 0;
    let mut row_buf = Vec::with_capacity(names.len());
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = i + 1;
        if record.len() != names.len() {
            return Err(DataError::RaggedRow {
                row,
                found: record.len(),
                expected: names.len(),
            });
        }
        row_buf.clear();
        let mut missing = false;
        for (j, cell) in record.iter().enumerate() {
            if is_missing(cell) {
                missing = true;
                break;
            }
            let v: f64 = cell.parse().map_err(|_| DataError::NonNumericCell {
                row,
                column: names[j].clone(),
                value: cell.to_string(),
            })?;
            if !v.is_finite() {
                missing = true;
                break;
            }
            row_buf.push(v);
        }
        if missing {
            rejected += 1;
            continue;
        }
        for (c, v) in columns.iter_mut().zip(&row_buf) {
            c.push(*v);
        }
    }
    if columns[0].is_empty() {
        return Err(DataError::EmptyFile);
    }
    let mut ds = Dataset::from_columns(names, columns, target)?;
    ds.apply_overrides(overrides)?;
    ds.source = Some(path.to_path_buf());
    ds.rejected_rows = rejected;
    Ok(ds)
}
