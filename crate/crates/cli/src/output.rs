use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use plam::data::{ingest_csv, parse_overrides};
use plam::persist::write_atomic;
use plam::{Dataset, Error, ModelSpec};
use serde::Serialize;

/// Resolved settings of one invocation, written next to every result.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: &'static str,
    pub version: &'static str,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub kinds: BTreeMap<String, plam::ColumnKind>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub models: Vec<ModelSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tuning: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    pub threads: usize,
}

impl RunConfig {
    pub fn new(command: &'static str, seed: u64) -> Self {
        RunConfig {
            command,
            version: env!("CARGO_PKG_VERSION"),
            seed,
            data: None,
            target: None,
            kinds: BTreeMap::new(),
            models: Vec::new(),
            tuning: None,
            k: None,
            threads: plam::par::threads(),
        }
    }

    /// `# {...}` line heading CSV outputs.
    pub fn csv_comment(&self) -> Result<String, Error> {
        Ok(format!("# {}\n", serde_json::to_string(self)?))
    }
}

pub fn load_data(path: &Path, target: &str, kinds: Option<&str>) -> Result<(Dataset, BTreeMap<String, plam::ColumnKind>), Error> {
    let overrides = match kinds {
        Some(k) => parse_overrides(k)?,
        None => BTreeMap::new(),
    };
    let data = ingest_csv(path, Some(target), &overrides)?;
    if data.rejected_rows > 0 {
        eprintln!("dropped {} rows with missing cells", data.rejected_rows);
    }
    Ok((data, overrides))
}

/// Parses each spec and applies `tuning` options to the specs that accept
/// them. An option no listed model accepts is an error.
pub fn resolve_models(specs: &[String], tuning: Option<&str>) -> Result<Vec<ModelSpec>, Error> {
    let mut models = specs.iter().map(|s| s.parse()).collect::<Result<Vec<ModelSpec>, _>>()?;
    let Some(tuning) = tuning else {
        return Ok(models);
    };
    for kv in tuning.split(',').filter(|kv| !kv.trim().is_empty()) {
        let key = kv.split_once('=').map_or(kv, |(k, _)| k).trim();
        let mut used = false;
        for m in models.iter_mut().filter(|m| m.accepts(key)) {
            m.apply(kv)?;
            used = true;
        }
        if !used {
            return Err(Error::Config(format!("tuning option `{kv}` does not apply to any listed model")));
        }
    }
    Ok(models)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Error> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Writes a CSV whose first line is the run comment.
pub fn write_csv(path: &Path, config: &RunConfig, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), Error> {
    let mut text = config.csv_comment()?;
    text.push_str(&header.join(","));
    text.push('\n');
    for row in rows {
        text.push_str(&row.join(","));
        text.push('\n');
    }
    write_atomic(path, text.as_bytes())
}

pub fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}
