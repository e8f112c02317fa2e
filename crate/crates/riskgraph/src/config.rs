//! Run configuration: command-line flags over a JSON config file over
//! built-in defaults.
//!
//! A config file looks like
//!
//! ```json
//! { "data": "./smesd", "out": "./runs/a", "train": { "epochs": 300, "lawsuit_dim": 24 } }
//! ```
//!
//! Every level rejects unknown keys. The `RISKGRAPH_DATA` environment
//! variable supplies the data root when neither a flag nor the file does.

use std::fs;
use std::path::{Path, PathBuf};

use riskgraph_core::model::TrainConfig;
use serde::Deserialize;
use serde_json::{Map, Value};

use crate::error::{CliResult, Failure};

pub const DATA_ENV: &str = "RISKGRAPH_DATA";

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub train: Map<String, Value>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::config(format!("{}: cannot open: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Failure::config(format!("{}: {e}", path.display())))
    }
}

/// `key=value` from `--set`. The value is read as JSON when it parses and
/// as a plain string otherwise, so `--set ablation=no_hyper` and
/// `--set lr_max=0.005` both work.
pub fn parse_override(raw: &str) -> Result<(String, Value), String> {
    let (key, value) = raw
        .split_once('=')
        .ok_or_else(|| format!("`{raw}` is not key=value"))?;
    let key = key.trim().replace('-', "_");
    if key.is_empty() {
        return Err(format!("`{raw}` has an empty key"));
    }
    let value =
        serde_json::from_str(value.trim()).unwrap_or_else(|_| Value::String(value.trim().into()));
    Ok((key, value))
}

/// Defaults, then the file's `train` table, then flag overrides, in order.
pub fn resolve_train(
    file: Option<&ConfigFile>,
    overrides: &[(String, Value)],
) -> CliResult<TrainConfig> {
    let Value::Object(mut merged) =
        serde_json::to_value(TrainConfig::default()).expect("defaults serialize")
    else {
        unreachable!("TrainConfig serializes to an object")
    };
    let layers = file
        .map(|f| {
            f.train
                .iter()
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect::<Vec<_>>()
        })
        .into_iter()
        .flatten()
        .map(|kv| ("config file", kv))
        .chain(overrides.iter().cloned().map(|kv| ("flag", kv)));
    for (source, (key, value)) in layers {
        if !merged.contains_key(&key) {
            return Err(Failure::config(format!(
                "{source}: unknown training key `{key}`"
            )));
        }
        merged.insert(key, value);
    }
    let config: TrainConfig = serde_json::from_value(Value::Object(merged))
        .map_err(|e| Failure::config(e.to_string()))?;
    config
        .validate()
        .map_err(|e| Failure::config(e.to_string()))?;
    Ok(config)
}

/// Flag, then config file, then `RISKGRAPH_DATA`.
pub fn resolve_data(flag: Option<&Path>, file: Option<&ConfigFile>) -> CliResult<PathBuf> {
    if let Some(p) = flag {
        return Ok(p.to_path_buf());
    }
    if let Some(p) = file.and_then(|f| f.data.clone()) {
        return Ok(p);
    }
    match std::env::var_os(DATA_ENV) {
        Some(p) if !p.is_empty() => Ok(PathBuf::from(p)),
        _ => Err(Failure::config(format!(
            "no data directory: pass --data, set `data` in the config file or set {DATA_ENV}"
        ))),
    }
}

pub fn resolve_out(flag: Option<&Path>, file: Option<&ConfigFile>, fallback: &str) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| file.and_then(|f| f.out.clone()))
        .unwrap_or_else(|| PathBuf::from(fallback))
}
