//! JSON checkpoints of named parameter tensors.
//!
//! The file holds the training configuration, the selected epoch and every
//! parameter in store order. No timestamps or host details are written, so
//! the same run always produces the same bytes.

use std::fs;
use std::path::Path;

use riskgraph_core::model::TrainConfig;
use riskgraph_core::numeric::Tensor;
use riskgraph_core::params::ParamStore;
use serde::{Deserialize, Serialize};

use crate::error::DataError;

pub const FORMAT: &str = "riskgraph-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamRecord {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub config: TrainConfig,
    pub best_epoch: usize,
    pub best_score: f64,
    /// `(survive, bankrupt)` loss weights the run resolved.
    pub class_weights: (f64, f64),
    pub params: Vec<ParamRecord>,
}

impl Checkpoint {
    pub fn new(
        config: &TrainConfig,
        params: &ParamStore,
        best_epoch: usize,
        best_score: f64,
        class_weights: (f64, f64),
    ) -> Self {
        Self {
            format: FORMAT.into(),
            version: VERSION,
            config: config.clone(),
            best_epoch,
            best_score,
            class_weights,
            params: params
                .iter()
                .map(|(name, t)| ParamRecord {
                    name: name.into(),
                    shape: t.shape().to_vec(),
                    data: t.data().to_vec(),
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("checkpoint serializes");
        text.push('\n');
        text
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        fs::write(path, self.to_json())
    }

    pub fn load(path: &Path) -> Result<Self, DataError> {
        let text = fs::read_to_string(path)
            .map_err(|e| DataError::file(path, format!("cannot open: {e}")))?;
        let ck: Checkpoint = serde_json::from_str(&text)
            .map_err(|e| DataError::at(path, e.line(), e.to_string()))?;
        if ck.format != FORMAT || ck.version != VERSION {
            return Err(DataError::file(
                path,
                format!(
                    "not a {FORMAT} v{VERSION} file (found {} v{})",
                    ck.format, ck.version
                ),
            ));
        }
        Ok(ck)
    }

    /// Parameters as a store. Fails on a shape/data mismatch.
    pub fn store(&self) -> Result<ParamStore, String> {
        let mut store = ParamStore::new();
        for p in &self.params {
            let t = Tensor::new(p.shape.clone(), p.data.clone())
                .map_err(|e| format!("{}: {e}", p.name))?;
            store.insert(p.name.clone(), t);
        }
        Ok(store)
    }

    /// Checks the stored parameters against a fresh initialization for the
    /// same graph and configuration: same names, same order, same shapes.
    pub fn matches(&self, fresh: &ParamStore) -> Result<(), String> {
        if self.params.len() != fresh.len() {
            return Err(format!(
                "checkpoint has {} parameters, model needs {}",
                self.params.len(),
                fresh.len()
            ));
        }
        for (p, (name, t)) in self.params.iter().zip(fresh.iter()) {
            if p.name != name || p.shape != t.shape() {
                return Err(format!(
                    "checkpoint parameter {} {:?} does not fit {name} {:?}",
                    p.name,
                    p.shape,
                    t.shape()
                ));
            }
        }
        Ok(())
    }
}
