use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::ekg::{extract_lawsuit_features, EnterpriseKg, Label, Split, Splits, FEATURE_COUNT};
use crate::error::{Error, Result};
use crate::heter::HeterGraph;
use crate::hyper::HyperGraph;
use crate::intra::{IntraInputs, LawsuitBatch, ATTR_DIM};
use crate::math;
use crate::numeric::Tensor;
use crate::rng;

use super::TrainConfig;

/// Everything constant across epochs: encoder inputs, graph operators,
/// labels and splits.
#[derive(Clone, Debug)]
pub struct GraphInputs {
    pub intra: IntraInputs,
    pub hyper: HyperGraph,
    pub heter: HeterGraph,
    /// Label per enterprise, `None` when unlabeled.
    pub labels: Vec<Option<Label>>,
    pub splits: Splits,
}

impl GraphInputs {
    /// Builds the inputs for `kg`. `supplement` maps node ids to vectors of
    /// width `config.supplement_dim`; nodes without an entry get a stand-in
    /// drawn from a stream keyed by their id.
    pub fn new(
        kg: &EnterpriseKg,
        config: &TrainConfig,
        supplement: Option<&BTreeMap<String, Vec<f64>>>,
    ) -> Result<Self> {
        kg.validate()?;
        let n_e = kg.enterprises.len();
        let reference = reference_rows(kg);

        let raw_attrs: Vec<[f64; ATTR_DIM]> = kg
            .enterprises
            .iter()
            .map(|e| {
                [
                    math::ln1p(f64::from(e.attrs.established_months)),
                    math::ln1p(e.attrs.registered_capital),
                    math::ln1p(e.attrs.paid_in_capital),
                ]
            })
            .collect();
        let attrs = standardize(&raw_attrs, &reference);

        // Attribute columns are standardized like `attrs`; count columns
        // keep zero for "no lawsuits".
        let table = extract_lawsuit_features(kg);
        let mut frequency = Vec::with_capacity(n_e * FEATURE_COUNT);
        for (i, row) in table.rows.iter().enumerate() {
            frequency.extend_from_slice(&attrs[i * ATTR_DIM..(i + 1) * ATTR_DIM]);
            frequency.extend(row[ATTR_DIM..].iter().map(|&c| math::ln1p(c)));
        }

        let width = config.supplement_dim;
        let n = kg.node_count();
        let mut sup = Vec::with_capacity(n * width);
        let ids = kg
            .enterprises
            .iter()
            .map(|e| e.id.as_str())
            .chain(kg.persons.iter().map(|p| p.id.as_str()));
        for id in ids {
            match supplement.and_then(|m| m.get(id)) {
                Some(v) if v.len() != width => {
                    return Err(Error::Config(format!(
                        "supplement for `{id}` has width {}, expected {width}",
                        v.len()
                    )))
                }
                Some(v) if v.iter().any(|x| !x.is_finite()) => {
                    return Err(Error::Config(format!(
                        "supplement for `{id}` is not finite"
                    )))
                }
                Some(v) => sup.extend_from_slice(v),
                None => sup.extend(stand_in_supplement(id, width)),
            }
        }

        let intra = IntraInputs {
            n_enterprises: n_e,
            n_persons: kg.persons.len(),
            attrs: Tensor::matrix(n_e, ATTR_DIM, attrs)?,
            frequency: Tensor::matrix(n_e, FEATURE_COUNT, frequency)?,
            supplement: Tensor::matrix(n, width, sup)?,
            lawsuits: LawsuitBatch::from_kg(kg),
        };
        Ok(Self {
            intra,
            hyper: HyperGraph::from_kg(kg, config.hyper_variant)?,
            heter: HeterGraph::from_kg(kg, config.directed_relations)?,
            labels: kg.enterprises.iter().map(|e| e.label).collect(),
            splits: kg.splits.clone(),
        })
    }

    pub fn n_enterprises(&self) -> usize {
        self.intra.n_enterprises
    }

    pub fn n_nodes(&self) -> usize {
        self.intra.n_enterprises + self.intra.n_persons
    }

    /// Nodes of `split` with their labels.
    pub fn labeled(&self, split: Split) -> Result<(Vec<usize>, Vec<Label>)> {
        let nodes = self.splits.get(split).to_vec();
        let labels = nodes
            .iter()
            .map(|&i| {
                self.labels[i]
                    .ok_or_else(|| Error::InvalidGraph(format!("split node {i} has no label")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((nodes, labels))
    }
}

/// Deterministic `N(0, 1)` vector for a node without a supplied embedding.
pub fn stand_in_supplement(id: &str, width: usize) -> Vec<f64> {
    let mut r = rng::stream(rng::fnv1a(id.as_bytes()), "supplement");
    (0..width).map(|_| rng::normal(&mut r)).collect()
}

/// Rows whose statistics define the standardization: the train split, or
/// every enterprise when there is none.
fn reference_rows(kg: &EnterpriseKg) -> Vec<usize> {
    if kg.splits.train.is_empty() {
        (0..kg.enterprises.len()).collect()
    } else {
        kg.splits.train.clone()
    }
}

/// Column-wise z-scores with statistics from `reference`; a constant column
/// is only centered.
fn standardize<const C: usize>(rows: &[[f64; C]], reference: &[usize]) -> Vec<f64> {
    let mut out = Vec::with_capacity(rows.len() * C);
    let mut mean = [0.0; C];
    let mut sd = [1.0; C];
    if !reference.is_empty() {
        let n = reference.len() as f64;
        for c in 0..C {
            let m = reference.iter().map(|&i| rows[i][c]).sum::<f64>() / n;
            let var = reference
                .iter()
                .map(|&i| (rows[i][c] - m) * (rows[i][c] - m))
                .sum::<f64>()
                / n;
            mean[c] = m;
            if var > 0.0 {
                sd[c] = math::sqrt(var);
            }
        }
    }
    for row in rows {
        for c in 0..C {
            out.push((row[c] - mean[c]) / sd[c]);
        }
    }
    out
}
