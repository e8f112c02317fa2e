//! Converter from a table export of the released SME dataset to the JSONL
//! schema of [`crate::io`].
//!
//! Expected input directory, one CSV per table, each with a header row:
//!
//! * `enterprises.csv`: `id,established_time,registered_capital,paid_in_capital,label,bankrupt_date`
//!   (`label` is 0, 1 or empty; `bankrupt_date` is empty for survivors)
//! * `persons.csv`: `id`
//! * `relations.csv`: `src,dst,relation,weight` (`weight` empty unless holder/investor)
//! * `hyperedges.csv`: `type,hyperedge,member`, one row per membership
//! * `lawsuits.csv`: `enterprise,cause,court,verdict,date`
//! * `splits.csv`: `id,split` with split `train`, `val` (or `validation`) or `test`
//!
//! Lawsuit causes are copied verbatim. The output is loaded back before the
//! converter reports success, so every reference is checked.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::DataError;
use crate::io::{
    self, AttrsRecord, EdgeRecord, HyperedgeRecord, LawsuitRecord, NodeRecord, SplitsRecord,
};

#[derive(Debug, Deserialize)]
struct EnterpriseRow {
    id: String,
    established_time: u32,
    registered_capital: f64,
    paid_in_capital: f64,
    label: Option<u8>,
    bankrupt_date: Option<String>,
}

#[derive(Debug, Deserialize)]
struct PersonRow {
    id: String,
}

#[derive(Debug, Deserialize)]
struct RelationRow {
    src: String,
    dst: String,
    relation: String,
    weight: Option<f64>,
}

#[derive(Debug, Deserialize)]
struct MembershipRow {
    #[serde(rename = "type")]
    kind: String,
    hyperedge: String,
    member: String,
}

#[derive(Debug, Deserialize)]
struct LawsuitRow {
    enterprise: String,
    cause: String,
    court: String,
    verdict: String,
    date: String,
}

#[derive(Debug, Deserialize)]
struct SplitRow {
    id: String,
    split: String,
}

fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<(usize, T)>, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| DataError::file(path, format!("cannot open: {e}")))?;
    let headers = reader
        .headers()
        .map_err(|e| DataError::at(path, 1, e.to_string()))?
        .clone();
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            DataError::new(
                path.to_path_buf(),
                e.position().map(|p| p.line() as usize),
                e.to_string(),
            )
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let row = record
            .deserialize(Some(&headers))
            .map_err(|e| DataError::at(path, line, e.to_string()))?;
        out.push((line, row));
    }
    Ok(out)
}

/// Converts `input` into the five schema files under `output` and checks
/// the result by loading it. Returns the written paths.
pub fn convert(
    input: &Path,
    output: &Path,
    snapshot_date: &str,
) -> Result<Vec<PathBuf>, DataError> {
    fs::create_dir_all(output)
        .map_err(|e| DataError::file(output, format!("cannot create: {e}")))?;

    let mut nodes: Vec<NodeRecord> = Vec::new();
    let path = input.join("enterprises.csv");
    for (line, r) in read_csv::<EnterpriseRow>(&path)? {
        let observation_time = r.bankrupt_date.filter(|d| !d.is_empty());
        if observation_time.is_some() && r.label != Some(1) {
            return Err(DataError::at(
                &path,
                line,
                format!(
                    "`{}` has a bankruptcy date but is not labeled bankrupt",
                    r.id
                ),
            ));
        }
        nodes.push(NodeRecord {
            id: r.id,
            kind: "enterprise".into(),
            attrs: Some(AttrsRecord {
                established_time: r.established_time,
                registered_capital: r.registered_capital,
                paid_in_capital: r.paid_in_capital,
            }),
            label: r.label,
            observation_time,
        });
    }
    for (_, r) in read_csv::<PersonRow>(&input.join("persons.csv"))? {
        nodes.push(NodeRecord {
            id: r.id,
            kind: "person".into(),
            attrs: None,
            label: None,
            observation_time: None,
        });
    }

    let edges: Vec<EdgeRecord> = read_csv::<RelationRow>(&input.join("relations.csv"))?
        .into_iter()
        .map(|(_, r)| EdgeRecord {
            src: r.src,
            dst: r.dst,
            rel: r.relation,
            weight: r.weight,
        })
        .collect();

    // group memberships by (type, hyperedge), first appearance first
    let mut order: Vec<(String, String)> = Vec::new();
    let mut members: BTreeMap<(String, String), Vec<String>> = BTreeMap::new();
    for (_, r) in read_csv::<MembershipRow>(&input.join("hyperedges.csv"))? {
        let key = (r.kind, r.hyperedge);
        let list = members.entry(key.clone()).or_insert_with(|| {
            order.push(key.clone());
            Vec::new()
        });
        if !list.contains(&r.member) {
            list.push(r.member);
        }
    }
    let hyperedges: Vec<HyperedgeRecord> = order
        .into_iter()
        .map(|key| HyperedgeRecord {
            members: members.remove(&key).unwrap_or_default(),
            kind: key.0,
        })
        .collect();

    let lawsuits: Vec<LawsuitRecord> = read_csv::<LawsuitRow>(&input.join("lawsuits.csv"))?
        .into_iter()
        .map(|(_, r)| LawsuitRecord {
            enterprise: r.enterprise,
            cause: r.cause,
            court: r.court,
            verdict: r.verdict,
            date: r.date,
        })
        .collect();

    let mut splits = SplitsRecord {
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
        snapshot_date: snapshot_date.into(),
    };
    let path = input.join("splits.csv");
    for (line, r) in read_csv::<SplitRow>(&path)? {
        match r.split.to_ascii_lowercase().as_str() {
            "train" => splits.train.push(r.id),
            "val" | "valid" | "validation" => splits.val.push(r.id),
            "test" => splits.test.push(r.id),
            other => {
                return Err(DataError::at(
                    &path,
                    line,
                    format!("unknown split `{other}`"),
                ))
            }
        }
    }

    let write = |name: &str, lines: Vec<String>| -> Result<PathBuf, DataError> {
        let p = output.join(name);
        let mut text = lines.join("\n");
        if !text.is_empty() {
            text.push('\n');
        }
        fs::write(&p, text).map_err(|e| DataError::file(&p, format!("cannot write: {e}")))?;
        Ok(p)
    };
    let paths = vec![
        write(io::NODES, json_lines(&nodes))?,
        write(io::EDGES, json_lines(&edges))?,
        write(io::HYPEREDGES, json_lines(&hyperedges))?,
        write(io::LAWSUITS, json_lines(&lawsuits))?,
        write(
            io::SPLITS,
            vec![serde_json::to_string_pretty(&splits).expect("splits serialize")],
        )?,
    ];
    io::load_ekg(output)?;
    Ok(paths)
}

fn json_lines<T: Serialize>(records: &[T]) -> Vec<String> {
    records
        .iter()
        .map(|r| serde_json::to_string(r).expect("record serializes"))
        .collect()
}
