//! Newline-delimited JSON graph files.
//!
//! A data directory holds `nodes.jsonl`, `edges.jsonl`, `hyperedges.jsonl`,
//! `lawsuits.jsonl` and `splits.json`, plus an optional `embeddings.jsonl`
//! of supplement vectors. Every load error names the file and line.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use riskgraph_core::ekg::{
    earliest_lawsuit_date, Attributes, Cause, CourtLevel, Date, Enterprise, EnterpriseKg,
    HeteroEdge, Hyperedge, HyperedgeType, Label, Lawsuit, NodeKind, NodeRef, Person, Relation,
    Splits, Verdict,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::DataError;

pub const NODES: &str = "nodes.jsonl";
pub const EDGES: &str = "edges.jsonl";
pub const HYPEREDGES: &str = "hyperedges.jsonl";
pub const LAWSUITS: &str = "lawsuits.jsonl";
pub const SPLITS: &str = "splits.json";
pub const EMBEDDINGS: &str = "embeddings.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttrsRecord {
    pub established_time: u32,
    pub registered_capital: f64,
    pub paid_in_capital: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeRecord {
    pub id: String,
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attrs: Option<AttrsRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observation_time: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeRecord {
    pub src: String,
    pub dst: String,
    pub rel: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperedgeRecord {
    #[serde(rename = "type")]
    pub kind: String,
    pub members: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LawsuitRecord {
    pub enterprise: String,
    pub cause: String,
    pub court: String,
    pub verdict: String,
    pub date: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitsRecord {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
    pub snapshot_date: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingRecord {
    pub id: String,
    pub vector: Vec<f64>,
}

/// A loaded data directory.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub kg: EnterpriseKg,
    /// Supplement vectors by node id, when `embeddings.jsonl` exists.
    pub supplement: Option<BTreeMap<String, Vec<f64>>>,
}

/// Parses every non-blank line of a JSONL file, keeping line numbers.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<(usize, T)>, DataError> {
    let file = File::open(path).map_err(|e| DataError::file(path, format!("cannot open: {e}")))?;
    let mut out = Vec::new();
    for (k, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| DataError::at(path, k + 1, format!("cannot read: {e}")))?;
        if line.trim().is_empty() {
            continue;
        }
        let record =
            serde_json::from_str(&line).map_err(|e| DataError::at(path, k + 1, e.to_string()))?;
        out.push((k + 1, record));
    }
    Ok(out)
}

fn parse_date(path: &Path, line: usize, raw: &str) -> Result<Date, DataError> {
    raw.parse().map_err(|_| {
        DataError::at(
            path,
            line,
            format!("malformed date `{raw}`, expected YYYY-MM-DD"),
        )
    })
}

struct Ids {
    index: HashMap<String, NodeRef>,
}

impl Ids {
    fn resolve(&self, path: &Path, line: usize, id: &str) -> Result<NodeRef, DataError> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| DataError::at(path, line, format!("unknown node id `{id}`")))
    }

    fn enterprise(&self, path: &Path, line: usize, id: &str) -> Result<usize, DataError> {
        match self.resolve(path, line, id)? {
            NodeRef::Enterprise(i) => Ok(i),
            NodeRef::Person(_) => Err(DataError::at(
                path,
                line,
                format!("`{id}` is a person, expected an enterprise"),
            )),
        }
    }
}

/// Loads and validates a data directory.
pub fn load_dataset(dir: &Path) -> Result<Dataset, DataError> {
    let kg = load_ekg(dir)?;
    let path = dir.join(EMBEDDINGS);
    let supplement = if path.exists() {
        Some(load_embeddings(&path, &kg)?)
    } else {
        None
    };
    Ok(Dataset { kg, supplement })
}

pub fn load_ekg(dir: &Path) -> Result<EnterpriseKg, DataError> {
    let splits_path = dir.join(SPLITS);
    let text = fs::read_to_string(&splits_path)
        .map_err(|e| DataError::file(&splits_path, format!("cannot open: {e}")))?;
    let splits: SplitsRecord = serde_json::from_str(&text)
        .map_err(|e| DataError::at(&splits_path, e.line(), e.to_string()))?;
    let snapshot_date = splits.snapshot_date.parse().map_err(|_| {
        DataError::file(
            &splits_path,
            format!("malformed snapshot_date `{}`", splits.snapshot_date),
        )
    })?;

    let (enterprises, persons, ids) = load_nodes(&dir.join(NODES))?;
    let mut kg = EnterpriseKg {
        enterprises,
        persons,
        edges: load_edges(&dir.join(EDGES), &ids)?,
        hyperedges: load_hyperedges(&dir.join(HYPEREDGES), &ids)?,
        splits: Splits::default(),
        snapshot_date,
    };
    load_lawsuits(&dir.join(LAWSUITS), &ids, &mut kg)?;

    let mut seen = HashMap::new();
    for (name, ids_in, target) in [
        ("train", &splits.train, &mut kg.splits.train),
        ("val", &splits.val, &mut kg.splits.val),
        ("test", &splits.test, &mut kg.splits.test),
    ] {
        for id in ids_in {
            let i = match ids.index.get(id) {
                Some(NodeRef::Enterprise(i)) => *i,
                Some(NodeRef::Person(_)) => {
                    return Err(DataError::file(
                        &splits_path,
                        format!("{name} split lists person `{id}`"),
                    ))
                }
                None => {
                    return Err(DataError::file(
                        &splits_path,
                        format!("{name} split: unknown node id `{id}`"),
                    ))
                }
            };
            if let Some(other) = seen.insert(i, name) {
                return Err(DataError::file(
                    &splits_path,
                    format!("`{id}` is in both {other} and {name}"),
                ));
            }
            if kg.enterprises[i].label.is_none() {
                return Err(DataError::file(
                    &splits_path,
                    format!("{name} split lists unlabeled enterprise `{id}`"),
                ));
            }
            target.push(i);
        }
    }
    kg.validate()
        .map_err(|e| DataError::file(dir, e.to_string()))?;
    Ok(kg)
}

fn load_nodes(path: &Path) -> Result<(Vec<Enterprise>, Vec<Person>, Ids), DataError> {
    let mut enterprises = Vec::new();
    let mut persons = Vec::new();
    let mut index = HashMap::new();
    for (line, r) in read_jsonl::<NodeRecord>(path)? {
        let kind = NodeKind::parse(&r.kind)
            .map_err(|_| DataError::at(path, line, format!("unknown node kind `{}`", r.kind)))?;
        let node = match kind {
            NodeKind::Enterprise => {
                let a = r.attrs.ok_or_else(|| {
                    DataError::at(path, line, format!("enterprise `{}` has no attrs", r.id))
                })?;
                for (name, v) in [
                    ("registered_capital", a.registered_capital),
                    ("paid_in_capital", a.paid_in_capital),
                ] {
                    if !(v.is_finite() && v >= 0.0) {
                        return Err(DataError::at(
                            path,
                            line,
                            format!("{name} must be finite and >= 0, got {v}"),
                        ));
                    }
                }
                let label = match r.label {
                    None => None,
                    Some(bit) => Some(Label::from_bit(bit).ok_or_else(|| {
                        DataError::at(path, line, format!("label must be 0, 1 or null, got {bit}"))
                    })?),
                };
                let observation_time = match &r.observation_time {
                    Some(raw) => Some(parse_date(path, line, raw)?),
                    None => None,
                };
                enterprises.push(Enterprise {
                    id: r.id.clone(),
                    attrs: Attributes {
                        established_months: a.established_time,
                        registered_capital: a.registered_capital,
                        paid_in_capital: a.paid_in_capital,
                    },
                    lawsuits: Vec::new(),
                    label,
                    observation_time,
                });
                NodeRef::Enterprise(enterprises.len() - 1)
            }
            NodeKind::Person => {
                if r.attrs.is_some() || r.label.is_some() || r.observation_time.is_some() {
                    return Err(DataError::at(
                        path,
                        line,
                        format!("person `{}` carries enterprise fields", r.id),
                    ));
                }
                persons.push(Person { id: r.id.clone() });
                NodeRef::Person(persons.len() - 1)
            }
        };
        if index.insert(r.id.clone(), node).is_some() {
            return Err(DataError::at(
                path,
                line,
                format!("duplicate node id `{}`", r.id),
            ));
        }
    }
    Ok((enterprises, persons, Ids { index }))
}

fn load_edges(path: &Path, ids: &Ids) -> Result<Vec<HeteroEdge>, DataError> {
    let mut edges = Vec::new();
    for (line, r) in read_jsonl::<EdgeRecord>(path)? {
        let relation = Relation::parse(&r.rel)
            .map_err(|_| DataError::at(path, line, format!("unknown relation `{}`", r.rel)))?;
        match (relation.is_weighted(), r.weight) {
            (true, None) => {
                return Err(DataError::at(
                    path,
                    line,
                    "holder_investor edge without weight",
                ))
            }
            (true, Some(w)) if !(w.is_finite() && w > 0.0) => {
                return Err(DataError::at(
                    path,
                    line,
                    format!("weight must be positive, got {w}"),
                ))
            }
            (false, Some(_)) => {
                return Err(DataError::at(
                    path,
                    line,
                    format!("{} edges carry no weight", relation.as_str()),
                ))
            }
            _ => {}
        }
        edges.push(HeteroEdge {
            src: ids.resolve(path, line, &r.src)?,
            dst: ids.resolve(path, line, &r.dst)?,
            relation,
            weight: r.weight,
        });
    }
    Ok(edges)
}

fn load_hyperedges(path: &Path, ids: &Ids) -> Result<Vec<Hyperedge>, DataError> {
    let mut out = Vec::new();
    for (line, r) in read_jsonl::<HyperedgeRecord>(path)? {
        let kind = HyperedgeType::parse(&r.kind).map_err(|_| {
            DataError::at(path, line, format!("unknown hyperedge type `{}`", r.kind))
        })?;
        if r.members.is_empty() {
            return Err(DataError::at(path, line, "hyperedge without members"));
        }
        let members = r
            .members
            .iter()
            .map(|m| ids.enterprise(path, line, m))
            .collect::<Result<_, _>>()?;
        out.push(Hyperedge { kind, members });
    }
    Ok(out)
}

fn load_lawsuits(path: &Path, ids: &Ids, kg: &mut EnterpriseKg) -> Result<(), DataError> {
    for (line, r) in read_jsonl::<LawsuitRecord>(path)? {
        let owner = ids.enterprise(path, line, &r.enterprise)?;
        let date = parse_date(path, line, &r.date)?;
        if date < earliest_lawsuit_date() || date > kg.snapshot_date {
            return Err(DataError::at(
                path,
                line,
                format!(
                    "lawsuit date {date} outside [2000-01-01, {}]",
                    kg.snapshot_date
                ),
            ));
        }
        let court = CourtLevel::parse(&r.court)
            .map_err(|_| DataError::at(path, line, format!("unknown court level `{}`", r.court)))?;
        let verdict = Verdict::parse(&r.verdict)
            .map_err(|_| DataError::at(path, line, format!("unknown verdict `{}`", r.verdict)))?;
        kg.enterprises[owner].lawsuits.push(Lawsuit {
            cause: Cause::parse(&r.cause),
            court,
            verdict,
            date,
        });
    }
    Ok(())
}

fn load_embeddings(
    path: &Path,
    kg: &EnterpriseKg,
) -> Result<BTreeMap<String, Vec<f64>>, DataError> {
    let known: HashMap<&str, ()> = kg
        .enterprises
        .iter()
        .map(|e| e.id.as_str())
        .chain(kg.persons.iter().map(|p| p.id.as_str()))
        .map(|id| (id, ()))
        .collect();
    let mut out = BTreeMap::new();
    let mut width = None;
    for (line, r) in read_jsonl::<EmbeddingRecord>(path)? {
        if !known.contains_key(r.id.as_str()) {
            return Err(DataError::at(
                path,
                line,
                format!("unknown node id `{}`", r.id),
            ));
        }
        if *width.get_or_insert(r.vector.len()) != r.vector.len() {
            return Err(DataError::at(path, line, "embedding widths differ"));
        }
        if r.vector.iter().any(|v| !v.is_finite()) {
            return Err(DataError::at(path, line, "embedding is not finite"));
        }
        if out.insert(r.id.clone(), r.vector).is_some() {
            return Err(DataError::at(
                path,
                line,
                format!("duplicate embedding for `{}`", r.id),
            ));
        }
    }
    Ok(out)
}

fn node_id(kg: &EnterpriseKg, node: NodeRef) -> &str {
    match node {
        NodeRef::Enterprise(i) => &kg.enterprises[i].id,
        NodeRef::Person(p) => &kg.persons[p].id,
    }
}

fn write_lines<T: Serialize>(
    path: &Path,
    records: impl IntoIterator<Item = T>,
) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut w, &r)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

/// Writes the five schema files into `dir`, creating it if needed.
/// Enterprises come before persons, and every list keeps its order, so
/// loading the result gives back an equal graph.
pub fn write_ekg(kg: &EnterpriseKg, dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let nodes = kg
        .enterprises
        .iter()
        .map(|e| NodeRecord {
            id: e.id.clone(),
            kind: NodeKind::Enterprise.as_str().into(),
            attrs: Some(AttrsRecord {
                established_time: e.attrs.established_months,
                registered_capital: e.attrs.registered_capital,
                paid_in_capital: e.attrs.paid_in_capital,
            }),
            label: e.label.map(Label::bit),
            observation_time: e.observation_time.map(|d| d.to_string()),
        })
        .chain(kg.persons.iter().map(|p| NodeRecord {
            id: p.id.clone(),
            kind: NodeKind::Person.as_str().into(),
            attrs: None,
            label: None,
            observation_time: None,
        }));
    let edges = kg.edges.iter().map(|e| EdgeRecord {
        src: node_id(kg, e.src).into(),
        dst: node_id(kg, e.dst).into(),
        rel: e.relation.as_str().into(),
        weight: e.weight,
    });
    let hyperedges = kg.hyperedges.iter().map(|h| HyperedgeRecord {
        kind: h.kind.as_str().into(),
        members: h
            .members
            .iter()
            .map(|&m| kg.enterprises[m].id.clone())
            .collect(),
    });
    let lawsuits = kg.enterprises.iter().flat_map(|e| {
        e.lawsuits.iter().map(move |l| LawsuitRecord {
            enterprise: e.id.clone(),
            cause: l.cause.as_str().into(),
            court: l.court.as_str().into(),
            verdict: l.verdict.as_str().into(),
            date: l.date.to_string(),
        })
    });
    let ids = |list: &[usize]| list.iter().map(|&i| kg.enterprises[i].id.clone()).collect();
    let splits = SplitsRecord {
        train: ids(&kg.splits.train),
        val: ids(&kg.splits.val),
        test: ids(&kg.splits.test),
        snapshot_date: kg.snapshot_date.to_string(),
    };

    let paths: Vec<PathBuf> = [NODES, EDGES, HYPEREDGES, LAWSUITS, SPLITS]
        .iter()
        .map(|f| dir.join(f))
        .collect();
    write_lines(&paths[0], nodes)?;
    write_lines(&paths[1], edges)?;
    write_lines(&paths[2], hyperedges)?;
    write_lines(&paths[3], lawsuits)?;
    let mut text = serde_json::to_string_pretty(&splits)?;
    text.push('\n');
    fs::write(&paths[4], text)?;
    Ok(paths)
}

pub fn write_embeddings(path: &Path, vectors: &BTreeMap<String, Vec<f64>>) -> std::io::Result<()> {
    write_lines(
        path,
        vectors.iter().map(|(id, v)| EmbeddingRecord {
            id: id.clone(),
            vector: v.clone(),
        }),
    )
}
