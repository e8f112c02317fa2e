//! Hierarchical attention over the heterogeneous enterprise/person graph.
//!
//! One block runs four steps:
//!
//! 1. type projection: `h' = Norm(h W_type)` with batch statistics per node type
//! 2. entity level, per relation: dimension-wise attention
//!    `alpha = softmax_j LeakyReLU([h'_i | h'_j] W1)` with `r_i = sum_j alpha * h'_j`
//!    for unweighted relations, and `eta = softmax_j(w_ij)` with
//!    `r_i = sum_j eta * h_j W2` for the weighted holder/investor relation
//! 3. relation level: `q = h' W_Q + b_Q`, `k = r W_K + b_K`,
//!    `beta = softmax_k(mu_k q.k / sqrt(d'))` over the relations a node has,
//!    `h~ = sum_k beta_k (r_k W_V + b_V)`
//! 4. residual: `z^ = eta_res * GELU(h') + h~`
//!
//! A relation where a node has no neighbors is left out of that node's
//! relation softmax; a node with no neighbors at all gets `h~ = 0`.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::ekg::{EnterpriseKg, NodeKind, Relation};
use crate::error::{Error, Result};
use crate::math;
use crate::model::TrainConfig;
use crate::numeric::{Index, Tape, Tensor, Var};
use crate::params::{Bound, ParamSpec};

/// An edge between global node indices (enterprises first, then persons).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GraphEdge {
    pub src: usize,
    pub dst: usize,
    pub relation: Relation,
    pub weight: Option<f64>,
}

/// Messages of one relation, `dst` receiving from `src`.
#[derive(Clone, Debug, PartialEq)]
pub struct RelationEdges {
    pub relation: Relation,
    pub dst: Index,
    pub src: Index,
    /// Raw edge weights as an `E x 1` column, for the weighted relation.
    pub weight: Option<Tensor>,
    /// Nodes receiving at least one message, ascending.
    pub present: Index,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HeterGraph {
    pub n_nodes: usize,
    pub n_enterprises: usize,
    /// Relations with at least one edge, in relation order.
    pub relations: Vec<RelationEdges>,
}

impl HeterGraph {
    /// Undirected edges send messages both ways unless `directed` is set.
    pub fn new(
        n_nodes: usize,
        n_enterprises: usize,
        edges: &[GraphEdge],
        directed: bool,
    ) -> Result<Self> {
        let mut relations = Vec::new();
        for &relation in Relation::ALL {
            let mut dst = Vec::new();
            let mut src = Vec::new();
            let mut weight = Vec::new();
            for e in edges.iter().filter(|e| e.relation == relation) {
                if e.src >= n_nodes || e.dst >= n_nodes {
                    return Err(Error::InvalidGraph(format!(
                        "{} edge {} -> {} outside {n_nodes} nodes",
                        relation.as_str(),
                        e.src,
                        e.dst
                    )));
                }
                let w = match (relation.is_weighted(), e.weight) {
                    (true, Some(w)) if w.is_finite() => w,
                    (true, _) => {
                        return Err(Error::InvalidGraph(format!(
                            "{} edge {} -> {} needs a finite weight",
                            relation.as_str(),
                            e.src,
                            e.dst
                        )))
                    }
                    (false, _) => 0.0,
                };
                dst.push(e.dst);
                src.push(e.src);
                weight.push(w);
                if !directed && e.src != e.dst {
                    dst.push(e.src);
                    src.push(e.dst);
                    weight.push(w);
                }
            }
            if dst.is_empty() {
                continue;
            }
            let present: BTreeSet<usize> = dst.iter().copied().collect();
            let k = weight.len();
            relations.push(RelationEdges {
                relation,
                dst: dst.into(),
                src: src.into(),
                weight: relation
                    .is_weighted()
                    .then(|| Tensor::matrix(k, 1, weight).expect("one weight per message")),
                present: present.into_iter().collect::<Vec<_>>().into(),
            });
        }
        Ok(Self {
            n_nodes,
            n_enterprises,
            relations,
        })
    }

    pub fn from_kg(kg: &EnterpriseKg, directed: bool) -> Result<Self> {
        let edges: Vec<GraphEdge> = kg
            .edges
            .iter()
            .map(|e| GraphEdge {
                src: kg.global_index(e.src),
                dst: kg.global_index(e.dst),
                relation: e.relation,
                weight: e.weight,
            })
            .collect();
        Self::new(kg.node_count(), kg.enterprises.len(), &edges, directed)
    }

    pub fn n_persons(&self) -> usize {
        self.n_nodes - self.n_enterprises
    }

    /// Nodes that receive no message under any relation.
    pub fn isolated(&self) -> Vec<usize> {
        let mut seen = vec![false; self.n_nodes];
        for r in &self.relations {
            for &v in r.present.iter() {
                seen[v] = true;
            }
        }
        (0..self.n_nodes).filter(|&v| !seen[v]).collect()
    }

    fn node_groups(&self) -> Vec<(NodeKind, usize, usize)> {
        let mut groups = Vec::new();
        if self.n_enterprises > 0 {
            groups.push((NodeKind::Enterprise, 0, self.n_enterprises));
        }
        if self.n_persons() > 0 {
            groups.push((NodeKind::Person, self.n_enterprises, self.n_nodes));
        }
        groups
    }
}

pub fn param_name(block: usize, rest: &str) -> String {
    format!("heter.{block}.{rest}")
}

fn rel_param(block: usize, relation: Relation, what: &str) -> String {
    format!("heter.{block}.{}.{what}", relation.as_str())
}

/// Parameters of every block for `graph`. Block 0 reads `input_dim`
/// features, later blocks read the previous block's output.
pub fn param_specs(config: &TrainConfig, graph: &HeterGraph) -> Vec<ParamSpec> {
    let d_out = config.output_dim;
    let mut specs = Vec::new();
    for block in 0..config.heter_blocks {
        let d_in = if block == 0 { config.input_dim } else { d_out };
        for (kind, _, _) in graph.node_groups() {
            let k = kind.as_str();
            specs.push(ParamSpec::glorot(
                param_name(block, &format!("W_type.{k}")),
                d_in,
                d_out,
            ));
            specs.push(ParamSpec::constant(
                param_name(block, &format!("bn_gamma.{k}")),
                &[d_out],
                1.0,
            ));
            specs.push(ParamSpec::constant(
                param_name(block, &format!("bn_beta.{k}")),
                &[d_out],
                0.0,
            ));
        }
        for rel in &graph.relations {
            let r = rel.relation;
            if r.is_weighted() {
                let rows = if config.weighted_uses_projected {
                    d_out
                } else {
                    d_in
                };
                specs.push(ParamSpec::glorot(rel_param(block, r, "W2"), rows, d_out));
            } else {
                specs.push(ParamSpec::glorot(
                    rel_param(block, r, "W1"),
                    2 * d_out,
                    d_out,
                ));
            }
            specs.push(ParamSpec::glorot(rel_param(block, r, "W_Q"), d_out, d_out));
            specs.push(ParamSpec::constant(
                rel_param(block, r, "b_Q"),
                &[d_out],
                0.0,
            ));
            specs.push(ParamSpec::glorot(rel_param(block, r, "W_K"), d_out, d_out));
            specs.push(ParamSpec::constant(
                rel_param(block, r, "b_K"),
                &[d_out],
                0.0,
            ));
            specs.push(ParamSpec::constant(rel_param(block, r, "mu"), &[], 1.0));
        }
        specs.push(ParamSpec::glorot(param_name(block, "W_V"), d_out, d_out));
        specs.push(ParamSpec::constant(param_name(block, "b_V"), &[d_out], 0.0));
        specs.push(ParamSpec::constant(param_name(block, "eta_res"), &[], 1.0));
    }
    specs
}

/// Normalized weights recorded during a forward pass, for inspection.
#[derive(Clone, Debug)]
pub struct EntityTrace {
    pub block: usize,
    pub relation: Relation,
    /// `alpha` (`E x d'`) for unweighted relations, `eta` (`E x 1`) otherwise.
    pub weights: Var,
    pub dst: Index,
}

#[derive(Clone, Debug, Default)]
pub struct HeterTrace {
    pub entity: Vec<EntityTrace>,
    /// `beta` per (node, relation) pair and the node of each pair.
    pub beta: Vec<(Var, Index)>,
    /// Nodes with no neighbor under any relation.
    pub isolated: Vec<usize>,
}

/// `Norm(h W_type)` with a separate map and batch statistics per node type.
pub fn project_nodes(
    tape: &mut Tape,
    h: Var,
    graph: &HeterGraph,
    params: &Bound,
    block: usize,
    config: &TrainConfig,
) -> Result<Var> {
    let groups = graph.node_groups();
    let mut parts = Vec::with_capacity(groups.len());
    for &(kind, start, end) in &groups {
        let k = kind.as_str();
        let rows = if groups.len() == 1 {
            h
        } else {
            tape.gather_rows(h, crate::intra::range_index(start, end))?
        };
        let mapped = tape.matmul(
            rows,
            params.var(&param_name(block, &format!("W_type.{k}")))?,
        )?;
        let out = if config.bn_identity {
            mapped
        } else {
            let gamma = params.var(&param_name(block, &format!("bn_gamma.{k}")))?;
            let beta = params.var(&param_name(block, &format!("bn_beta.{k}")))?;
            tape.batch_norm(mapped, gamma, beta, config.bn_eps)?
        };
        parts.push(out);
    }
    if parts.len() == 1 {
        Ok(parts[0])
    } else {
        tape.concat_rows(&parts)
    }
}

/// Dimension-wise neighbor attention. Returns `r` (`n x d'`, zero rows for
/// nodes without neighbors) and `alpha`.
pub fn entity_attend_unweighted(
    tape: &mut Tape,
    projected: Var,
    rel: &RelationEdges,
    w1: Var,
    slope: f64,
    n_nodes: usize,
) -> Result<(Var, Var)> {
    let hd = tape.gather_rows(projected, rel.dst.clone())?;
    let hs = tape.gather_rows(projected, rel.src.clone())?;
    let pair = tape.concat_cols(&[hd, hs])?;
    let logits = tape.matmul(pair, w1)?;
    let e = tape.leaky_relu(logits, slope)?;
    let alpha = tape.segment_softmax(e, rel.dst.clone(), n_nodes)?;
    let msg = tape.mul(alpha, hs)?;
    let r = tape.segment_sum(msg, rel.dst.clone(), n_nodes)?;
    Ok((r, alpha))
}

/// Edge-weight attention: `eta = softmax_j(w_ij)`, `r_i = sum_j eta * (x_j W2)`.
pub fn entity_attend_weighted(
    tape: &mut Tape,
    source: Var,
    rel: &RelationEdges,
    w2: Var,
    n_nodes: usize,
) -> Result<(Var, Var)> {
    let weight = rel.weight.clone().ok_or_else(|| {
        Error::InvalidGraph(format!(
            "{} messages carry no weights",
            rel.relation.as_str()
        ))
    })?;
    let raw = tape.constant(weight);
    let eta = tape.segment_softmax(raw, rel.dst.clone(), n_nodes)?;
    let mapped = tape.matmul(source, w2)?;
    let xs = tape.gather_rows(mapped, rel.src.clone())?;
    let msg = tape.mul_col(xs, eta)?;
    let r = tape.segment_sum(msg, rel.dst.clone(), n_nodes)?;
    Ok((r, eta))
}

/// Transformer-style mixing of the per-relation summaries. `summaries`
/// pairs each present relation with its `r`. Returns `h~` and `beta`.
pub fn relation_attend(
    tape: &mut Tape,
    projected: Var,
    summaries: &[(&RelationEdges, Var)],
    params: &Bound,
    block: usize,
    config: &TrainConfig,
    n_nodes: usize,
) -> Result<(Var, Option<(Var, Index)>)> {
    if summaries.is_empty() {
        let zeros = Tensor::zeros(&[n_nodes, config.output_dim]);
        return Ok((tape.constant(zeros), None));
    }
    let inv_sqrt = 1.0 / math::sqrt(config.output_dim as f64);
    let w_v = params.var(&param_name(block, "W_V"))?;
    let b_v = params.var(&param_name(block, "b_V"))?;
    let mut scores = Vec::with_capacity(summaries.len());
    let mut values = Vec::with_capacity(summaries.len());
    let mut owner = Vec::new();
    for &(rel, r) in summaries {
        let rp = |what: &str| params.var(&rel_param(block, rel.relation, what));
        let hp = tape.gather_rows(projected, rel.present.clone())?;
        let rr = tape.gather_rows(r, rel.present.clone())?;
        let q = tape.matmul(hp, rp("W_Q")?)?;
        let q = tape.add_row(q, rp("b_Q")?)?;
        let k = tape.matmul(rr, rp("W_K")?)?;
        let k = tape.add_row(k, rp("b_K")?)?;
        let qk = tape.mul(q, k)?;
        let g = tape.row_sum(qk)?;
        let g = tape.scale(g, rp("mu")?)?;
        scores.push(tape.affine(g, inv_sqrt, 0.0)?);
        let v = tape.matmul(rr, w_v)?;
        values.push(tape.add_row(v, b_v)?);
        owner.extend(rel.present.iter().copied());
    }
    let owner: Index = owner.into();
    let g = tape.concat_rows(&scores)?;
    let v = tape.concat_rows(&values)?;
    let beta = tape.segment_softmax(g, owner.clone(), n_nodes)?;
    let weighted = tape.mul_col(v, beta)?;
    let mixed = tape.segment_sum(weighted, owner.clone(), n_nodes)?;
    Ok((mixed, Some((beta, owner))))
}

/// Full heterogeneous encoder over all nodes, `n x output_dim`.
pub fn heter_encode(
    tape: &mut Tape,
    h: Var,
    graph: &HeterGraph,
    params: &Bound,
    config: &TrainConfig,
) -> Result<(Var, HeterTrace)> {
    let n = graph.n_nodes;
    let mut trace = HeterTrace {
        isolated: graph.isolated(),
        ..HeterTrace::default()
    };
    let mut input = h;
    for block in 0..config.heter_blocks {
        let projected = project_nodes(tape, input, graph, params, block, config)?;
        let mut summaries = Vec::with_capacity(graph.relations.len());
        for rel in &graph.relations {
            let (r, weights) = if rel.relation.is_weighted() {
                let source = if config.weighted_uses_projected {
                    projected
                } else {
                    input
                };
                let w2 = params.var(&rel_param(block, rel.relation, "W2"))?;
                entity_attend_weighted(tape, source, rel, w2, n)?
            } else {
                let w1 = params.var(&rel_param(block, rel.relation, "W1"))?;
                entity_attend_unweighted(tape, projected, rel, w1, config.leaky_slope, n)?
            };
            trace.entity.push(EntityTrace {
                block,
                relation: rel.relation,
                weights,
                dst: rel.dst.clone(),
            });
            summaries.push((rel, r));
        }
        let (mixed, beta) = relation_attend(tape, projected, &summaries, params, block, config, n)?;
        if let Some(b) = beta {
            trace.beta.push(b);
        }
        let act = tape.gelu(projected, config.gelu)?;
        let residual = tape.scale(act, params.var(&param_name(block, "eta_res"))?)?;
        input = tape.add(residual, mixed)?;
    }
    Ok((input, trace))
}
