use alloc::vec;
use alloc::vec::Vec;

use super::{EnterpriseKg, HyperedgeType};
use crate::error::{Error, Result};
use crate::numeric::Tensor;

/// Node-by-hyperedge membership for one hyperedge type, kept as sorted
/// member lists rather than a dense 0/1 matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct IncidenceMatrix {
    pub kind: HyperedgeType,
    pub n_nodes: usize,
    /// Sorted, de-duplicated members of each hyperedge.
    pub members: Vec<Vec<usize>>,
    /// Hyperedge count per node, with isolated nodes patched to 1.
    pub node_degree: Vec<f64>,
    /// Member count per hyperedge.
    pub edge_degree: Vec<f64>,
    /// Nodes that belong to no hyperedge of this type.
    pub isolated: Vec<bool>,
}

impl IncidenceMatrix {
    /// Builds the matrix from raw member lists over `n_nodes` nodes.
    pub fn from_members(kind: HyperedgeType, n_nodes: usize, raw: &[Vec<usize>]) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::EmptyHyperedgeType(kind.as_str()));
        }
        let mut members = Vec::with_capacity(raw.len());
        let mut count = vec![0usize; n_nodes];
        for list in raw {
            let mut m = list.clone();
            m.sort_unstable();
            m.dedup();
            if m.is_empty() || m.last().is_some_and(|&v| v >= n_nodes) {
                return Err(Error::InvalidGraph(alloc::format!(
                    "{} hyperedge with no members or an out-of-range member",
                    kind.as_str()
                )));
            }
            for &v in &m {
                count[v] += 1;
            }
            members.push(m);
        }
        let isolated: Vec<bool> = count.iter().map(|&c| c == 0).collect();
        let node_degree = count.iter().map(|&c| c.max(1) as f64).collect();
        let edge_degree = members.iter().map(|m| m.len() as f64).collect();
        Ok(Self {
            kind,
            n_nodes,
            members,
            node_degree,
            edge_degree,
            isolated,
        })
    }

    pub fn rows(&self) -> usize {
        self.n_nodes
    }

    pub fn cols(&self) -> usize {
        self.members.len()
    }

    pub fn contains(&self, node: usize, edge: usize) -> bool {
        self.members[edge].binary_search(&node).is_ok()
    }

    /// Dense `n_nodes x n_edges` 0/1 matrix.
    pub fn dense(&self) -> Tensor {
        let mut t = Tensor::zeros(&[self.n_nodes, self.members.len()]);
        let cols = self.members.len();
        for (e, m) in self.members.iter().enumerate() {
            for &v in m {
                t.data_mut()[v * cols + e] = 1.0;
            }
        }
        t
    }
}

/// Incidence matrix over enterprises for one hyperedge type.
pub fn build_incidence(kg: &EnterpriseKg, kind: HyperedgeType) -> Result<IncidenceMatrix> {
    let raw: Vec<Vec<usize>> = kg
        .hyperedges
        .iter()
        .filter(|h| h.kind == kind)
        .map(|h| h.members.clone())
        .collect();
    IncidenceMatrix::from_members(kind, kg.enterprises.len(), &raw)
}
