//! Typed hypergraph convolution.
//!
//! For each hyperedge type the normalized propagation operator is
//!
//! ```text
//! Theta = Dv^{-1/2} H W De^{-1} H^T Dv^{-1/2}
//! ```
//!
//! with `W` a diagonal hyperedge weight (the identity by default). A layer
//! maps features first and then mixes nodes, `(I - Theta)(X W_hp)` in the
//! default form or `Theta (X W_hp)` in the classical one. Types run their
//! own layer stacks from the shared input and are mixed by learned scalars.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::ekg::{EnterpriseKg, HyperedgeType, IncidenceMatrix};
use crate::error::{domain, Result};
use crate::math;
use crate::model::{ConvForm, HyperVariant, TrainConfig};
use crate::numeric::{LinearOperator, Tape, Tensor, Var};
use crate::params::Bound;

/// `Theta` applied through membership lists, never materialized.
#[derive(Clone, Debug, PartialEq)]
pub struct ThetaOperator {
    n: usize,
    members: Vec<Vec<usize>>,
    /// `w_e / De(e)` per hyperedge.
    edge_scale: Vec<f64>,
    inv_sqrt_dv: Vec<f64>,
}

impl ThetaOperator {
    pub fn new(incidence: &IncidenceMatrix) -> Self {
        Self::with_edge_weights(incidence, &vec![1.0; incidence.cols()])
            .expect("unit weights are valid")
    }

    pub fn with_edge_weights(incidence: &IncidenceMatrix, weights: &[f64]) -> Result<Self> {
        if weights.len() != incidence.cols() {
            return Err(domain(
                "theta",
                format!(
                    "{} weights for {} hyperedges",
                    weights.len(),
                    incidence.cols()
                ),
            ));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(domain(
                "theta",
                "hyperedge weights must be finite and non-negative",
            ));
        }
        Ok(Self {
            n: incidence.rows(),
            members: incidence.members.clone(),
            edge_scale: weights
                .iter()
                .zip(&incidence.edge_degree)
                .map(|(w, d)| w / d)
                .collect(),
            inv_sqrt_dv: incidence
                .node_degree
                .iter()
                .map(|d| 1.0 / math::sqrt(*d))
                .collect(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Dense `n x n` matrix, summed hyperedge by hyperedge.
    pub fn dense(&self) -> Tensor {
        let mut t = Tensor::zeros(&[self.n, self.n]);
        for (m, &s) in self.members.iter().zip(&self.edge_scale) {
            for &u in m {
                for &v in m {
                    let add = s * self.inv_sqrt_dv[u] * self.inv_sqrt_dv[v];
                    let old = t.get(u, v);
                    t.set(u, v, old + add);
                }
            }
        }
        t
    }
}

impl LinearOperator for ThetaOperator {
    fn rows(&self) -> usize {
        self.n
    }

    fn cols(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &Tensor) -> Tensor {
        let c = x.cols();
        let mut out = Tensor::zeros(&[self.n, c]);
        let mut acc = vec![0.0; c];
        for (m, &s) in self.members.iter().zip(&self.edge_scale) {
            acc.iter_mut().for_each(|a| *a = 0.0);
            for &v in m {
                let k = self.inv_sqrt_dv[v];
                for (a, x) in acc.iter_mut().zip(x.row(v)) {
                    *a += k * x;
                }
            }
            for &u in m {
                let k = s * self.inv_sqrt_dv[u];
                let row = &mut out.data_mut()[u * c..(u + 1) * c];
                for (o, a) in row.iter_mut().zip(&acc) {
                    *o += k * a;
                }
            }
        }
        out
    }

    /// `Theta` is symmetric for any diagonal hyperedge weight.
    fn apply_transpose(&self, x: &Tensor) -> Tensor {
        self.apply(x)
    }
}

/// Dense `Theta` for one incidence matrix; `weights` defaults to all ones.
pub fn build_theta(incidence: &IncidenceMatrix, weights: Option<&[f64]>) -> Result<Tensor> {
    let op = match weights {
        Some(w) => ThetaOperator::with_edge_weights(incidence, w)?,
        None => ThetaOperator::new(incidence),
    };
    Ok(op.dense())
}

/// One operator per hyperedge type present in the graph, in type order.
#[derive(Clone, Debug, Default)]
pub struct HyperGraph {
    pub types: Vec<(String, Arc<ThetaOperator>)>,
    pub n_enterprises: usize,
}

impl HyperGraph {
    pub fn from_kg(kg: &EnterpriseKg, variant: HyperVariant) -> Result<Self> {
        let n = kg.enterprises.len();
        let mut types = Vec::new();
        match variant {
            HyperVariant::Typed => {
                for kind in kg.hyperedge_types() {
                    let inc = crate::ekg::build_incidence(kg, kind)?;
                    types.push((
                        kind.as_str().to_string(),
                        Arc::new(ThetaOperator::new(&inc)),
                    ));
                }
            }
            HyperVariant::Merged => {
                if !kg.hyperedges.is_empty() {
                    let raw: Vec<Vec<usize>> =
                        kg.hyperedges.iter().map(|h| h.members.clone()).collect();
                    // Kind is only a label here; membership spans every type.
                    let inc = IncidenceMatrix::from_members(HyperedgeType::Industry, n, &raw)?;
                    types.push((String::from("merged"), Arc::new(ThetaOperator::new(&inc))));
                }
            }
        }
        Ok(Self {
            types,
            n_enterprises: n,
        })
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }
}

/// Parameter name of the layer-`l` feature map.
pub fn w_hp_name(layer: usize) -> String {
    format!("hyper.W_hp.{layer}")
}

pub fn epsilon_name(kind: &str) -> String {
    format!("hyper.epsilon.{kind}")
}

/// Node mixing of already feature-mapped rows `y`.
fn propagate(tape: &mut Tape, y: Var, theta: &Arc<ThetaOperator>, form: ConvForm) -> Result<Var> {
    let mixed = tape.linear(y, theta.clone())?;
    match form {
        ConvForm::Laplacian => tape.sub(y, mixed),
        ConvForm::Classical => Ok(mixed),
    }
}

/// One layer: `(I - Theta)(x W)` or `Theta (x W)`.
pub fn hyper_conv_layer(
    tape: &mut Tape,
    x: Var,
    theta: &Arc<ThetaOperator>,
    w: Var,
    form: ConvForm,
) -> Result<Var> {
    let y = tape.matmul(x, w)?;
    propagate(tape, y, theta, form)
}

/// Type-mixed hypergraph representation `z`, `n_e x output_dim`. With no
/// hyperedges at all the branch returns zeros.
pub fn hyper_encode(
    tape: &mut Tape,
    x: Var,
    graph: &HyperGraph,
    params: &Bound,
    config: &TrainConfig,
) -> Result<Var> {
    if graph.is_empty() {
        return Ok(tape.constant(Tensor::zeros(&[graph.n_enterprises, config.output_dim])));
    }
    // The first feature map is shared by every type.
    let first = tape.matmul(x, params.var(&w_hp_name(0))?)?;
    let mut total: Option<Var> = None;
    for (kind, theta) in &graph.types {
        let mut cur = propagate(tape, first, theta, config.conv_form)?;
        for layer in 1..config.hyper_layers {
            if config.hyper_activation {
                cur = tape.gelu(cur, config.gelu)?;
            }
            cur = hyper_conv_layer(
                tape,
                cur,
                theta,
                params.var(&w_hp_name(layer))?,
                config.conv_form,
            )?;
        }
        let weighted = tape.scale(cur, params.var(&epsilon_name(kind))?)?;
        total = Some(match total {
            None => weighted,
            Some(t) => tape.add(t, weighted)?,
        });
    }
    Ok(total.expect("at least one type"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::ParamStore;

    fn inc(n: usize, edges: &[&[usize]]) -> IncidenceMatrix {
        let raw: Vec<Vec<usize>> = edges.iter().map(|e| e.to_vec()).collect();
        IncidenceMatrix::from_members(HyperedgeType::Industry, n, &raw).unwrap()
    }

    #[test]
    fn pair_theta() {
        let t = build_theta(&inc(2, &[&[0, 1]]), None).unwrap();
        assert_eq!(t.data(), &[0.5, 0.5, 0.5, 0.5]);
    }

    #[test]
    fn isolated_row_is_zero() {
        let t = build_theta(&inc(3, &[&[0, 1]]), None).unwrap();
        assert!(t.row(2).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn operator_matches_dense() {
        let h = inc(5, &[&[0, 1, 2], &[2, 3], &[1, 4], &[0, 4]]);
        let op = ThetaOperator::new(&h);
        let dense = op.dense();
        let x = Tensor::matrix(5, 2, (0..10).map(|k| f64::from(k) * 0.3 - 1.0).collect()).unwrap();
        assert!(op.apply(&x).max_abs_diff(&dense.matmul(&x).unwrap()) < 1e-14);
        assert!(dense.max_abs_diff(&dense.transpose()) < 1e-15);
    }

    fn layer_out(theta: Tensor, x: &Tensor, form: ConvForm) -> Tensor {
        // Hand-rolled operator wrapping a dense matrix.
        #[derive(Debug)]
        struct Dense(Tensor);
        impl LinearOperator for Dense {
            fn rows(&self) -> usize {
                self.0.rows()
            }
            fn cols(&self) -> usize {
                self.0.cols()
            }
            fn apply(&self, x: &Tensor) -> Tensor {
                self.0.matmul(x).unwrap()
            }
            fn apply_transpose(&self, x: &Tensor) -> Tensor {
                self.0.transpose().matmul(x).unwrap()
            }
        }
        let mut tape = Tape::new();
        let xv = tape.constant(x.clone());
        let w = tape.constant(Tensor::identity(x.cols()));
        let y = tape.matmul(xv, w).unwrap();
        let mixed = tape.linear(y, Arc::new(Dense(theta))).unwrap();
        let out = match form {
            ConvForm::Laplacian => tape.sub(y, mixed).unwrap(),
            ConvForm::Classical => mixed,
        };
        tape.value(out).clone()
    }

    #[test]
    fn layer_edge_cases() {
        let x = Tensor::matrix(3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let zero = layer_out(Tensor::zeros(&[3, 3]), &x, ConvForm::Laplacian);
        assert_eq!(zero, x);
        let ident = layer_out(Tensor::identity(3), &x, ConvForm::Laplacian);
        assert!(ident.data().iter().all(|&v| v == 0.0));
    }

    fn single_type_params(eps: f64, layers: usize, d: usize) -> ParamStore {
        let mut p = ParamStore::new();
        for l in 0..layers {
            let data = (0..d * d).map(|k| (k as f64 * 0.37).sin()).collect();
            p.insert(w_hp_name(l), Tensor::matrix(d, d, data).unwrap());
        }
        p.insert(epsilon_name("industry"), Tensor::scalar(eps));
        p.insert(epsilon_name("area"), Tensor::scalar(eps));
        p
    }

    #[test]
    fn encode_reduces_to_layer_for_one_type() {
        let h = inc(4, &[&[0, 1], &[1, 2, 3]]);
        let theta = Arc::new(ThetaOperator::new(&h));
        let graph = HyperGraph {
            types: vec![(String::from("industry"), theta.clone())],
            n_enterprises: 4,
        };
        let cfg = TrainConfig {
            hyper_layers: 1,
            output_dim: 3,
            ..TrainConfig::default()
        };
        let params = single_type_params(1.0, 1, 3);
        let mut tape = Tape::new();
        let bound = params.bind(&mut tape);
        let x = tape.constant(Tensor::matrix(4, 3, (0..12).map(f64::from).collect()).unwrap());
        let z = hyper_encode(&mut tape, x, &graph, &bound, &cfg).unwrap();
        let w = bound.var(&w_hp_name(0)).unwrap();
        let l = hyper_conv_layer(&mut tape, x, &theta, w, ConvForm::Laplacian).unwrap();
        assert!(tape.value(z).max_abs_diff(tape.value(l)) < 1e-12);
    }

    #[test]
    fn duplicated_type_with_half_weights() {
        let h = inc(4, &[&[0, 1], &[1, 2, 3]]);
        let theta = Arc::new(ThetaOperator::new(&h));
        let one = HyperGraph {
            types: vec![(String::from("industry"), theta.clone())],
            n_enterprises: 4,
        };
        let two = HyperGraph {
            types: vec![
                (String::from("industry"), theta.clone()),
                (String::from("area"), theta),
            ],
            n_enterprises: 4,
        };
        let cfg = TrainConfig {
            output_dim: 3,
            ..TrainConfig::default()
        };
        let x = Tensor::matrix(4, 3, (0..12).map(|k| f64::from(k) / 7.0).collect()).unwrap();
        let run = |graph: &HyperGraph, eps: f64| {
            let params = single_type_params(eps, 2, 3);
            let mut tape = Tape::new();
            let bound = params.bind(&mut tape);
            let xv = tape.constant(x.clone());
            let z = hyper_encode(&mut tape, xv, graph, &bound, &cfg).unwrap();
            tape.value(z).clone()
        };
        assert!(run(&one, 1.0).max_abs_diff(&run(&two, 0.5)) < 1e-12);
        assert!(run(&two, 0.0).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_epsilon_still_gets_gradient() {
        let h = inc(3, &[&[0, 1, 2]]);
        let graph = HyperGraph {
            types: vec![(String::from("industry"), Arc::new(ThetaOperator::new(&h)))],
            n_enterprises: 3,
        };
        let cfg = TrainConfig {
            output_dim: 2,
            ..TrainConfig::default()
        };
        let params = single_type_params(0.0, 2, 2);
        let mut tape = Tape::new();
        let bound = params.bind(&mut tape);
        let x = tape.constant(Tensor::matrix(3, 2, vec![1.0, -2.0, 0.5, 3.0, -1.0, 0.0]).unwrap());
        let z = hyper_encode(&mut tape, x, &graph, &bound, &cfg).unwrap();
        let s = tape.sum(z).unwrap();
        let grads = tape.backward(s).unwrap();
        let g = bound.gradients(&grads);
        let names = params.names();
        for (name, g) in names.iter().zip(&g) {
            if name.starts_with("hyper.W_hp") {
                assert!(g.data().iter().all(|&v| v == 0.0), "{name}");
            }
        }
        let eps_idx = names
            .iter()
            .position(|n| n == "hyper.epsilon.industry")
            .unwrap();
        assert!(g[eps_idx].item() != 0.0);
    }
}
