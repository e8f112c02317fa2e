//! Named trainable tensors and their binding onto a tape.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::math;
use crate::numeric::{Gradients, Tape, Tensor, Var};
use crate::rng;

/// How a parameter starts out.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Init {
    /// Uniform in `+-sqrt(6 / (fan_in + fan_out))`.
    Glorot,
    Constant(f64),
}

/// Name, shape and initializer of one parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub init: Init,
}

impl ParamSpec {
    pub fn glorot(name: impl Into<String>, rows: usize, cols: usize) -> Self {
        Self {
            name: name.into(),
            shape: alloc::vec![rows, cols],
            init: Init::Glorot,
        }
    }

    pub fn constant(name: impl Into<String>, shape: &[usize], value: f64) -> Self {
        Self {
            name: name.into(),
            shape: shape.to_vec(),
            init: Init::Constant(value),
        }
    }
}

/// Fresh parameters for `specs`. Each parameter draws from its own stream
/// keyed by name, so adding a parameter leaves the others unchanged.
pub fn init_params(specs: &[ParamSpec], seed: u64) -> ParamStore {
    let mut store = ParamStore::new();
    for spec in specs {
        let n: usize = spec.shape.iter().product();
        let data = match spec.init {
            Init::Constant(v) => alloc::vec![v; n],
            Init::Glorot => {
                let (fan_in, fan_out) = match spec.shape.as_slice() {
                    [r, c] => (*r, *c),
                    _ => (n, n),
                };
                let limit = math::sqrt(6.0 / (fan_in + fan_out).max(1) as f64);
                let mut r = rng::stream(seed, &alloc::format!("init.{}", spec.name));
                (0..n)
                    .map(|_| limit * (2.0 * r.random::<f64>() - 1.0))
                    .collect()
            }
        };
        let value = Tensor::new(spec.shape.clone(), data).expect("spec shape matches data");
        store.insert(spec.name.clone(), value);
    }
    store
}

/// Ordered collection of named parameters. Iteration follows insertion order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Tensor>,
    index: BTreeMap<String, usize>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts or replaces `name`.
    pub fn insert(&mut self, name: impl Into<String>, value: Tensor) {
        let name = name.into();
        if let Some(&i) = self.index.get(&name) {
            self.values[i] = value;
            return;
        }
        self.index.insert(name.clone(), self.names.len());
        self.names.push(name);
        self.values.push(value);
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.index.get(name).map(|&i| &self.values[i])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.index.get(name).map(|&i| &mut self.values[i])
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &[Tensor] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [Tensor] {
        &mut self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(&self.values)
    }

    /// Total number of scalar parameters.
    pub fn numel(&self) -> usize {
        self.values.iter().map(Tensor::len).sum()
    }

    /// Registers every parameter as a trainable leaf on `tape`.
    pub fn bind<'a>(&'a self, tape: &mut Tape) -> Bound<'a> {
        let vars = self.values.iter().map(|v| tape.param(v.clone())).collect();
        Bound { store: self, vars }
    }
}

/// Parameters of a [`ParamStore`] registered on one tape.
#[derive(Debug)]
pub struct Bound<'a> {
    store: &'a ParamStore,
    vars: Vec<Var>,
}

impl Bound<'_> {
    pub fn var(&self, name: &str) -> Result<Var> {
        self.store
            .index
            .get(name)
            .map(|&i| self.vars[i])
            .ok_or_else(|| Error::MissingParam(name.to_string()))
    }

    pub fn has(&self, name: &str) -> bool {
        self.store.contains(name)
    }

    /// Gradient per parameter in store order; parameters the root does not
    /// depend on get zeros.
    pub fn gradients(&self, grads: &Gradients) -> Vec<Tensor> {
        self.vars
            .iter()
            .zip(self.store.values())
            .map(|(&v, value)| {
                grads
                    .get(v)
                    .cloned()
                    .unwrap_or_else(|| Tensor::zeros(value.shape()))
            })
            .collect()
    }
}
