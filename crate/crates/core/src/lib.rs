//! Allocation-only core of a graph learner for enterprise bankruptcy risk.
//!
//! The crate combines an enterprise's own risk signal (attributes and
//! litigation history) with contagion risk propagated over typed hyperedges
//! and a heterogeneous enterprise/person graph. Everything here is pure
//! computation: file formats, IO and the command-line driver live in the
//! `riskgraph` crate.
//!
//! Module map:
//!
//! * [`numeric`] dense tensors, a reverse-mode tape, Adam, cosine schedule, gradient checking
//! * [`ekg`] the enterprise knowledge graph, incidence matrices, lawsuit features, synthetic data
//! * [`stats`] point-biserial correlation, t-tests and the significance table
//! * [`intra`] the lawsuit/attribute encoder
//! * [`hyper`] typed hypergraph convolution
//! * [`heter`] hierarchical attention over the heterogeneous graph
//! * [`model`] fusion, prediction, loss, training and evaluation

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod ekg;
pub mod error;
pub mod heter;
pub mod hyper;
pub mod intra;
pub mod math;
pub mod model;
pub mod numeric;
pub mod params;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
