//! Explaining node-classification GNNs with game-theoretic interactions.
//!
//! The pipeline: generate or load a [`datasets::LabeledGraph`], train a
//! [`gnn::ModelWeights`] black box, then grow an explanation edge by edge
//! with [`explainer::explain`], scoring each candidate coalition by the
//! strength of its positive and negative interactions.

// NaN-rejecting range checks read as `!(x > 0.0)` on purpose
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod datasets;
pub mod dot;
pub mod error;
pub mod explainer;
pub mod gnn;
pub mod graph;
pub mod interaction;
pub mod metrics;
pub mod record;
pub mod seed;
pub mod shapley;

pub use error::{Error, Result};
