//! Graph-centrality toolkit: rank nodes by betweenness centrality with a
//! lightweight dual-direction message-passing model.
//!
//! The crate covers the full pipeline: CSR graphs with edge-list I/O
//! ([`graph`]), exact Brandes betweenness and degree-mass features
//! ([`centrality`]), shortest-path-preserving pruning ([`preprocess`]),
//! synthetic training-graph generators ([`synth`]), the ranking model with
//! hand-rolled reverse-mode gradients ([`model`], [`train`]) and ranking
//! metrics ([`eval`]).
//!
//! The `parallel` feature (on by default) backs the hot kernels with rayon.
//! Parallel results are identical to the sequential fallback run to run and
//! across thread counts: reductions happen in fixed chunk order and all
//! per-pair randomness is counter-based. The `*_seq` twins of the heavy
//! kernels stay public so benchmarks can compare both paths.

pub mod centrality;
pub mod error;
pub mod eval;
pub mod graph;
mod linalg;
pub mod model;
pub mod preprocess;
pub mod synth;
pub mod train;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Error, Result};
