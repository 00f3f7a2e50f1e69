//! Shared helpers for unit tests. Compiled only under `cfg(test)`.

use crate::graph::{build_graph, EdgeList, Graph};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Erdős–Rényi graph; disconnected outcomes are intentional.
pub(crate) fn random_graph(rng: &mut ChaCha8Rng, n: usize, p: f64, directed: bool) -> Graph {
    let mut edges = Vec::new();
    for u in 0..n as u64 {
        for v in 0..n as u64 {
            if u != v && (directed || u < v) && rng.gen::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    build_graph(&EdgeList::new(edges, directed))
}
