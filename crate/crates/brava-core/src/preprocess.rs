//! Pruning of nodes that provably lie on no shortest path, and reinsertion
//! of their scores into a full-graph ranking.
//!
//! Two removal rules, both evaluated in a single pass over the original
//! graph (no fixpoint iteration — re-running on the reduced graph could
//! remove nodes whose zero-betweenness guarantee only held originally):
//!
//! 1. fewer than two distinct neighbors (isolated or leaf);
//! 2. the neighborhood forms a clique. For directed graphs the condition is
//!    checked on exactly the 2-hop paths through the node: every ordered
//!    pair `(x, y)` with arcs `x -> v` and `v -> y`, `x != y`, must also have
//!    the arc `x -> y`.

use crate::error::{Error, Result};
use crate::graph::Graph;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RemovalReason {
    Leaf,
    CliqueNeighborhood,
}

impl RemovalReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            RemovalReason::Leaf => "leaf",
            RemovalReason::CliqueNeighborhood => "clique-neighborhood",
        }
    }
}

/// Outcome of [`prune`]: the reduced graph plus both index maps and the
/// removal log. `kept` and `removed` partition the original node set.
#[derive(Debug, Clone)]
pub struct PruneResult {
    pub reduced: Graph,
    /// Reduced index -> original index.
    pub kept: Vec<usize>,
    /// Original index -> reduced index; `None` for removed nodes.
    pub old_to_new: Vec<Option<usize>>,
    /// Removed original indices (ascending) with the rule that fired.
    pub removed: Vec<(usize, RemovalReason)>,
}

impl PruneResult {
    /// CSV lines "id,reason" using original (pre-compaction) node ids.
    pub fn removal_report_csv(&self, original: &Graph) -> String {
        let mut out = String::from("id,reason\n");
        for &(v, reason) in &self.removed {
            out.push_str(&format!("{},{}\n", original.original_id(v), reason.as_str()));
        }
        out
    }
}

/// Remove nodes guaranteed to have zero betweenness; the reduced graph is the
/// induced subgraph on the survivors.
pub fn prune(g: &Graph) -> PruneResult {
    let n = g.node_count();
    let gt = g.transpose();

    let check = |v: usize| -> Option<RemovalReason> {
        let out = g.neighbors(v);
        let incoming = gt.neighbors(v);
        if distinct_union_len(out, incoming) < 2 {
            return Some(RemovalReason::Leaf);
        }
        for &x in incoming {
            for &y in out {
                if x != y && !g.has_arc(x as usize, y as usize) {
                    return None;
                }
            }
        }
        Some(RemovalReason::CliqueNeighborhood)
    };

    #[cfg(feature = "parallel")]
    let flags: Vec<Option<RemovalReason>> = (0..n).into_par_iter().map(check).collect();
    #[cfg(not(feature = "parallel"))]
    let flags: Vec<Option<RemovalReason>> = (0..n).map(check).collect();

    let mut kept = Vec::new();
    let mut removed = Vec::new();
    for (v, flag) in flags.into_iter().enumerate() {
        match flag {
            Some(reason) => removed.push((v, reason)),
            None => kept.push(v),
        }
    }
    let (reduced, old_to_new) = g.induced_subgraph(&kept);
    PruneResult {
        reduced,
        kept,
        old_to_new,
        removed,
    }
}

/// Size of the union of two sorted id slices.
fn distinct_union_len(a: &[u32], b: &[u32]) -> usize {
    let (mut i, mut j, mut count) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        count += 1;
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    count + (a.len() - i) + (b.len() - j)
}

/// Expand reduced-graph scores to the full node set. Survivors keep their
/// scores; removed nodes all receive `min(reduced_scores) - 1`, ranking them
/// jointly last. With an empty reduced graph the sentinel is 0.
pub fn reinsert_scores(pr: &PruneResult, reduced_scores: &[f64]) -> Result<Vec<f64>> {
    if reduced_scores.len() != pr.reduced.node_count() {
        return Err(Error::Contract(format!(
            "reduced score length {} does not match reduced node count {}",
            reduced_scores.len(),
            pr.reduced.node_count()
        )));
    }
    let sentinel = reduced_scores
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let sentinel = if sentinel.is_finite() {
        sentinel - 1.0
    } else {
        0.0
    };
    let mut full = vec![sentinel; pr.old_to_new.len()];
    for (reduced_index, &original) in pr.kept.iter().enumerate() {
        full[original] = reduced_scores[reduced_index];
    }
    Ok(full)
}
