//! Exact betweenness centrality and multi-hop degree-mass features.
//!
//! Betweenness follows the ordered-pair convention: for every ordered source/
//! target pair `(s, t)` with `s != v != t`, node `v` accumulates the fraction
//! of shortest `s -> t` paths passing through it. No normalization is applied;
//! on undirected graphs each unordered pair contributes twice, a constant
//! factor that never changes rankings.
//!
//! Path counts are kept in `f64`; on large graphs they can exceed the exact
//! integer range of a 64-bit float, which bounds the precision of the
//! accumulated scores but not of the induced ranking in practice.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::graph::Graph;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Per-node betweenness scores, indexed like the graph.
pub type CentralityVector = Vec<f64>;

const BRUTE_FORCE_LIMIT: usize = 64;

/// Exact betweenness via Brandes' algorithm (one BFS plus a reverse
/// dependency-accumulation pass per source).
///
/// With the `parallel` feature the sources are processed in fixed chunks and
/// the per-chunk partial sums are reduced in chunk order, so the result is
/// identical run to run regardless of thread count.
pub fn brandes_betweenness(g: &Graph) -> CentralityVector {
    #[cfg(feature = "parallel")]
    {
        brandes_betweenness_par(g)
    }
    #[cfg(not(feature = "parallel"))]
    {
        brandes_betweenness_seq(g)
    }
}

/// Sequential Brandes. This is the fallback used when the `parallel` feature
/// is disabled; it stays public so benchmarks can compare both paths.
pub fn brandes_betweenness_seq(g: &Graph) -> CentralityVector {
    let n = g.node_count();
    let mut scores = vec![0.0; n];
    let mut workspace = BrandesWorkspace::new(n);
    for source in 0..n {
        accumulate_from_source(g, source, &mut workspace, &mut scores);
    }
    scores
}

#[cfg(feature = "parallel")]
pub fn brandes_betweenness_par(g: &Graph) -> CentralityVector {
    let n = g.node_count();
    if n == 0 {
        return Vec::new();
    }
    let chunk_count = n.min(64);
    let chunk_size = n.div_ceil(chunk_count);
    let partials: Vec<Vec<f64>> = (0..chunk_count)
        .into_par_iter()
        .map(|chunk| {
            let lo = chunk * chunk_size;
            let hi = ((chunk + 1) * chunk_size).min(n);
            let mut partial = vec![0.0; n];
            let mut workspace = BrandesWorkspace::new(n);
            for source in lo..hi {
                accumulate_from_source(g, source, &mut workspace, &mut partial);
            }
            partial
        })
        .collect();
    let mut scores = vec![0.0; n];
    for partial in partials {
        for (acc, value) in scores.iter_mut().zip(partial) {
            *acc += value;
        }
    }
    scores
}

struct BrandesWorkspace {
    dist: Vec<i32>,
    sigma: Vec<f64>,
    delta: Vec<f64>,
    preds: Vec<Vec<u32>>,
    queue: VecDeque<u32>,
    stack: Vec<u32>,
    /// Nodes reached from the previous source; cleared lazily so one BFS
    /// costs O(visited) rather than O(n) to reset.
    visited: Vec<u32>,
}

impl BrandesWorkspace {
    fn new(n: usize) -> Self {
        BrandesWorkspace {
            dist: vec![-1; n],
            sigma: vec![0.0; n],
            delta: vec![0.0; n],
            preds: vec![Vec::new(); n],
            queue: VecDeque::new(),
            stack: Vec::new(),
            visited: Vec::new(),
        }
    }

    fn reset(&mut self) {
        for &v in &self.visited {
            let v = v as usize;
            self.dist[v] = -1;
            self.sigma[v] = 0.0;
            self.delta[v] = 0.0;
            self.preds[v].clear();
        }
        self.visited.clear();
        self.stack.clear();
        self.queue.clear();
    }
}

fn accumulate_from_source(g: &Graph, source: usize, ws: &mut BrandesWorkspace, scores: &mut [f64]) {
    if g.out_degree(source) == 0 {
        return;
    }
    ws.reset();
    ws.dist[source] = 0;
    ws.sigma[source] = 1.0;
    ws.queue.push_back(source as u32);
    while let Some(v) = ws.queue.pop_front() {
        ws.stack.push(v);
        let dv = ws.dist[v as usize];
        let sv = ws.sigma[v as usize];
        for &w in g.neighbors(v as usize) {
            let w_us = w as usize;
            if ws.dist[w_us] < 0 {
                ws.dist[w_us] = dv + 1;
                ws.queue.push_back(w);
            }
            if ws.dist[w_us] == dv + 1 {
                ws.sigma[w_us] += sv;
                ws.preds[w_us].push(v);
            }
        }
    }
    while let Some(w) = ws.stack.pop() {
        let w_us = w as usize;
        let coefficient = (1.0 + ws.delta[w_us]) / ws.sigma[w_us];
        for &v in &ws.preds[w_us] {
            ws.delta[v as usize] += ws.sigma[v as usize] * coefficient;
        }
        if w_us != source {
            scores[w_us] += ws.delta[w_us];
        }
        ws.visited.push(w);
    }
}

/// Independent betweenness oracle: explicit shortest-path counting per
/// ordered pair, `sigma_st(v) = sigma_sv * sigma_vt` gated on
/// `dist(s,v) + dist(v,t) == dist(s,t)`. No dependency accumulation, so it
/// shares no code path with [`brandes_betweenness`].
///
/// Refuses graphs with more than 64 nodes.
pub fn brute_force_betweenness(g: &Graph) -> Result<CentralityVector> {
    let n = g.node_count();
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::OracleGuard {
            n,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    // dist[s][v], sigma[s][v] from a plain BFS per source.
    let mut dist = vec![vec![-1i32; n]; n];
    let mut sigma = vec![vec![0.0f64; n]; n];
    for s in 0..n {
        dist[s][s] = 0;
        sigma[s][s] = 1.0;
        let mut queue = VecDeque::new();
        queue.push_back(s);
        while let Some(v) = queue.pop_front() {
            for &w in g.neighbors(v) {
                let w = w as usize;
                if dist[s][w] < 0 {
                    dist[s][w] = dist[s][v] + 1;
                    queue.push_back(w);
                }
                if dist[s][w] == dist[s][v] + 1 {
                    sigma[s][w] += sigma[s][v];
                }
            }
        }
    }
    let mut scores = vec![0.0; n];
    for v in 0..n {
        for s in 0..n {
            if s == v || dist[s][v] < 0 {
                continue;
            }
            for t in 0..n {
                if t == s || t == v || dist[s][t] < 0 || dist[v][t] < 0 {
                    continue;
                }
                if dist[s][v] + dist[v][t] == dist[s][t] {
                    scores[v] += sigma[s][v] * sigma[v][t] / sigma[s][t];
                }
            }
        }
    }
    Ok(scores)
}

/// Degree-mass feature matrix: column `j` holds the `(j+1)`-th order degree
/// mass, the cumulative sum `(A^0 + ... + A^(j+1)) d` evaluated by running
/// accumulation of sparse mat-vec products.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeMassMatrix {
    n: usize,
    order: usize,
    /// Row-major `n x order`.
    values: Vec<f64>,
    degree: Vec<f64>,
}

impl DegreeMassMatrix {
    pub fn node_count(&self) -> usize {
        self.n
    }

    /// Hop order `m` (number of columns).
    pub fn order(&self) -> usize {
        self.order
    }

    /// Feature row of node `u`: `[d^(1)(u), ..., d^(m)(u)]`.
    pub fn row(&self, u: usize) -> &[f64] {
        &self.values[u * self.order..(u + 1) * self.order]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Raw degree vector the masses were seeded with (out-degrees of the
    /// supplied adjacency).
    pub fn degree(&self) -> &[f64] {
        &self.degree
    }

    #[cfg(test)]
    pub(crate) fn scaled(&self, factor: f64) -> DegreeMassMatrix {
        DegreeMassMatrix {
            n: self.n,
            order: self.order,
            values: self.values.iter().map(|&v| v * factor).collect(),
            degree: self.degree.iter().map(|&v| v * factor).collect(),
        }
    }
}

/// Degree masses of order `1..=m` for the supplied adjacency.
///
/// The seed vector is the out-degree (row sums) of `g`, so the in/out duality
/// is handled entirely by passing `g.transpose()`.
pub fn degree_mass(g: &Graph, m: usize) -> DegreeMassMatrix {
    degree_mass_with(g, m, spmv)
}

/// Sequential fallback, bitwise identical to [`degree_mass`]; public for
/// benchmarking.
pub fn degree_mass_seq(g: &Graph, m: usize) -> DegreeMassMatrix {
    degree_mass_with(g, m, spmv_seq)
}

fn degree_mass_with(
    g: &Graph,
    m: usize,
    spmv_fn: impl Fn(&Graph, &[f64], &mut [f64]),
) -> DegreeMassMatrix {
    assert!(m >= 1, "hop order must be at least 1");
    let n = g.node_count();
    let degree: Vec<f64> = (0..n).map(|u| g.out_degree(u) as f64).collect();
    let mut power = degree.clone(); // A^k d
    let mut running = degree.clone(); // (A^0 + ... + A^k) d
    let mut values = vec![0.0; n * m];
    let mut next = vec![0.0; n];
    for j in 0..m {
        spmv_fn(g, &power, &mut next);
        std::mem::swap(&mut power, &mut next);
        for u in 0..n {
            running[u] += power[u];
            values[u * m + j] = running[u];
        }
    }
    DegreeMassMatrix {
        n,
        order: m,
        values,
        degree,
    }
}

fn spmv_seq(g: &Graph, x: &[f64], out: &mut [f64]) {
    for (u, slot) in out.iter_mut().enumerate() {
        *slot = g.neighbors(u).iter().map(|&v| x[v as usize]).sum();
    }
}

/// `out[u] = sum of x[v] over out-neighbors v of u`, i.e. `out = A x` for the
/// stored adjacency. Row-parallel when the `parallel` feature is enabled;
/// each row is an independent fixed-order sum, so both paths are bitwise
/// identical.
pub(crate) fn spmv(g: &Graph, x: &[f64], out: &mut [f64]) {
    #[cfg(feature = "parallel")]
    {
        out.par_iter_mut().enumerate().for_each(|(u, slot)| {
            *slot = g.neighbors(u).iter().map(|&v| x[v as usize]).sum();
        });
    }
    #[cfg(not(feature = "parallel"))]
    {
        spmv_seq(g, x, out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, EdgeList};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use crate::testutil::random_graph;

    fn path3() -> Graph {
        build_graph(&EdgeList::new(vec![(0, 1), (1, 2)], false))
    }

    #[test]
    fn path_graph_center_scores_two() {
        let scores = brandes_betweenness(&path3());
        assert_eq!(scores, vec![0.0, 2.0, 0.0]);
        assert_eq!(brute_force_betweenness(&path3()).unwrap(), scores);
    }

    #[test]
    fn star_center_mediates_all_leaf_pairs() {
        let g = build_graph(&EdgeList::new(vec![(0, 1), (0, 2), (0, 3)], false));
        let scores = brandes_betweenness(&g);
        assert_eq!(scores, vec![6.0, 0.0, 0.0, 0.0]);
        assert_eq!(brute_force_betweenness(&g).unwrap(), scores);
    }

    #[test]
    fn directed_cycle_each_node_mediates_one_pair() {
        let g = build_graph(&EdgeList::new(vec![(0, 1), (1, 2), (2, 0)], true));
        let scores = brandes_betweenness(&g);
        assert_eq!(scores, vec![1.0, 1.0, 1.0]);
        assert_eq!(brute_force_betweenness(&g).unwrap(), scores);
    }

    #[test]
    fn complete_graph_has_zero_betweenness() {
        let g = build_graph(&EdgeList::new(
            vec![(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)],
            false,
        ));
        assert_eq!(brandes_betweenness(&g), vec![0.0; 4]);
        assert_eq!(brute_force_betweenness(&g).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn brandes_matches_brute_force_on_random_graphs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for round in 0..30 {
            let directed = round % 2 == 0;
            let n = rng.gen_range(2..=25);
            let p = rng.gen_range(0.1..0.5);
            let g = random_graph(&mut rng, n, p, directed);
            let fast = brandes_betweenness(&g);
            let oracle = brute_force_betweenness(&g).unwrap();
            for (a, b) in fast.iter().zip(&oracle) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn oracle_guard_refuses_large_graphs() {
        let edges: Vec<_> = (0..70u64).map(|v| (v, (v + 1) % 70)).collect();
        let g = build_graph(&EdgeList::new(edges, false));
        assert!(matches!(
            brute_force_betweenness(&g),
            Err(Error::OracleGuard { n: 70, .. })
        ));
    }

    #[test]
    fn undirected_leaves_have_zero_betweenness() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let g = random_graph(&mut rng, 15, 0.2, false);
            let scores = brandes_betweenness(&g);
            for (v, &score) in scores.iter().enumerate() {
                if g.out_degree(v) < 2 {
                    assert_eq!(score, 0.0);
                }
            }
        }
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn parallel_and_sequential_brandes_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let g = random_graph(&mut rng, 120, 0.05, true);
        let par = brandes_betweenness_par(&g);
        let seq = brandes_betweenness_seq(&g);
        for (a, b) in par.iter().zip(&seq) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
    }

    #[test]
    fn degree_mass_on_path_matches_hand_computation() {
        let masses = degree_mass(&path3(), 1);
        // d = [1,2,1]; d^(1) = d + A d = [3,4,3].
        assert_eq!(masses.degree(), &[1.0, 2.0, 1.0]);
        assert_eq!(masses.row(0), &[3.0]);
        assert_eq!(masses.row(1), &[4.0]);
        assert_eq!(masses.row(2), &[3.0]);
    }

    #[test]
    fn degree_mass_columns_are_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = random_graph(&mut rng, 30, 0.2, false);
        let masses = degree_mass(&g, 6);
        for u in 0..g.node_count() {
            let row = masses.row(u);
            assert!(row[0] >= masses.degree()[u]);
            for j in 1..row.len() {
                assert!(row[j] >= row[j - 1]);
            }
        }
    }

    #[test]
    fn isolated_node_has_zero_mass() {
        // Node 2 only appears as an endpoint of a removed self-loop.
        let g = build_graph(&EdgeList::new(vec![(0, 1), (2, 2)], false));
        let masses = degree_mass(&g, 4);
        assert_eq!(masses.row(2), &[0.0, 0.0, 0.0, 0.0]);
    }

    /// Dense oracle: (sum of A^k for k=0..=m) d with explicit matrix powers.
    #[allow(clippy::needless_range_loop)]
    pub(crate) fn dense_degree_mass(g: &Graph, m: usize) -> Vec<Vec<f64>> {
        let n = g.node_count();
        let mut a = vec![vec![0.0f64; n]; n];
        for u in 0..n {
            for &v in g.neighbors(u) {
                a[u][v as usize] = 1.0;
            }
        }
        let d: Vec<f64> = (0..n).map(|u| g.out_degree(u) as f64).collect();
        let mut result = Vec::new();
        // power = A^k as a dense matrix.
        let mut power = vec![vec![0.0f64; n]; n];
        for (i, row) in power.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        let mut sum = power.clone();
        for _ in 1..=m {
            let mut next = vec![vec![0.0f64; n]; n];
            for i in 0..n {
                for k in 0..n {
                    let aik = power[i][k];
                    if aik != 0.0 {
                        for j in 0..n {
                            next[i][j] += aik * a[k][j];
                        }
                    }
                }
            }
            power = next;
            for i in 0..n {
                for j in 0..n {
                    sum[i][j] += power[i][j];
                }
            }
            result.push(
                (0..n)
                    .map(|i| (0..n).map(|j| sum[i][j] * d[j]).sum())
                    .collect(),
            );
        }
        result
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn sparse_degree_mass_matches_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for round in 0..10 {
            let g = random_graph(&mut rng, 20, 0.2, round % 2 == 0);
            let m = 6;
            let sparse = degree_mass(&g, m);
            let dense = dense_degree_mass(&g, m);
            for j in 0..m {
                for u in 0..g.node_count() {
                    let want = dense[j][u];
                    let got = sparse.row(u)[j];
                    let tol = 1e-9 * want.abs().max(1.0);
                    assert!(
                        (want - got).abs() <= tol,
                        "order {j} node {u}: {got} vs {want}"
                    );
                }
            }
        }
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn betweenness_is_permutation_equivariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let n = 18u64;
        let g = random_graph(&mut rng, n as usize, 0.25, true);
        // Affine bijection on ids (gcd(5, 18) = 1).
        let perm: Vec<u64> = (0..n).map(|v| (5 * v + 1) % n).collect();
        let mut edges = Vec::new();
        for u in 0..g.node_count() {
            for &v in g.neighbors(u) {
                edges.push((perm[u], perm[v as usize]));
            }
        }
        let relabeled = build_graph(&EdgeList::new(edges, true));
        let base = brandes_betweenness(&g);
        let mapped = brandes_betweenness(&relabeled);
        for u in 0..g.node_count() {
            let new_index = relabeled
                .original_ids()
                .iter()
                .position(|&id| id == perm[u])
                .unwrap();
            assert_abs_diff_eq!(base[u], mapped[new_index], epsilon = 1e-9);
        }
    }
}
