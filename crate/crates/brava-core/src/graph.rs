//! Immutable CSR graph with edge-list I/O, transpose and component extraction.
//!
//! Directed graphs store each arc once; undirected graphs store both
//! orientations so the same CSR traversal serves both cases. Node ids are
//! compacted to `[0, n)` at build time (first-seen order); the original ids
//! are retained for report output.

use std::collections::HashMap;
use std::io::{BufRead, BufWriter, Write};
use std::path::Path;
use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Raw edge list as read from disk or produced by a generator.
///
/// Duplicates and self-loops are tolerated here and removed by [`build_graph`].
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeList {
    pub edges: Vec<(u64, u64)>,
    pub directed: bool,
}

impl EdgeList {
    pub fn new(edges: Vec<(u64, u64)>, directed: bool) -> Self {
        EdgeList { edges, directed }
    }
}

/// Immutable sparse graph in CSR layout.
///
/// Invariants (established by [`build_graph`]):
/// - `row_offsets` is non-decreasing with `row_offsets[0] == 0` and
///   `row_offsets[n] == col_indices.len()`;
/// - every row is sorted by target id with no duplicates and no self-loops;
/// - for undirected graphs, arc `(u,v)` is stored iff `(v,u)` is stored.
#[derive(Debug)]
pub struct Graph {
    n: usize,
    directed: bool,
    row_offsets: Vec<usize>,
    col_indices: Vec<u32>,
    original_ids: Vec<u64>,
    transpose: OnceLock<Box<Graph>>,
}

impl Clone for Graph {
    fn clone(&self) -> Self {
        Graph {
            n: self.n,
            directed: self.directed,
            row_offsets: self.row_offsets.clone(),
            col_indices: self.col_indices.clone(),
            original_ids: self.original_ids.clone(),
            transpose: OnceLock::new(),
        }
    }
}

impl PartialEq for Graph {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n
            && self.directed == other.directed
            && self.row_offsets == other.row_offsets
            && self.col_indices == other.col_indices
            && self.original_ids == other.original_ids
    }
}

impl Graph {
    pub fn node_count(&self) -> usize {
        self.n
    }

    /// Number of stored arcs. Undirected graphs store both orientations,
    /// so this is twice the number of undirected edges.
    pub fn arc_count(&self) -> usize {
        self.col_indices.len()
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    /// Out-neighbors of `u`, sorted by id.
    pub fn neighbors(&self, u: usize) -> &[u32] {
        &self.col_indices[self.row_offsets[u]..self.row_offsets[u + 1]]
    }

    pub fn out_degree(&self, u: usize) -> usize {
        self.row_offsets[u + 1] - self.row_offsets[u]
    }

    /// True iff the arc `u -> v` is stored.
    pub fn has_arc(&self, u: usize, v: usize) -> bool {
        self.neighbors(u).binary_search(&(v as u32)).is_ok()
    }

    /// Original (pre-compaction) id of node `u`.
    pub fn original_id(&self, u: usize) -> u64 {
        self.original_ids[u]
    }

    pub fn original_ids(&self) -> &[u64] {
        &self.original_ids
    }

    /// Stored arcs divided by node count. For undirected graphs this equals
    /// the usual mean degree because both orientations are stored.
    pub fn mean_degree(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.col_indices.len() as f64 / self.n as f64
        }
    }

    /// Build from arcs over the dense id space `[0, n)`; ids are kept as-is
    /// so isolated nodes survive. Self-loops dropped, duplicates removed,
    /// undirected input symmetrized, rows sorted.
    pub fn from_edges_with_n(n: usize, directed: bool, edges: &[(u32, u32)]) -> Graph {
        let mut adjacency: Vec<Vec<u32>> = vec![Vec::new(); n];
        for &(u, v) in edges {
            assert!((u as usize) < n && (v as usize) < n, "edge endpoint out of range");
            if u == v {
                continue;
            }
            adjacency[u as usize].push(v);
            if !directed {
                adjacency[v as usize].push(u);
            }
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0usize);
        let mut cols = Vec::new();
        for row in &mut adjacency {
            row.sort_unstable();
            row.dedup();
            cols.extend_from_slice(row);
            offsets.push(cols.len());
        }
        Graph {
            n,
            directed,
            row_offsets: offsets,
            col_indices: cols,
            original_ids: (0..n as u64).collect(),
            transpose: OnceLock::new(),
        }
    }

    /// Graph with every arc reversed, built lazily and cached.
    ///
    /// For undirected graphs the arc set is symmetric and `self` is returned.
    /// `transpose` is an involution: transposing twice yields the original
    /// arc set.
    pub fn transpose(&self) -> &Graph {
        if !self.directed {
            return self;
        }
        self.transpose.get_or_init(|| {
            let mut degree = vec![0usize; self.n];
            for &v in &self.col_indices {
                degree[v as usize] += 1;
            }
            let mut offsets = Vec::with_capacity(self.n + 1);
            offsets.push(0usize);
            for u in 0..self.n {
                offsets.push(offsets[u] + degree[u]);
            }
            let mut cols = vec![0u32; self.col_indices.len()];
            let mut cursor = offsets.clone();
            // Rows are filled in source order, so each transposed row ends up
            // sorted without an extra pass.
            for u in 0..self.n {
                for &v in self.neighbors(u) {
                    cols[cursor[v as usize]] = u as u32;
                    cursor[v as usize] += 1;
                }
            }
            Box::new(Graph {
                n: self.n,
                directed: self.directed,
                row_offsets: offsets,
                col_indices: cols,
                original_ids: self.original_ids.clone(),
                transpose: OnceLock::new(),
            })
        })
    }

    /// Induced subgraph on `keep` (ascending node indices).
    ///
    /// Returns the subgraph and the old-to-new index map (`None` for dropped
    /// nodes). Original ids carry over.
    pub(crate) fn induced_subgraph(&self, keep: &[usize]) -> (Graph, Vec<Option<usize>>) {
        debug_assert!(keep.windows(2).all(|w| w[0] < w[1]));
        let mut old_to_new = vec![None; self.n];
        for (new, &old) in keep.iter().enumerate() {
            old_to_new[old] = Some(new);
        }
        let mut offsets = Vec::with_capacity(keep.len() + 1);
        offsets.push(0usize);
        let mut cols = Vec::new();
        for &old in keep {
            for &v in self.neighbors(old) {
                if let Some(new_v) = old_to_new[v as usize] {
                    cols.push(new_v as u32);
                }
            }
            offsets.push(cols.len());
        }
        let graph = Graph {
            n: keep.len(),
            directed: self.directed,
            row_offsets: offsets,
            col_indices: cols,
            original_ids: keep.iter().map(|&old| self.original_ids[old]).collect(),
            transpose: OnceLock::new(),
        };
        (graph, old_to_new)
    }
}

/// Build a CSR graph from an edge list.
///
/// Node ids are compacted to `[0, n)` in first-seen order; self-loops are
/// dropped, duplicate arcs deduplicated, and undirected input symmetrized.
/// An empty edge list yields a valid 0-node graph.
pub fn build_graph(edges: &EdgeList) -> Graph {
    let mut id_map: HashMap<u64, u32> = HashMap::new();
    let mut original_ids = Vec::new();
    let mut compact = |raw: u64, original_ids: &mut Vec<u64>| -> u32 {
        *id_map.entry(raw).or_insert_with(|| {
            original_ids.push(raw);
            (original_ids.len() - 1) as u32
        })
    };

    let mut arcs: Vec<(u32, u32)> = Vec::with_capacity(edges.edges.len() * 2);
    for &(a, b) in &edges.edges {
        let u = compact(a, &mut original_ids);
        let v = compact(b, &mut original_ids);
        if u == v {
            continue;
        }
        arcs.push((u, v));
        if !edges.directed {
            arcs.push((v, u));
        }
    }
    let n = original_ids.len();

    let mut adjacency: Vec<Vec<u32>> = vec![Vec::new(); n];
    for (u, v) in arcs {
        adjacency[u as usize].push(v);
    }
    let mut offsets = Vec::with_capacity(n + 1);
    offsets.push(0usize);
    let mut cols = Vec::new();
    for row in &mut adjacency {
        row.sort_unstable();
        row.dedup();
        cols.extend_from_slice(row);
        offsets.push(cols.len());
    }

    Graph {
        n,
        directed: edges.directed,
        row_offsets: offsets,
        col_indices: cols,
        original_ids,
        transpose: OnceLock::new(),
    }
}

/// Which notion of connectivity `largest_component` uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ComponentMode {
    /// Undirected reachability.
    Weak,
    /// Strong connectivity (Tarjan). On undirected graphs this is treated
    /// as [`ComponentMode::Weak`].
    Strong,
}

/// Induced subgraph on the largest weakly or strongly connected component.
///
/// Ties between equal-sized components go to the one containing the smallest
/// minimum original id. Returns the subgraph and the old-to-new index map.
pub fn largest_component(g: &Graph, mode: ComponentMode) -> (Graph, Vec<Option<usize>>) {
    assert!(g.node_count() >= 1, "largest_component requires n >= 1");
    let labels = match mode {
        ComponentMode::Strong if g.is_directed() => strong_components(g),
        _ => weak_components(g),
    };
    let component_count = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; component_count];
    let mut min_original = vec![u64::MAX; component_count];
    for (v, &c) in labels.iter().enumerate() {
        sizes[c] += 1;
        min_original[c] = min_original[c].min(g.original_id(v));
    }
    let best = (0..component_count)
        .max_by(|&a, &b| {
            sizes[a]
                .cmp(&sizes[b])
                .then(min_original[b].cmp(&min_original[a]))
        })
        .expect("n >= 1 implies at least one component");
    let keep: Vec<usize> = (0..g.node_count()).filter(|&v| labels[v] == best).collect();
    g.induced_subgraph(&keep)
}

fn weak_components(g: &Graph) -> Vec<usize> {
    let n = g.node_count();
    let gt = g.transpose();
    let mut label = vec![usize::MAX; n];
    let mut next = 0usize;
    let mut queue = Vec::new();
    for start in 0..n {
        if label[start] != usize::MAX {
            continue;
        }
        label[start] = next;
        queue.push(start);
        while let Some(u) = queue.pop() {
            for &v in g.neighbors(u).iter().chain(gt.neighbors(u)) {
                if label[v as usize] == usize::MAX {
                    label[v as usize] = next;
                    queue.push(v as usize);
                }
            }
        }
        next += 1;
    }
    label
}

/// Iterative Tarjan; recursion would overflow on long directed paths.
fn strong_components(g: &Graph) -> Vec<usize> {
    let n = g.node_count();
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<usize> = Vec::new();
    let mut label = vec![usize::MAX; n];
    let mut next_index = 0usize;
    let mut next_label = 0usize;

    // (node, next-neighbor cursor)
    let mut call_stack: Vec<(usize, usize)> = Vec::new();
    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        call_stack.push((root, 0));
        while let Some(&mut (v, ref mut cursor)) = call_stack.last_mut() {
            if *cursor == 0 {
                index[v] = next_index;
                low[v] = next_index;
                next_index += 1;
                stack.push(v);
                on_stack[v] = true;
            }
            let neighbors = g.neighbors(v);
            if *cursor < neighbors.len() {
                let w = neighbors[*cursor] as usize;
                *cursor += 1;
                if index[w] == usize::MAX {
                    call_stack.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                call_stack.pop();
                if let Some(&(parent, _)) = call_stack.last() {
                    low[parent] = low[parent].min(low[v]);
                }
                if low[v] == index[v] {
                    while let Some(w) = stack.pop() {
                        on_stack[w] = false;
                        label[w] = next_label;
                        if w == v {
                            break;
                        }
                    }
                    next_label += 1;
                }
            }
        }
    }
    label
}

/// Read a whitespace-separated edge list; lines starting with `#` are skipped.
pub fn load_edge_list<P: AsRef<Path>>(path: P, directed: bool) -> Result<EdgeList> {
    let file = std::fs::File::open(path)?;
    let reader = std::io::BufReader::new(file);
    let mut edges = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut tokens = trimmed.split_whitespace();
        let parse = |tok: Option<&str>, idx: usize| -> Result<u64> {
            let tok = tok.ok_or_else(|| Error::Parse {
                line: idx + 1,
                msg: "expected two integer tokens".into(),
            })?;
            tok.parse::<u64>().map_err(|_| Error::Parse {
                line: idx + 1,
                msg: format!("non-integer token `{tok}`"),
            })
        };
        let a = parse(tokens.next(), idx)?;
        let b = parse(tokens.next(), idx)?;
        edges.push((a, b));
    }
    Ok(EdgeList { edges, directed })
}

/// Write one `u v` line per edge. A round trip through
/// [`load_edge_list`] preserves the pair multiset.
pub fn save_edge_list<P: AsRef<Path>>(path: P, edges: &EdgeList) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut writer = BufWriter::new(file);
    for &(a, b) in &edges.edges {
        writeln!(writer, "{a} {b}")?;
    }
    writer.flush()?;
    Ok(())
}

/// Write `id<TAB>score` lines with full float precision.
pub fn save_scores<P: AsRef<Path>>(path: P, ids: &[u64], scores: &[f64]) -> Result<()> {
    assert_eq!(ids.len(), scores.len());
    let file = std::fs::File::create(path)?;
    let mut writer = BufWriter::new(file);
    for (id, score) in ids.iter().zip(scores) {
        writeln!(writer, "{id}\t{score}")?;
    }
    writer.flush()?;
    Ok(())
}

/// Read back a score file written by [`save_scores`].
pub fn load_scores<P: AsRef<Path>>(path: P) -> Result<Vec<(u64, f64)>> {
    let file = std::fs::File::open(path)?;
    let reader = std::io::BufReader::new(file);
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut tokens = trimmed.split_whitespace();
        let id = tokens
            .next()
            .and_then(|t| t.parse::<u64>().ok())
            .ok_or_else(|| Error::Parse {
                line: idx + 1,
                msg: "expected integer id".into(),
            })?;
        let score = tokens
            .next()
            .and_then(|t| t.parse::<f64>().ok())
            .ok_or_else(|| Error::Parse {
                line: idx + 1,
                msg: "expected float score".into(),
            })?;
        out.push((id, score));
    }
    Ok(out)
}
