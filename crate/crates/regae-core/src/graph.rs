//! Undirected graphs and the canonical vertex ordering the codec consumes.
//!
//! Vertices are indexed `0..n`. Edges are unordered pairs without self-loops
//! or duplicates. Before a graph is encoded it is brought into canonical
//! order: vertices sorted by degree (descending, original index as the
//! tie-break) and then visited by a BFS that restarts from the
//! highest-priority unvisited vertex whenever a component is exhausted.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// An undirected graph: a vertex count and a set of unordered edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
}

impl Graph {
    /// Builds a graph from edge pairs. Endpoints must lie in `[0, n)`,
    /// self-loops are rejected and duplicates (in either orientation)
    /// collapse into one edge.
    pub fn new(
        n: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, GraphError> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for (a, b) in edges {
            if a >= n || b >= n {
                return Err(GraphError::EndpointOutOfRange { a, b, n });
            }
            if a == b {
                return Err(GraphError::SelfLoop { v: a });
            }
            let e = (a.min(b), a.max(b));
            if seen.insert(e) {
                out.push(e);
            }
        }
        out.sort_unstable();
        Ok(Graph { n, edges: out })
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Edges as normalized `(min, max)` pairs shown in sorted order.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges.binary_search(&(a.min(b), a.max(b))).is_ok()
    }

    /// Adjacency lists with neighbor lists sorted ascending.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0usize; self.n];
        for &(a, b) in &self.edges {
            deg[a] += 1;
            deg[b] += 1;
        }
        deg
    }

    /// Sorted degree multiset, an isomorphism invariant.
    pub fn degree_multiset(&self) -> Vec<usize> {
        let mut d = self.degrees();
        d.sort_unstable();
        d
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("edge ({a}, {b}) has an endpoint outside [0, {n})")]
    EndpointOutOfRange { a: usize, b: usize, n: usize },
    #[error("self-loop at vertex {v}")]
    SelfLoop { v: usize },
    #[error("window [{start}, {start}+{size}) out of range for n = {n}")]
    WindowOutOfRange { start: usize, size: usize, n: usize },
}

/// A graph relabeled into canonical order.
///
/// `graph` carries the adjacency in canonical indexing; `order[p]` is the
/// vertex of the source graph sitting at canonical position `p`. Windows
/// extracted from a canonical graph inherit this order rather than being
/// re-canonicalized.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CanonicalGraph {
    pub graph: Graph,
    pub order: Vec<usize>,
}

impl CanonicalGraph {
    pub fn vertex_count(&self) -> usize {
        self.graph.vertex_count()
    }
}

/// Degree-sorted BFS reindexing.
///
/// Priority is (degree descending, original index ascending), both for the
/// initial sort and for the order neighbors are enqueued. Disconnected
/// remainders restart from the highest-priority unvisited vertex, so the
/// ordering is total even for inconsistent graphs. `n = 0` yields an empty
/// ordering.
pub fn canonical_order(g: &Graph) -> CanonicalGraph {
    let n = g.vertex_count();
    let deg = g.degrees();
    let adj = g.adjacency();

    let mut by_priority: Vec<usize> = (0..n).collect();
    by_priority.sort_by_key(|&v| (std::cmp::Reverse(deg[v]), v));

    let mut order = Vec::with_capacity(n);
    let mut discovered = vec![false; n];
    let mut queue = std::collections::VecDeque::new();
    for &start in &by_priority {
        if discovered[start] {
            continue;
        }
        discovered[start] = true;
        queue.push_back(start);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut nbrs: Vec<usize> = adj[v].iter().copied().filter(|&u| !discovered[u]).collect();
            nbrs.sort_by_key(|&u| (std::cmp::Reverse(deg[u]), u));
            for u in nbrs {
                discovered[u] = true;
                queue.push_back(u);
            }
        }
    }

    // canonical position -> original vertex; invert to relabel edges
    let mut pos = vec![0usize; n];
    for (p, &v) in order.iter().enumerate() {
        pos[v] = p;
    }
    let edges = g.edges().iter().map(|&(a, b)| (pos[a], pos[b]));
    let graph = Graph::new(n, edges).expect("relabeling preserves validity");
    CanonicalGraph { graph, order }
}

/// Relabels `g` by `perm`, where `perm[v]` is the new index of vertex `v`.
pub fn apply_permutation(g: &Graph, perm: &[usize]) -> Result<Graph, GraphError> {
    assert_eq!(
        perm.len(),
        g.vertex_count(),
        "permutation length != vertex count"
    );
    Graph::new(
        g.vertex_count(),
        g.edges().iter().map(|&(a, b)| (perm[a], perm[b])),
    )
}

/// Relabels vertices by a uniformly random permutation drawn from `seed`.
pub fn permute_graph(g: &Graph, seed: u64) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perm: Vec<usize> = (0..g.vertex_count()).collect();
    perm.shuffle(&mut rng);
    apply_permutation(g, &perm).expect("shuffled identity is a permutation")
}

/// Induced subgraph on canonical positions `start..start + size`, indices
/// shifted to `0..size`. The window keeps the parent's ordering, so its
/// `order` maps window positions back to the parent's original vertices.
pub fn extract_window_subgraph(
    g: &CanonicalGraph,
    start: usize,
    size: usize,
) -> Result<CanonicalGraph, GraphError> {
    let n = g.vertex_count();
    if size == 0 || start + size > n {
        return Err(GraphError::WindowOutOfRange { start, size, n });
    }
    let in_window = |v: usize| v >= start && v < start + size;
    let edges = g
        .graph
        .edges()
        .iter()
        .filter(|&&(a, b)| in_window(a) && in_window(b))
        .map(|&(a, b)| (a - start, b - start));
    let graph = Graph::new(size, edges).expect("window of a valid graph is valid");
    let order = g.order[start..start + size].to_vec();
    Ok(CanonicalGraph { graph, order })
}
