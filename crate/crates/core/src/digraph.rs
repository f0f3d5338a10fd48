//! Directed communication topologies.
//!
//! Nodes are dense indices `0..n`. Every node carries a self-loop, so a
//! [`Digraph`] always satisfies the positive-diagonal requirement of gossip
//! weights built on top of it.

use std::collections::BTreeSet;

use rand::Rng;

use crate::error::{Error, Result};

/// Default bound on rejection-sampling attempts in [`sample_strongly_connected`].
pub const DEFAULT_MAX_ATTEMPTS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Digraph {
    node_count: usize,
    edges: BTreeSet<(usize, usize)>,
    in_adj: Vec<Vec<usize>>,
    out_adj: Vec<Vec<usize>>,
}

impl Digraph {
    /// Builds a graph from an edge set that must already contain every self-loop.
    pub fn new(node_count: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if node_count == 0 {
            return Err(Error::InvalidGraph("node count must be positive".into()));
        }
        let mut set = BTreeSet::new();
        for (from, to) in edges {
            if from >= node_count || to >= node_count {
                return Err(Error::InvalidGraph(format!(
                    "edge ({from}, {to}) out of range for {node_count} nodes"
                )));
            }
            if !set.insert((from, to)) {
                return Err(Error::InvalidGraph(format!(
                    "duplicate edge ({from}, {to})"
                )));
            }
        }
        if let Some(n) = (0..node_count).find(|&n| !set.contains(&(n, n))) {
            return Err(Error::InvalidGraph(format!("node {n} has no self-loop")));
        }
        Ok(Self::from_set(node_count, set))
    }

    /// Builds a graph from arbitrary edges, inserting the self-loops and
    /// dropping duplicates.
    pub fn with_self_loops(
        node_count: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        if node_count == 0 {
            return Err(Error::InvalidGraph("node count must be positive".into()));
        }
        let mut set: BTreeSet<_> = (0..node_count).map(|n| (n, n)).collect();
        for (from, to) in edges {
            if from >= node_count || to >= node_count {
                return Err(Error::InvalidGraph(format!(
                    "edge ({from}, {to}) out of range for {node_count} nodes"
                )));
            }
            set.insert((from, to));
        }
        Ok(Self::from_set(node_count, set))
    }

    fn from_set(node_count: usize, edges: BTreeSet<(usize, usize)>) -> Self {
        let mut in_adj = vec![Vec::new(); node_count];
        let mut out_adj = vec![Vec::new(); node_count];
        for &(from, to) in &edges {
            out_adj[from].push(to);
            in_adj[to].push(from);
        }
        for list in in_adj.iter_mut() {
            list.sort_unstable();
        }
        Self {
            node_count,
            edges,
            in_adj,
            out_adj,
        }
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Ordered `(from, to)` pairs, self-loops included.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.edges.contains(&(from, to))
    }

    /// Every `m` with an edge `m -> node`, including `node` itself, ascending.
    pub fn in_neighbors(&self, node: usize) -> &[usize] {
        &self.in_adj[node]
    }

    pub fn out_neighbors(&self, node: usize) -> &[usize] {
        &self.out_adj[node]
    }

    /// In-degree counting the self-loop.
    pub fn in_degree(&self, node: usize) -> usize {
        self.in_adj[node].len()
    }

    /// Strongly connected components (Tarjan), in reverse topological order.
    pub fn strongly_connected_components(&self) -> Vec<Vec<usize>> {
        tarjan(&self.out_adj)
    }

    pub fn is_strongly_connected(&self) -> bool {
        self.strongly_connected_components().len() == 1
    }
}

/// All `n²` ordered pairs.
pub fn complete_graph(n: usize) -> Result<Digraph> {
    if n == 0 {
        return Err(Error::InvalidGraph("node count must be positive".into()));
    }
    let edges = (0..n).flat_map(|from| (0..n).map(move |to| (from, to)));
    Digraph::new(n, edges)
}

/// Erdős–Rényi style digraph: each ordered pair `(i, j)` with `i != j` is
/// drawn independently with probability `p`; self-loops always present.
///
/// Pairs are visited row-major (`i` outer, `j` inner), one uniform draw per
/// pair, so a fixed seed always yields the same edge set.
pub fn random_digraph<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> Result<Digraph> {
    if n == 0 {
        return Err(Error::InvalidGraph("node count must be positive".into()));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidConfig(format!(
            "edge probability {p} outside [0, 1]"
        )));
    }
    let mut edges = Vec::new();
    for from in 0..n {
        for to in 0..n {
            if from != to && rng.random::<f64>() < p {
                edges.push((from, to));
            }
        }
    }
    Digraph::with_self_loops(n, edges)
}

/// Rejection sampling of [`random_digraph`] until a strongly connected
/// sample appears.
pub fn sample_strongly_connected<R: Rng + ?Sized>(
    n: usize,
    p: f64,
    rng: &mut R,
    max_attempts: usize,
) -> Result<Digraph> {
    if max_attempts == 0 {
        return Err(Error::InvalidConfig(
            "max_attempts must be at least 1".into(),
        ));
    }
    for _ in 0..max_attempts {
        let g = random_digraph(n, p, rng)?;
        if g.is_strongly_connected() {
            return Ok(g);
        }
    }
    Err(Error::SamplingExhausted {
        n,
        p,
        attempts: max_attempts,
    })
}

/// Iterative Tarjan so deep graphs cannot overflow the call stack.
pub(crate) fn tarjan(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    const UNVISITED: usize = usize::MAX;
    let n = adj.len();
    let mut index = vec![UNVISITED; n];
    let mut lowlink = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut components = Vec::new();
    let mut next_index = 0;
    // (node, position of the next out-edge to explore)
    let mut call: Vec<(usize, usize)> = Vec::new();

    for root in 0..n {
        if index[root] != UNVISITED {
            continue;
        }
        call.push((root, 0));
        while let Some(&mut (v, ref mut pos)) = call.last_mut() {
            if *pos == 0 {
                index[v] = next_index;
                lowlink[v] = next_index;
                next_index += 1;
                stack.push(v);
                on_stack[v] = true;
            }
            if let Some(&w) = adj[v].get(*pos) {
                *pos += 1;
                if index[w] == UNVISITED {
                    call.push((w, 0));
                } else if on_stack[w] {
                    lowlink[v] = lowlink[v].min(index[w]);
                }
                continue;
            }
            call.pop();
            if let Some(&(parent, _)) = call.last() {
                lowlink[parent] = lowlink[parent].min(lowlink[v]);
            }
            if lowlink[v] == index[v] {
                let mut component = Vec::new();
                loop {
                    let w = stack.pop().expect("tarjan stack underflow");
                    on_stack[w] = false;
                    component.push(w);
                    if w == v {
                        break;
                    }
                }
                component.sort_unstable();
                components.push(component);
            }
        }
    }
    components
}
