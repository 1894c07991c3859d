//! Support graph of the structure matrix and its fixed-size node-set covers.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sparse::CsrMatrix;

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("structure matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("support graph is disconnected; components (nodes from 1): {}", render_components(.0))]
    Disconnected(Vec<Vec<usize>>),
    #[error("clique size {k} is invalid for n = {n} (need 2 <= k <= n)")]
    BadCliqueSize { k: usize, n: usize },
    #[error("path graph requires n ≥ 2")]
    TooSmall,
}

fn render_components(c: &[Vec<usize>]) -> String {
    c.iter()
        .map(|comp| {
            let s: Vec<String> = comp.iter().map(|v| (v + 1).to_string()).collect();
            format!("{{{}}}", s.join(","))
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Undirected edge `i < j` with the two directed entries of `B`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    /// `B(i, j)`
    pub forward: f64,
    /// `B(j, i)`
    pub backward: f64,
}

impl Edge {
    /// Symmetrized weight `(B + Bᵀ)(i, j)`.
    pub fn weight(&self) -> f64 {
        self.forward + self.backward
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportGraph {
    pub n: usize,
    /// Edges in lexicographic `(i, j)` order.
    pub edges: Vec<Edge>,
    pub neighbors: Vec<Vec<usize>>,
    /// Diagonal of `B`, which carries no edge.
    pub self_loops: Vec<f64>,
}

impl SupportGraph {
    pub fn edge_index(&self, i: usize, j: usize) -> Option<usize> {
        let key = (i.min(j), i.max(j));
        self.edges.binary_search_by(|e| (e.i, e.j).cmp(&key)).ok()
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    fn components(&self) -> Vec<Vec<usize>> {
        let mut label = vec![usize::MAX; self.n];
        let mut comps = Vec::new();
        for start in 0..self.n {
            if label[start] != usize::MAX {
                continue;
            }
            let id = comps.len();
            let mut comp = vec![start];
            label[start] = id;
            let mut head = 0;
            while head < comp.len() {
                let v = comp[head];
                head += 1;
                for &u in &self.neighbors[v] {
                    if label[u] == usize::MAX {
                        label[u] = id;
                        comp.push(u);
                    }
                }
            }
            comp.sort_unstable();
            comps.push(comp);
        }
        comps
    }
}

/// Builds the symmetrized support graph. An edge exists wherever `B(i, j)` or
/// `B(j, i)` is stored as nonzero for `i ≠ j`; the graph must be connected.
pub fn support_graph(b: &CsrMatrix) -> Result<SupportGraph, GraphError> {
    if b.nrows() != b.ncols() {
        return Err(GraphError::NotSquare { rows: b.nrows(), cols: b.ncols() });
    }
    let n = b.nrows();
    let mut map: BTreeMap<(usize, usize), (f64, f64)> = BTreeMap::new();
    let mut self_loops = vec![0.0; n];
    for (r, c, v) in b.triplets() {
        if r == c {
            self_loops[r] = v;
        } else if r < c {
            map.entry((r, c)).or_insert((0.0, 0.0)).0 += v;
        } else {
            map.entry((c, r)).or_insert((0.0, 0.0)).1 += v;
        }
    }
    let edges: Vec<Edge> = map.into_iter().map(|((i, j), (f, bk))| Edge { i, j, forward: f, backward: bk }).collect();
    let mut neighbors = vec![Vec::new(); n];
    for e in &edges {
        neighbors[e.i].push(e.j);
        neighbors[e.j].push(e.i);
    }
    for nb in &mut neighbors {
        nb.sort_unstable();
    }
    let g = SupportGraph { n, edges, neighbors, self_loops };
    let comps = g.components();
    if comps.len() > 1 {
        return Err(GraphError::Disconnected(comps));
    }
    Ok(g)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoverStrategy {
    #[default]
    Greedy,
    Windows,
}

impl std::str::FromStr for CoverStrategy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "greedy" => Ok(Self::Greedy),
            "windows" => Ok(Self::Windows),
            other => Err(format!("unknown cover strategy {other:?} (expected greedy or windows)")),
        }
    }
}

/// Occurrence of a node inside a clique.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slot {
    pub clique: usize,
    pub local: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CliqueCover {
    pub k: usize,
    pub n: usize,
    /// Sorted node sets, each of size `k`.
    pub cliques: Vec<Vec<usize>>,
    /// For each support-graph edge, the clique it is charged to.
    pub edge_owner: Vec<usize>,
    /// For each clique, the edges charged to it.
    pub clique_edges: Vec<Vec<usize>>,
    /// For each node, its occurrences in clique order.
    pub slots: Vec<Vec<Slot>>,
}

impl CliqueCover {
    pub fn len(&self) -> usize {
        self.cliques.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cliques.is_empty()
    }

    /// Edge `(i, j)` → owning clique.
    pub fn covered_edges(&self, g: &SupportGraph) -> BTreeMap<(usize, usize), usize> {
        g.edges.iter().zip(&self.edge_owner).map(|(e, &r)| ((e.i, e.j), r)).collect()
    }

    /// Local slot of node `i` inside clique `r`.
    pub fn local_of(&self, r: usize, i: usize) -> Option<usize> {
        self.cliques[r].binary_search(&i).ok()
    }
}

pub fn node_slots(cover: &CliqueCover) -> &[Vec<Slot>] {
    &cover.slots
}

/// Covers every support-graph edge with node sets of size `k`.
pub fn clique_cover(g: &SupportGraph, k: usize, strategy: CoverStrategy) -> Result<CliqueCover, GraphError> {
    let n = g.n;
    if k < 2 || k > n {
        return Err(GraphError::BadCliqueSize { k, n });
    }
    let mut owner = vec![usize::MAX; g.edges.len()];
    let mut cliques: Vec<Vec<usize>> = Vec::new();

    if strategy == CoverStrategy::Windows {
        let order = bfs_order(g, &[0]);
        if order.len() >= k {
            for start in 0..=order.len() - k {
                let mut set: Vec<usize> = order[start..start + k].to_vec();
                set.sort_unstable();
                if claim(g, &set, cliques.len(), &mut owner) > 0 {
                    cliques.push(set);
                }
            }
        }
    }

    for e in 0..g.edges.len() {
        if owner[e] != usize::MAX {
            continue;
        }
        let set = grow(g, k, &[g.edges[e].i, g.edges[e].j], &owner);
        claim(g, &set, cliques.len(), &mut owner);
        cliques.push(set);
    }

    let mut clique_edges = vec![Vec::new(); cliques.len()];
    for (e, &r) in owner.iter().enumerate() {
        clique_edges[r].push(e);
    }
    let mut slots = vec![Vec::new(); n];
    for (r, set) in cliques.iter().enumerate() {
        for (local, &i) in set.iter().enumerate() {
            slots[i].push(Slot { clique: r, local });
        }
    }
    Ok(CliqueCover { k, n, cliques, edge_owner: owner, clique_edges, slots })
}

/// Assigns every still-unowned edge inside `set` to clique `r`; returns the count.
fn claim(g: &SupportGraph, set: &[usize], r: usize, owner: &mut [usize]) -> usize {
    let mut count = 0;
    for (a, &i) in set.iter().enumerate() {
        for &j in &set[a + 1..] {
            if let Some(e) = g.edge_index(i, j) {
                if owner[e] == usize::MAX {
                    owner[e] = r;
                    count += 1;
                }
            }
        }
    }
    count
}

fn grow(g: &SupportGraph, k: usize, seed: &[usize], owner: &[usize]) -> Vec<usize> {
    let mut set: Vec<usize> = seed.to_vec();
    let mut member = vec![false; g.n];
    for &v in &set {
        member[v] = true;
    }
    while set.len() < k {
        let mut best: Option<(usize, usize)> = None;
        let mut candidates: Vec<usize> = set.iter().flat_map(|&v| g.neighbors[v].iter().copied()).filter(|&u| !member[u]).collect();
        candidates.sort_unstable();
        candidates.dedup();
        for &c in &candidates {
            let gain = set
                .iter()
                .filter(|&&v| g.edge_index(c, v).is_some_and(|e| owner[e] == usize::MAX))
                .count();
            if best.is_none_or(|(_, bg)| gain > bg) {
                best = Some((c, gain));
            }
        }
        let next = match best {
            Some((c, _)) => c,
            None => match bfs_order(g, &set).into_iter().find(|&u| !member[u]) {
                Some(u) => u,
                None => (0..g.n).find(|&u| !member[u]).expect("k <= n leaves a free node"),
            },
        };
        member[next] = true;
        set.push(next);
    }
    set.sort_unstable();
    set
}

/// Breadth-first order from `sources`, visiting neighbors in increasing index.
fn bfs_order(g: &SupportGraph, sources: &[usize]) -> Vec<usize> {
    let mut seen = vec![false; g.n];
    let mut queue: VecDeque<usize> = VecDeque::new();
    let mut order = Vec::with_capacity(g.n);
    for &s in sources {
        if !seen[s] {
            seen[s] = true;
            queue.push_back(s);
        }
    }
    while let Some(v) = queue.pop_front() {
        order.push(v);
        for &u in &g.neighbors[v] {
            if !seen[u] {
                seen[u] = true;
                queue.push_back(u);
            }
        }
    }
    order
}
