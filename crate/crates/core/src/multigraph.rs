//! Multigraphs in Serre's formalism: directed edges with a fixed-point-free
//! involution `e ↦ ē` and origin/terminus maps. Loops and parallel edges
//! are first-class.

use std::collections::VecDeque;
use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

/// A directed edge. `inverse` is the id of `ē`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Edge {
    pub origin: usize,
    pub terminus: usize,
    pub label: usize,
    pub inverse: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SerreGraph {
    vertex_count: usize,
    edges: Vec<Edge>,
    // CSR index of links: edges with origin v are link_edges[link_start[v]..link_start[v+1]]
    link_start: Vec<usize>,
    link_edges: Vec<usize>,
}

impl SerreGraph {
    /// Validates the involution axioms and indexes vertex links.
    pub fn new(vertex_count: usize, edges: Vec<Edge>) -> Result<Self> {
        if !edges.len().is_multiple_of(2) {
            return Err(Error::InvalidGraph(format!("odd edge count {}", edges.len())));
        }
        for (id, e) in edges.iter().enumerate() {
            if e.origin >= vertex_count || e.terminus >= vertex_count {
                return Err(Error::InvalidGraph(format!("edge {id} has an endpoint out of range")));
            }
            let inv = edges.get(e.inverse).ok_or_else(|| {
                Error::InvalidGraph(format!("edge {id} has inverse {} out of range", e.inverse))
            })?;
            if e.inverse == id {
                return Err(Error::InvalidGraph(format!("edge {id} is its own inverse")));
            }
            if inv.inverse != id {
                return Err(Error::InvalidGraph(format!("inverse of edge {id} is not an involution")));
            }
            if inv.origin != e.terminus || inv.terminus != e.origin {
                return Err(Error::InvalidGraph(format!(
                    "edge {id} and its inverse have mismatched endpoints"
                )));
            }
        }
        let mut link_start = vec![0usize; vertex_count + 1];
        for e in &edges {
            link_start[e.origin + 1] += 1;
        }
        for v in 0..vertex_count {
            link_start[v + 1] += link_start[v];
        }
        let mut fill = link_start.clone();
        let mut link_edges = vec![0usize; edges.len()];
        for (id, e) in edges.iter().enumerate() {
            link_edges[fill[e.origin]] = id;
            fill[e.origin] += 1;
        }
        Ok(Self {
            vertex_count,
            edges,
            link_start,
            link_edges,
        })
    }

    /// Builds a graph from geometric edges `(u, v, label)`; each one becomes
    /// the pair `u → v`, `v → u` (both carrying `label`).
    pub fn from_geometric_edges(vertex_count: usize, geometric: &[(usize, usize, usize)]) -> Result<Self> {
        let mut edges = Vec::with_capacity(2 * geometric.len());
        for &(u, v, label) in geometric {
            let id = edges.len();
            edges.push(Edge { origin: u, terminus: v, label, inverse: id + 1 });
            edges.push(Edge { origin: v, terminus: u, label, inverse: id });
        }
        Self::new(vertex_count, edges)
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, id: usize) -> &Edge {
        &self.edges[id]
    }

    /// `Lk(v)`: ids of the directed edges with origin `v`.
    pub fn link(&self, v: usize) -> &[usize] {
        &self.link_edges[self.link_start[v]..self.link_start[v + 1]]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.link_start[v + 1] - self.link_start[v]
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.vertex_count).map(|v| self.degree(v)).collect()
    }

    /// The common degree, if every vertex has the same one.
    pub fn regular_degree(&self) -> Option<usize> {
        if self.vertex_count == 0 {
            return None;
        }
        let d = self.degree(0);
        (0..self.vertex_count).all(|v| self.degree(v) == d).then_some(d)
    }

    /// Number of geometric loops (pairs `{e, ē}` with `o(e) = t(e)`).
    pub fn loop_count(&self) -> usize {
        self.edges.iter().filter(|e| e.origin == e.terminus).count() / 2
    }

    pub fn connected(&self) -> bool {
        if self.vertex_count == 0 {
            return true;
        }
        let mut seen = vec![false; self.vertex_count];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = stack.pop() {
            for &e in self.link(u) {
                let w = self.edges[e].terminus;
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    stack.push(w);
                }
            }
        }
        count == self.vertex_count
    }

    /// A proper 2-coloring if one exists. Any loop rules it out.
    pub fn bipartition(&self) -> Option<Vec<u8>> {
        const UNSET: u8 = u8::MAX;
        let mut color = vec![UNSET; self.vertex_count];
        let mut queue = VecDeque::new();
        for start in 0..self.vertex_count {
            if color[start] != UNSET {
                continue;
            }
            color[start] = 0;
            queue.push_back(start);
            while let Some(u) = queue.pop_front() {
                for &e in self.link(u) {
                    let w = self.edges[e].terminus;
                    if color[w] == UNSET {
                        color[w] = 1 - color[u];
                        queue.push_back(w);
                    } else if color[w] == color[u] {
                        return None;
                    }
                }
            }
        }
        Some(color)
    }

    pub fn is_bipartite(&self) -> bool {
        self.bipartition().is_some()
    }

    /// Length of the shortest closed path without backtracking.
    pub fn girth(&self) -> Girth {
        if self.edges.iter().any(|e| e.origin == e.terminus) {
            return Girth::Finite(1);
        }
        let best = AtomicUsize::new(usize::MAX);
        (0..self.vertex_count).into_par_iter().for_each_init(
            || (vec![usize::MAX; self.vertex_count], vec![usize::MAX; self.vertex_count], Vec::new()),
            |(dist, parent, touched), root| {
                let found = self.shortest_cycle_through(root, best.load(Ordering::Relaxed), dist, parent, touched);
                best.fetch_min(found, Ordering::Relaxed);
            },
        );
        match best.into_inner() {
            usize::MAX => Girth::Infinite,
            g => Girth::Finite(g),
        }
    }

    // BFS from `root` tracking parent *edges*; returns a cycle length
    // bound that is exact whenever a shortest cycle passes through `root`.
    fn shortest_cycle_through(
        &self,
        root: usize,
        bound: usize,
        dist: &mut [usize],
        parent: &mut [usize],
        touched: &mut Vec<usize>,
    ) -> usize {
        const NONE: usize = usize::MAX;
        let mut best = bound;
        let mut queue = VecDeque::new();
        dist[root] = 0;
        touched.push(root);
        queue.push_back(root);
        while let Some(u) = queue.pop_front() {
            if 2 * dist[u] + 1 >= best {
                break;
            }
            let back = match parent[u] {
                NONE => NONE,
                p => self.edges[p].inverse,
            };
            for &e in self.link(u) {
                if e == back {
                    continue;
                }
                let w = self.edges[e].terminus;
                if dist[w] == NONE {
                    dist[w] = dist[u] + 1;
                    parent[w] = e;
                    touched.push(w);
                    queue.push_back(w);
                } else if parent[w] != e {
                    best = best.min(dist[u] + dist[w] + 1);
                }
            }
        }
        for v in touched.drain(..) {
            dist[v] = NONE;
            parent[v] = NONE;
        }
        best
    }
}

/// Girth of a graph; acyclic graphs have infinite girth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Girth {
    Finite(usize),
    Infinite,
}

impl Girth {
    pub fn finite(self) -> Option<usize> {
        match self {
            Girth::Finite(g) => Some(g),
            Girth::Infinite => None,
        }
    }
}

impl fmt::Display for Girth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Girth::Finite(g) => write!(f, "{g}"),
            Girth::Infinite => write!(f, "infinite"),
        }
    }
}

impl Serialize for Girth {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Girth::Finite(g) => s.serialize_u64(*g as u64),
            Girth::Infinite => s.serialize_str("infinite"),
        }
    }
}

/// Vertex and edge maps between two Serre graphs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphMorphism {
    pub vertex_map: Vec<usize>,
    pub edge_map: Vec<usize>,
}

impl GraphMorphism {
    pub fn identity(g: &SerreGraph) -> Self {
        Self {
            vertex_map: (0..g.vertex_count()).collect(),
            edge_map: (0..g.edge_count()).collect(),
        }
    }

    /// `other ∘ self`: first `self`, then `other`.
    pub fn then(&self, other: &GraphMorphism) -> Self {
        Self {
            vertex_map: self.vertex_map.iter().map(|&v| other.vertex_map[v]).collect(),
            edge_map: self.edge_map.iter().map(|&e| other.edge_map[e]).collect(),
        }
    }

    /// Checks that the maps commute with `o`, `t` and the involution.
    pub fn validate(&self, source: &SerreGraph, target: &SerreGraph) -> Result<()> {
        if self.vertex_map.len() != source.vertex_count() || self.edge_map.len() != source.edge_count() {
            return Err(Error::InvalidMorphism("map sizes do not match the source graph".into()));
        }
        if let Some(&v) = self.vertex_map.iter().find(|&&v| v >= target.vertex_count()) {
            return Err(Error::InvalidMorphism(format!("vertex image {v} out of range")));
        }
        for (id, e) in source.edges().iter().enumerate() {
            let img = self.edge_map[id];
            let Some(fe) = target.edges().get(img) else {
                return Err(Error::InvalidMorphism(format!("edge image {img} out of range")));
            };
            if fe.origin != self.vertex_map[e.origin] || fe.terminus != self.vertex_map[e.terminus] {
                return Err(Error::InvalidMorphism(format!("edge {id} does not commute with o/t")));
            }
            if self.edge_map[e.inverse] != fe.inverse {
                return Err(Error::InvalidMorphism(format!(
                    "edge {id} does not commute with the involution"
                )));
            }
        }
        Ok(())
    }

    /// Image of an edge path.
    pub fn map_path(&self, path: &[usize]) -> Vec<usize> {
        path.iter().map(|&e| self.edge_map[e]).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CoveringDefect {
    /// A target vertex with no preimage.
    NotSurjective,
    /// Two edges of the link map to the same edge.
    LinkNotInjective,
    /// Some edge in the target link is not hit.
    LinkNotSurjective,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CoveringWitness {
    /// Source vertex for link defects, target vertex for `NotSurjective`.
    pub vertex: usize,
    pub defect: CoveringDefect,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CoveringVerdict {
    pub is_covering: bool,
    pub witnesses: Vec<CoveringWitness>,
}

/// Witnesses beyond this many are not recorded.
pub const MAX_WITNESSES: usize = 16;

/// A morphism is a covering iff it is onto and bijective on every link.
pub fn is_covering(source: &SerreGraph, target: &SerreGraph, f: &GraphMorphism) -> Result<CoveringVerdict> {
    f.validate(source, target)?;
    let mut witnesses = Vec::new();
    let mut hit = vec![false; target.vertex_count()];
    for &v in &f.vertex_map {
        hit[v] = true;
    }
    witnesses.extend(
        hit.iter()
            .enumerate()
            .filter(|(_, &h)| !h)
            .map(|(v, _)| CoveringWitness { vertex: v, defect: CoveringDefect::NotSurjective })
            .take(MAX_WITNESSES),
    );
    let link_defects: Vec<CoveringWitness> = (0..source.vertex_count())
        .into_par_iter()
        .filter_map(|v| {
            let mut image: Vec<usize> = f.map_path(source.link(v));
            image.sort_unstable();
            let before = image.len();
            image.dedup();
            if image.len() != before {
                return Some(CoveringWitness { vertex: v, defect: CoveringDefect::LinkNotInjective });
            }
            let mut expected = target.link(f.vertex_map[v]).to_vec();
            expected.sort_unstable();
            (image != expected).then_some(CoveringWitness { vertex: v, defect: CoveringDefect::LinkNotSurjective })
        })
        .collect();
    witnesses.extend(link_defects.into_iter().take(MAX_WITNESSES));
    Ok(CoveringVerdict {
        is_covering: witnesses.is_empty(),
        witnesses,
    })
}
