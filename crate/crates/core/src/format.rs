//! Plain-text graph formats: a headed edge list, Graphviz DOT, and a
//! serde-ready document for JSON.
//!
//! Edge-list lines are `src dst gen_idx inv_edge_id`, one per directed edge
//! in id order, after a single header line:
//!
//! ```text
//! # expander-forge v1 q1=5 q2=13 n=1 variant=cartan mode=pgl V=182
//! ```

use std::fmt::Write as _;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::multigraph::{Edge, SerreGraph};
use crate::tower::{Mode, TowerLevel, Variant};

const MAGIC: &str = "expander-forge";
const VERSION: &str = "v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphHeader {
    pub q1: u64,
    pub q2: u64,
    pub n: u32,
    pub variant: Variant,
    pub mode: Mode,
    pub vertices: usize,
}

impl GraphHeader {
    pub fn new(q1: u64, q2: u64, n: u32, variant: Variant, mode: Mode, vertices: usize) -> Self {
        Self {
            q1,
            q2,
            n,
            variant,
            mode,
            vertices,
        }
    }

    pub fn for_level(level: &TowerLevel) -> Self {
        Self::new(
            level.generators.quaternions.q1(),
            level.ring().prime(),
            level.n,
            level.variant,
            level.mode,
            level.vertex_count(),
        )
    }
}

impl std::fmt::Display for GraphHeader {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "# {MAGIC} {VERSION} q1={} q2={} n={} variant={} mode={} V={}",
            self.q1, self.q2, self.n, self.variant, self.mode, self.vertices
        )
    }
}

pub fn parse_header(line: &str) -> Result<GraphHeader> {
    let bad = |why: &str| Error::InvalidInput(format!("bad header ({why}): {line:?}"));
    let mut tokens = line.split_whitespace();
    if tokens.next() != Some("#") || tokens.next() != Some(MAGIC) {
        return Err(bad("missing magic"));
    }
    if tokens.next() != Some(VERSION) {
        return Err(bad("unsupported version"));
    }
    let mut fields = std::collections::BTreeMap::new();
    for tok in tokens {
        let (k, v) = tok.split_once('=').ok_or_else(|| bad("expected key=value"))?;
        if fields.insert(k, v).is_some() {
            return Err(bad("duplicate key"));
        }
    }
    let get = |k: &str| fields.get(k).copied().ok_or_else(|| bad(&format!("missing {k}")));
    let num = |k: &str| -> Result<u64> { get(k)?.parse().map_err(|_| bad(&format!("{k} is not a number"))) };
    let header = GraphHeader {
        q1: num("q1")?,
        q2: num("q2")?,
        n: u32::try_from(num("n")?).map_err(|_| bad("n out of range"))?,
        variant: get("variant")?.parse()?,
        mode: get("mode")?.parse()?,
        vertices: usize::try_from(num("V")?).map_err(|_| bad("V out of range"))?,
    };
    Ok(header)
}

pub fn write_edge_list<W: Write>(mut w: W, header: &GraphHeader, g: &SerreGraph) -> io::Result<()> {
    writeln!(w, "{header}")?;
    for e in g.edges() {
        writeln!(w, "{} {} {} {}", e.origin, e.terminus, e.label, e.inverse)?;
    }
    w.flush()
}

pub fn edge_list_string(header: &GraphHeader, g: &SerreGraph) -> String {
    let mut buf = Vec::new();
    write_edge_list(&mut buf, header, g).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("edge lists are ASCII")
}

/// Parses an edge list and rebuilds the graph, validating the involution.
pub fn parse_edge_list(text: &str) -> Result<(GraphHeader, SerreGraph)> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, first) = lines.next().ok_or_else(|| Error::InvalidInput("empty edge list".into()))?;
    let header = parse_header(first)?;
    let mut edges = Vec::new();
    for (lineno, line) in lines {
        let nums = line
            .split_whitespace()
            .map(str::parse::<usize>)
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| Error::InvalidInput(format!("line {}: expected integers", lineno + 1)))?;
        let [origin, terminus, label, inverse] = nums[..] else {
            return Err(Error::InvalidInput(format!("line {}: expected 4 fields", lineno + 1)));
        };
        edges.push(Edge { origin, terminus, label, inverse });
    }
    let g = SerreGraph::new(header.vertices, edges)?;
    Ok((header, g))
}

/// Undirected multigraph, one line per geometric edge, labeled by generator.
pub fn to_dot(header: &GraphHeader, g: &SerreGraph) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "graph \"{}_{}_{}_n{}\" {{", header.variant, header.q1, header.q2, header.n);
    for v in 0..g.vertex_count() {
        let _ = writeln!(out, "  {v};");
    }
    for (id, e) in g.edges().iter().enumerate() {
        if id < e.inverse {
            let _ = writeln!(out, "  {} -- {} [label={}];", e.origin, e.terminus, e.label);
        }
    }
    out.push_str("}\n");
    out
}

/// Serde form of a graph: header plus `[src, dst, gen, inv]` rows.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphDocument {
    pub schema: u32,
    pub header: GraphHeader,
    pub edges: Vec<[usize; 4]>,
}

impl GraphDocument {
    pub fn new(header: GraphHeader, g: &SerreGraph) -> Self {
        Self {
            schema: 1,
            header,
            edges: g.edges().iter().map(|e| [e.origin, e.terminus, e.label, e.inverse]).collect(),
        }
    }

    pub fn to_graph(&self) -> Result<SerreGraph> {
        if self.schema != 1 {
            return Err(Error::InvalidInput(format!("unsupported schema {}", self.schema)));
        }
        let edges = self
            .edges
            .iter()
            .map(|&[origin, terminus, label, inverse]| Edge { origin, terminus, label, inverse })
            .collect();
        SerreGraph::new(self.header.vertices, edges)
    }
}
