//! Compact metric graphs and the index bookkeeping for boundary values.
//!
//! Edge `e` is identified with `[0, l_e]`, running from its `from` vertex
//! (x = 0) to its `to` vertex (x = l_e). Loops and multi-edges are allowed.
//!
//! One-particle boundary vectors list all `x = 0` ends first, then all
//! `x = l` ends: position `end * E + e`.
//!
//! Two-particle boundary vectors have `4E²` components. The upper half
//! holds the sides on which the first particle sits at an edge end and the
//! second runs along `e₂`; the lower half holds the sides on which the
//! second particle sits at an end and the first runs along `e₁`:
//!
//! ```text
//! upper: e₂ * 2E + end * E + e₁          (ψ_{e₁e₂}(end, y))
//! lower: 2E² + e₁ * 2E + end * E + e₂    (ψ_{e₁e₂}(x, end))
//! ```
//!
//! Each run of `2E` consecutive positions is therefore a copy of the
//! one-particle ordering for a fixed running edge, and exchanging the
//! particles maps upper position `i` to lower position `2E² + i`.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum End {
    /// x = 0
    Start,
    /// x = l
    Finish,
}

impl End {
    pub const BOTH: [End; 2] = [End::Start, End::Finish];

    pub fn index(self) -> usize {
        match self {
            End::Start => 0,
            End::Finish => 1,
        }
    }

    pub fn from_index(i: usize) -> End {
        if i == 0 {
            End::Start
        } else {
            End::Finish
        }
    }
}

/// Which half of a two-particle boundary vector a component belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Half {
    /// first particle at an edge end
    First,
    /// second particle at an edge end
    Second,
}

/// A side of the rectangle `D_{e₁e₂} = (0, l_{e₁}) × (0, l_{e₂})`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Side {
    pub half: Half,
    pub end: End,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub length: f64,
}

impl Edge {
    pub fn vertex_at(&self, end: End) -> usize {
        match end {
            End::Start => self.from,
            End::Finish => self.to,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricGraph {
    vertices: Vec<String>,
    edges: Vec<Edge>,
}

/// Vertex names may be given as strings or integers in configs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VertexId {
    Index(u64),
    Name(String),
}

impl From<u64> for VertexId {
    fn from(i: u64) -> Self {
        VertexId::Index(i)
    }
}

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VertexId::Index(i) => write!(f, "{i}"),
            VertexId::Name(s) => f.write_str(s),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeSpec {
    pub from: VertexId,
    pub to: VertexId,
    pub length: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphSpec {
    /// Optional explicit vertex list; inferred from the edges when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vertices: Option<Vec<VertexId>>,
    pub edges: Vec<EdgeSpec>,
}

impl GraphSpec {
    /// A single edge of length `l` between two distinct vertices.
    pub fn interval(l: f64) -> Self {
        Self {
            vertices: None,
            edges: vec![EdgeSpec {
                from: VertexId::Index(0),
                to: VertexId::Index(1),
                length: l,
            }],
        }
    }

    /// Star with the centre as the `x = 0` end of every edge.
    pub fn star(lengths: &[f64]) -> Self {
        Self {
            vertices: None,
            edges: lengths
                .iter()
                .enumerate()
                .map(|(i, &l)| EdgeSpec {
                    from: VertexId::Index(0),
                    to: VertexId::Index(i as u64 + 1),
                    length: l,
                })
                .collect(),
        }
    }

    /// One edge whose two ends meet at the same vertex.
    pub fn ring(l: f64) -> Self {
        Self {
            vertices: None,
            edges: vec![EdgeSpec {
                from: VertexId::Index(0),
                to: VertexId::Index(0),
                length: l,
            }],
        }
    }
}

pub fn build_graph(spec: &GraphSpec) -> Result<MetricGraph> {
    if spec.edges.is_empty() {
        return Err(Error::Graph("a graph needs at least one edge".into()));
    }
    let mut names: Vec<String> = Vec::new();
    let mut lookup: HashMap<String, usize> = HashMap::new();
    let declared = spec.vertices.is_some();
    if let Some(vs) = &spec.vertices {
        for v in vs {
            let name = v.to_string();
            if lookup.insert(name.clone(), names.len()).is_some() {
                return Err(Error::Graph(format!("vertex {name} declared twice")));
            }
            names.push(name);
        }
    }
    let mut edges = Vec::with_capacity(spec.edges.len());
    for (i, e) in spec.edges.iter().enumerate() {
        if !(e.length.is_finite() && e.length > 0.0) {
            return Err(Error::Graph(format!("edge {i} has nonpositive or non-finite length {}", e.length)));
        }
        let mut resolve = |v: &VertexId| -> Result<usize> {
            let name = v.to_string();
            if let Some(&k) = lookup.get(&name) {
                return Ok(k);
            }
            if declared {
                return Err(Error::Graph(format!("edge {i} references undeclared vertex {name}")));
            }
            lookup.insert(name.clone(), names.len());
            names.push(name);
            Ok(names.len() - 1)
        };
        let from = resolve(&e.from)?;
        let to = resolve(&e.to)?;
        edges.push(Edge {
            from,
            to,
            length: e.length,
        });
    }
    Ok(MetricGraph { vertices: names, edges })
}

impl MetricGraph {
    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> &Edge {
        &self.edges[e]
    }

    pub fn length(&self, e: usize) -> f64 {
        self.edges[e].length
    }

    pub fn lengths(&self) -> Vec<f64> {
        self.edges.iter().map(|e| e.length).collect()
    }

    pub fn vertex_name(&self, v: usize) -> &str {
        &self.vertices[v]
    }

    pub fn total_length(&self) -> f64 {
        self.edges.iter().map(|e| e.length).sum()
    }

    pub fn min_length(&self) -> f64 {
        self.edges.iter().map(|e| e.length).fold(f64::INFINITY, f64::min)
    }

    pub fn max_length(&self) -> f64 {
        self.edges.iter().map(|e| e.length).fold(0.0, f64::max)
    }

    /// Edge ends at vertex `v`, in boundary-vector order.
    pub fn ends_at(&self, v: usize) -> Vec<(usize, End)> {
        let mut out = Vec::new();
        for end in End::BOTH {
            for (e, edge) in self.edges.iter().enumerate() {
                if edge.vertex_at(end) == v {
                    out.push((e, end));
                }
            }
        }
        out
    }

    pub fn degree(&self, v: usize) -> usize {
        self.ends_at(v).len()
    }

    pub fn index_maps(&self) -> BoundaryIndexMap {
        index_maps(self)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryIndexMap {
    num_edges: usize,
    /// one-particle positions grouped by vertex
    vertex_blocks: Vec<Vec<usize>>,
    /// vertex of each one-particle position
    vertex_of: Vec<usize>,
}

pub fn index_maps(g: &MetricGraph) -> BoundaryIndexMap {
    let e = g.num_edges();
    let mut vertex_blocks = vec![Vec::new(); g.num_vertices()];
    let mut vertex_of = vec![0; 2 * e];
    for end in End::BOTH {
        for (k, edge) in g.edges().iter().enumerate() {
            let pos = end.index() * e + k;
            let v = edge.vertex_at(end);
            vertex_blocks[v].push(pos);
            vertex_of[pos] = v;
        }
    }
    BoundaryIndexMap {
        num_edges: e,
        vertex_blocks,
        vertex_of,
    }
}

impl BoundaryIndexMap {
    pub fn num_edges(&self) -> usize {
        self.num_edges
    }

    pub fn one_particle_dim(&self) -> usize {
        2 * self.num_edges
    }

    pub fn two_particle_dim(&self) -> usize {
        4 * self.num_edges * self.num_edges
    }

    pub fn reduced_dim(&self) -> usize {
        2 * self.num_edges * self.num_edges
    }

    pub fn one_particle(&self, edge: usize, end: End) -> usize {
        end.index() * self.num_edges + edge
    }

    pub fn one_particle_inverse(&self, pos: usize) -> (usize, End) {
        (pos % self.num_edges, End::from_index(pos / self.num_edges))
    }

    /// Position of `ψ_{e₁e₂}` restricted to `side`.
    pub fn two_particle(&self, e1: usize, e2: usize, side: Side) -> usize {
        let n = self.num_edges;
        match side.half {
            Half::First => e2 * 2 * n + self.one_particle(e1, side.end),
            Half::Second => 2 * n * n + e1 * 2 * n + self.one_particle(e2, side.end),
        }
    }

    pub fn two_particle_inverse(&self, pos: usize) -> (usize, usize, Side) {
        let n = self.num_edges;
        let half_dim = 2 * n * n;
        let (half, rest) = if pos < half_dim { (Half::First, pos) } else { (Half::Second, pos - half_dim) };
        let running = rest / (2 * n);
        let (fixed, end) = self.one_particle_inverse(rest % (2 * n));
        match half {
            Half::First => (fixed, running, Side { half, end }),
            Half::Second => (running, fixed, Side { half, end }),
        }
    }

    /// Position of `(e₁, e₂, end)` in the exchange-reduced vector, which
    /// keeps the first-particle half only.
    pub fn reduced(&self, e1: usize, e2: usize, end: End) -> usize {
        self.two_particle(e1, e2, Side { half: Half::First, end })
    }

    pub fn vertex_blocks(&self) -> &[Vec<usize>] {
        &self.vertex_blocks
    }

    pub fn vertex_of(&self, pos: usize) -> usize {
        self.vertex_of[pos]
    }

    /// Positions of the subspace `V_{e_r}` of one half: all components whose
    /// running edge is `e_r`.
    pub fn running_block(&self, half: Half, running: usize) -> std::ops::Range<usize> {
        let n = self.num_edges;
        let base = match half {
            Half::First => 0,
            Half::Second => 2 * n * n,
        } + running * 2 * n;
        base..base + 2 * n
    }

    /// Two-particle locality blocks: for each half, running edge and vertex,
    /// the components whose fixed particle sits at that vertex.
    pub fn two_particle_local_blocks(&self) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        for half in [Half::First, Half::Second] {
            for r in 0..self.num_edges {
                let base = self.running_block(half, r).start;
                for block in &self.vertex_blocks {
                    if !block.is_empty() {
                        out.push(block.iter().map(|p| base + p).collect());
                    }
                }
            }
        }
        out
    }
}
