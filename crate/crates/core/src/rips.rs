//! Vietoris-Rips filtrations of a distance matrix.
//!
//! Simplices are totally ordered by `(value, dimension, lexicographic vertices)`,
//! which puts every face before its cofaces. Vertices and edges are always held
//! in memory and triangles are materialized when `max_dim == 2`. Anything above
//! that is generated on demand, grouped by its diameter edge.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::pointcloud::DistanceMatrix;

pub const MAX_SUPPORTED_DIM: usize = 2;
pub const DEFAULT_MEMORY_BUDGET: u64 = 4 << 30;
const NO_EDGE: u32 = u32::MAX;
/// Rough per-simplex cost used by the memory estimate (vertices, value, index entry).
const BYTES_PER_SIMPLEX: u64 = 64;

/// Units of filtration values. `Radius` values are exactly half the `Diameter` values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Scale {
    #[default]
    Diameter,
    Radius,
}

impl Scale {
    pub fn factor(self) -> f64 {
        match self {
            Scale::Diameter => 1.0,
            Scale::Radius => 0.5,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Scale::Diameter => "diameter",
            Scale::Radius => "radius",
        }
    }
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "diameter" => Ok(Scale::Diameter),
            "radius" => Ok(Scale::Radius),
            other => Err(Error::InvalidArgument(format!(
                "unknown scale convention '{other}' (expected diameter or radius)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FiltrationSimplex {
    /// Strictly increasing point indices.
    pub vertices: Vec<u32>,
    pub value: f64,
}

impl FiltrationSimplex {
    pub fn new(vertices: Vec<u32>, value: f64) -> Self {
        Self { vertices, value }
    }

    pub fn dimension(&self) -> usize {
        self.vertices.len() - 1
    }
}

/// Canonical filtration order.
pub fn filtration_cmp(a: &FiltrationSimplex, b: &FiltrationSimplex) -> std::cmp::Ordering {
    a.value
        .total_cmp(&b.value)
        .then(a.vertices.len().cmp(&b.vertices.len()))
        .then_with(|| a.vertices.cmp(&b.vertices))
}

#[derive(Debug, Clone)]
pub struct FiltrationConfig {
    pub max_dim: usize,
    pub scale: Scale,
    /// Truncation scale in `scale` units; `None` means the enclosing radius.
    pub threshold: Option<f64>,
    pub memory_budget: u64,
}

impl Default for FiltrationConfig {
    fn default() -> Self {
        Self {
            max_dim: 1,
            scale: Scale::Diameter,
            threshold: None,
            memory_budget: DEFAULT_MEMORY_BUDGET,
        }
    }
}

impl FiltrationConfig {
    pub fn new(max_dim: usize, scale: Scale) -> Self {
        Self {
            max_dim,
            scale,
            ..Self::default()
        }
    }

    pub fn with_threshold(mut self, threshold: Option<f64>) -> Self {
        self.threshold = threshold;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub value: f64,
    pub u: u32,
    pub v: u32,
}

/// A simplex of dimension 2 or 3 in compact form; unused trailing slots are zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Clique {
    pub value: f64,
    pub vertices: [u32; 4],
}

impl Clique {
    pub fn vertices(&self, dim: usize) -> &[u32] {
        &self.vertices[..=dim]
    }
}

#[derive(Debug, Clone)]
pub struct Filtration {
    n: usize,
    max_dim: usize,
    scale: Scale,
    threshold: f64,
    edges: Vec<Edge>,
    edge_rank: Vec<u32>,
    /// Triangles, present only when `max_dim == 2`.
    triangles: Vec<Clique>,
    triangle_index: HashMap<[u32; 3], u32>,
}

/// Builds the Rips filtration of `dm` truncated at the configured threshold.
pub fn build_filtration(dm: &DistanceMatrix, cfg: &FiltrationConfig) -> Result<Filtration> {
    if cfg.max_dim > MAX_SUPPORTED_DIM {
        return Err(Error::UnsupportedDimension(cfg.max_dim));
    }
    if let Some(t) = cfg.threshold {
        if t.is_nan() || t < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "threshold must be a nonnegative scale value, got {t}"
            )));
        }
    }
    let n = dm.len();
    if n > u32::MAX as usize / 2 {
        return Err(Error::InvalidArgument(format!("{n} points is too many")));
    }
    let factor = cfg.scale.factor();
    let threshold = cfg
        .threshold
        .unwrap_or_else(|| dm.enclosing_radius() * factor);

    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let value = dm.get(i, j) * factor;
            if value <= threshold {
                edges.push(Edge {
                    value,
                    u: i as u32,
                    v: j as u32,
                });
            }
        }
    }

    let estimate = estimate_bytes(n, edges.len(), cfg.max_dim);
    if estimate > cfg.memory_budget {
        return Err(Error::MemoryBudget {
            estimated_bytes: estimate,
            budget_bytes: cfg.memory_budget,
        });
    }

    edges.sort_by(|a, b| a.value.total_cmp(&b.value).then((a.u, a.v).cmp(&(b.u, b.v))));
    let mut edge_rank = vec![NO_EDGE; n * n];
    for (r, e) in edges.iter().enumerate() {
        edge_rank[e.u as usize * n + e.v as usize] = r as u32;
        edge_rank[e.v as usize * n + e.u as usize] = r as u32;
    }

    let mut filtration = Filtration {
        n,
        max_dim: cfg.max_dim,
        scale: cfg.scale,
        threshold,
        edges,
        edge_rank,
        triangles: Vec::new(),
        triangle_index: HashMap::new(),
    };
    if cfg.max_dim >= 2 {
        let triangles: Vec<Clique> = filtration.cliques(2).collect();
        filtration.triangle_index = triangles
            .iter()
            .enumerate()
            .map(|(i, t)| ([t.vertices[0], t.vertices[1], t.vertices[2]], i as u32))
            .collect();
        filtration.triangles = triangles;
    }
    Ok(filtration)
}

fn binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Expected storage for the edge rank table and the materialized simplices, with
/// edges placed independently at the observed density.
fn estimate_bytes(n: usize, edges: usize, max_dim: usize) -> u64 {
    let pairs = binomial(n as u64, 2);
    let p = if pairs > 0.0 { edges as f64 / pairs } else { 0.0 };
    let rank_table = (n * n * 4) as f64;
    let mut total = (n + edges) as f64;
    for k in 2..=max_dim {
        let edges_in_simplex = (k * (k + 1) / 2) as i32;
        total += binomial(n as u64, k as u64 + 1) * p.powi(edges_in_simplex);
    }
    (rank_table + total * BYTES_PER_SIMPLEX as f64).min(u64::MAX as f64) as u64
}

impl Filtration {
    pub fn num_vertices(&self) -> usize {
        self.n
    }

    pub fn max_dim(&self) -> usize {
        self.max_dim
    }

    pub fn scale(&self) -> Scale {
        self.scale
    }

    /// Effective truncation scale (in `scale` units).
    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Filtration position of edge `{u, v}` among all edges, if present.
    #[inline]
    pub fn edge_index(&self, u: u32, v: u32) -> Option<usize> {
        match self.edge_rank[u as usize * self.n + v as usize] {
            NO_EDGE => None,
            r => Some(r as usize),
        }
    }

    /// Materialized triangles (empty unless `max_dim == 2`).
    pub fn triangles(&self) -> &[Clique] {
        &self.triangles
    }

    pub fn triangle_index(&self, v: [u32; 3]) -> Option<usize> {
        self.triangle_index.get(&v).map(|&i| i as usize)
    }

    /// All simplices of dimension `dim` (2 or 3) in filtration order, generated
    /// on the fly from the edge list.
    pub fn cliques(&self, dim: usize) -> CliqueStream<'_> {
        assert!((2..=3).contains(&dim), "cliques are generated for dimensions 2 and 3");
        CliqueStream {
            f: self,
            dim,
            next_edge: 0,
            buffer: Vec::new(),
            pos: 0,
            candidates: Vec::new(),
        }
    }

    /// Every simplex up to dimension `max_dim + 1`, sorted in filtration order.
    pub fn to_simplices(&self) -> Vec<FiltrationSimplex> {
        let mut out: Vec<FiltrationSimplex> = (0..self.n as u32)
            .map(|v| FiltrationSimplex::new(vec![v], 0.0))
            .collect();
        out.extend(
            self.edges
                .iter()
                .map(|e| FiltrationSimplex::new(vec![e.u, e.v], e.value)),
        );
        for dim in 2..=self.max_dim + 1 {
            out.extend(
                self.cliques(dim)
                    .map(|c| FiltrationSimplex::new(c.vertices(dim).to_vec(), c.value)),
            );
        }
        out.sort_by(filtration_cmp);
        out
    }

    /// Simplex count per dimension `0..=max_dim + 1`.
    pub fn counts(&self) -> Vec<usize> {
        let mut counts = vec![self.n, self.edges.len()];
        for dim in 2..=self.max_dim + 1 {
            counts.push(self.cliques(dim).count());
        }
        counts.truncate(self.max_dim + 2);
        counts
    }

    /// Debug dump: `value,dimension,vertices` with space-separated vertex ids.
    pub fn to_debug_csv(&self) -> String {
        let mut out = String::from("value,dimension,vertices\n");
        for s in self.to_simplices() {
            let verts: Vec<String> = s.vertices.iter().map(u32::to_string).collect();
            out.push_str(&format!("{},{},{}\n", s.value, s.dimension(), verts.join(" ")));
        }
        out
    }
}

/// Iterator over the simplices of one dimension in `(value, lex)` order.
///
/// Each simplex is emitted once, from its diameter edge: the edge with the
/// largest filtration position among its edges. Edges sharing a value are
/// processed as one group and the group's output is sorted lexicographically.
pub struct CliqueStream<'a> {
    f: &'a Filtration,
    dim: usize,
    next_edge: usize,
    buffer: Vec<Clique>,
    pos: usize,
    candidates: Vec<u32>,
}

impl CliqueStream<'_> {
    fn fill_group(&mut self) -> bool {
        self.buffer.clear();
        self.pos = 0;
        let edges = &self.f.edges;
        while self.buffer.is_empty() && self.next_edge < edges.len() {
            let value = edges[self.next_edge].value;
            while self.next_edge < edges.len() && edges[self.next_edge].value == value {
                self.emit_from_edge(self.next_edge);
                self.next_edge += 1;
            }
        }
        if self.buffer.is_empty() {
            return false;
        }
        self.buffer.sort_by_key(|c| c.vertices);
        true
    }

    fn emit_from_edge(&mut self, rank: usize) {
        let f = self.f;
        let n = f.n;
        let e = f.edges[rank];
        let r = rank as u32;
        let (a, b) = (e.u as usize, e.v as usize);
        self.candidates.clear();
        for c in 0..n {
            if c == a || c == b {
                continue;
            }
            let ra = f.edge_rank[a * n + c];
            let rb = f.edge_rank[b * n + c];
            if ra < r && rb < r {
                self.candidates.push(c as u32);
            }
        }
        match self.dim {
            2 => {
                for &c in &self.candidates {
                    let mut v = [e.u, e.v, c, 0];
                    v[..3].sort_unstable();
                    self.buffer.push(Clique {
                        value: e.value,
                        vertices: v,
                    });
                }
            }
            3 => {
                for (i, &c) in self.candidates.iter().enumerate() {
                    for &d in &self.candidates[i + 1..] {
                        if f.edge_rank[c as usize * n + d as usize] < r {
                            let mut v = [e.u, e.v, c, d];
                            v.sort_unstable();
                            self.buffer.push(Clique {
                                value: e.value,
                                vertices: v,
                            });
                        }
                    }
                }
            }
            _ => unreachable!(),
        }
    }
}

impl Iterator for CliqueStream<'_> {
    type Item = Clique;

    fn next(&mut self) -> Option<Clique> {
        if self.pos >= self.buffer.len() && !self.fill_group() {
            return None;
        }
        let c = self.buffer[self.pos];
        self.pos += 1;
        Some(c)
    }
}
