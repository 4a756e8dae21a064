//! Persistence pairs over Z/2 by boundary-matrix column reduction.
//!
//! Three interchangeable engines are registered by name:
//!
//! * `streaming` (default): H0 by union-find, then cohomology per dimension.
//!   Coboundaries are never stored: each column is regenerated from the edge
//!   list when needed, and a column whose first cofacet is not yet a pivot is
//!   paired after a single scan. Columns paired in the dimension below are
//!   skipped (clearing), and the `max_dim + 1` simplices are never materialized.
//! * `twist`: the textbook clearing variant on a fully materialized filtration,
//!   reducing from the top dimension down.
//! * `standard`: plain left-to-right reduction, no shortcuts.
//!
//! All three produce the same multiset of pairs.

use std::cmp::Reverse;
use std::collections::hash_map::Entry;
use std::collections::{BinaryHeap, HashMap, HashSet};
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::rips::{Filtration, FiltrationSimplex};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PersistencePair {
    pub dim: usize,
    pub birth: f64,
    /// `f64::INFINITY` for essential classes.
    pub death: f64,
}

impl PersistencePair {
    pub fn new(dim: usize, birth: f64, death: f64) -> Self {
        Self { dim, birth, death }
    }

    pub fn is_essential(&self) -> bool {
        self.death.is_infinite()
    }

    pub fn lifetime(&self) -> f64 {
        self.death - self.birth
    }
}

impl fmt::Display for PersistencePair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "H{} [{}, {})", self.dim, self.birth, self.death)
    }
}

/// Sorts pairs by `(dim, birth, death)` so multisets can be compared with `==`.
pub fn canonical_order(pairs: &mut [PersistencePair]) {
    pairs.sort_by(|a, b| {
        a.dim
            .cmp(&b.dim)
            .then(a.birth.total_cmp(&b.birth))
            .then(a.death.total_cmp(&b.death))
    });
}

pub trait ReductionEngine: Send + Sync {
    fn name(&self) -> &'static str;

    /// All pairs of dimension `<= f.max_dim()`, zero-lifetime pairs included,
    /// in canonical order.
    fn compute(&self, f: &Filtration) -> Result<Vec<PersistencePair>>;
}

pub struct EngineRegistry {
    engines: Vec<Arc<dyn ReductionEngine>>,
}

impl Default for EngineRegistry {
    fn default() -> Self {
        let mut r = Self { engines: Vec::new() };
        r.register(Arc::new(StreamingReduction));
        r.register(Arc::new(TwistReduction));
        r.register(Arc::new(StandardReduction));
        r
    }
}

impl EngineRegistry {
    pub fn register(&mut self, engine: Arc<dyn ReductionEngine>) {
        self.engines.retain(|e| e.name() != engine.name());
        self.engines.push(engine);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn ReductionEngine>> {
        self.engines
            .iter()
            .find(|e| e.name() == name)
            .cloned()
            .ok_or_else(|| Error::UnknownStrategy {
                kind: "reduction engine",
                name: name.to_string(),
                available: self.names().join(", "),
            })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.engines.iter().map(|e| e.name()).collect()
    }
}

pub const DEFAULT_ENGINE: &str = "streaming";

/// Persistence pairs with the default engine.
pub fn compute_persistence(f: &Filtration) -> Result<Vec<PersistencePair>> {
    StreamingReduction.compute(f)
}

/// `β_k` at scale `epsilon`: pairs of dimension `k` with `birth <= epsilon < death`.
pub fn betti_numbers(f: &Filtration, epsilon: f64) -> Result<Vec<usize>> {
    let pairs = compute_persistence(f)?;
    betti_from_pairs(&pairs, f.max_dim(), epsilon, f.threshold())
}

pub fn betti_from_pairs(
    pairs: &[PersistencePair],
    max_dim: usize,
    epsilon: f64,
    threshold: f64,
) -> Result<Vec<usize>> {
    if epsilon.is_nan() || epsilon < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "epsilon must be nonnegative, got {epsilon}"
        )));
    }
    if epsilon > threshold {
        return Err(Error::InvalidArgument(format!(
            "epsilon {epsilon} lies above the filtration threshold {threshold}; the complex is unknown there"
        )));
    }
    let mut betti = vec![0; max_dim + 1];
    for p in pairs {
        if p.dim <= max_dim && p.birth <= epsilon && epsilon < p.death {
            betti[p.dim] += 1;
        }
    }
    Ok(betti)
}

/// Z/2 sum of two sorted index lists.
fn xor_into(acc: &mut Vec<u32>, other: &[u32], scratch: &mut Vec<u32>) {
    scratch.clear();
    scratch.reserve(acc.len() + other.len());
    let (mut i, mut j) = (0, 0);
    while i < acc.len() && j < other.len() {
        match acc[i].cmp(&other[j]) {
            std::cmp::Ordering::Less => {
                scratch.push(acc[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                scratch.push(other[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    scratch.extend_from_slice(&acc[i..]);
    scratch.extend_from_slice(&other[j..]);
    std::mem::swap(acc, scratch);
}

const UNPAIRED: u32 = u32::MAX;

/// Column store for one boundary matrix: reduced columns indexed by their pivot row.
struct PivotTable {
    pivot_column: Vec<u32>,
    columns: Vec<Vec<u32>>,
    scratch: Vec<u32>,
}

impl PivotTable {
    fn new(rows: usize) -> Self {
        Self {
            pivot_column: vec![UNPAIRED; rows],
            columns: Vec::new(),
            scratch: Vec::new(),
        }
    }

    /// Reduces `col` against stored pivots. Returns the pivot row if the column
    /// survives, storing it.
    fn reduce(&mut self, mut col: Vec<u32>) -> Option<u32> {
        while let Some(&low) = col.last() {
            match self.pivot_column[low as usize] {
                UNPAIRED => {
                    self.pivot_column[low as usize] = self.columns.len() as u32;
                    self.columns.push(col);
                    return Some(low);
                }
                c => xor_into(&mut col, &self.columns[c as usize], &mut self.scratch),
            }
        }
        None
    }
}

struct UnionFind {
    parent: Vec<u32>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n as u32).collect(),
        }
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let p = self.parent[x as usize];
            self.parent[x as usize] = self.parent[p as usize];
            x = p;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        // the younger component (larger root) is absorbed; all births are 0 anyway
        let (keep, gone) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.parent[gone as usize] = keep;
        true
    }
}

pub struct StreamingReduction;

impl ReductionEngine for StreamingReduction {
    fn name(&self) -> &'static str {
        "streaming"
    }

    fn compute(&self, f: &Filtration) -> Result<Vec<PersistencePair>> {
        let n = f.num_vertices();
        let edges = f.edges();
        let mut pairs = Vec::new();

        let mut uf = UnionFind::new(n);
        let mut edge_positive = vec![true; edges.len()];
        let mut components = n;
        for (i, e) in edges.iter().enumerate() {
            if uf.union(e.u, e.v) {
                edge_positive[i] = false;
                components -= 1;
                pairs.push(PersistencePair::new(0, 0.0, e.value));
            }
        }
        pairs.extend((0..components).map(|_| PersistencePair::new(0, 0.0, f64::INFINITY)));

        let mut cleared: HashSet<[u32; 4]> = HashSet::new();
        for dim in 1..=f.max_dim() {
            // columns in reverse filtration order, minus those already known to be negative
            let columns: Vec<([u32; 4], f64)> = if dim == 1 {
                edges
                    .iter()
                    .zip(&edge_positive)
                    .rev()
                    .filter(|(_, &pos)| pos)
                    .map(|(e, _)| ([e.u, e.v, 0, 0], e.value))
                    .collect()
            } else {
                f.triangles()
                    .iter()
                    .rev()
                    .filter(|t| !cleared.contains(&t.vertices))
                    .map(|t| (t.vertices, t.value))
                    .collect()
            };
            cleared = reduce_coboundaries(f, dim, &columns, &mut pairs);
        }
        canonical_order(&mut pairs);
        Ok(pairs)
    }
}

/// A simplex in filtration order: value first, then vertices (trailing slots zero).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Key {
    value: u64,
    vertices: [u32; 4],
}

impl Key {
    fn new(value: f64, vertices: [u32; 4]) -> Self {
        // values are nonnegative, so the bit pattern orders like the float; `+ 0.0` folds -0.0
        Self {
            value: (value + 0.0).to_bits(),
            vertices,
        }
    }

    fn value(&self) -> f64 {
        f64::from_bits(self.value)
    }
}

/// Calls `visit` on every `dim + 1` simplex of the complex containing the `dim`-simplex `s`.
fn for_each_cofacet(f: &Filtration, s: &[u32], value: f64, mut visit: impl FnMut(Key)) {
    let edges = f.edges();
    'next: for c in 0..f.num_vertices() as u32 {
        let mut v = value;
        for &x in s {
            match f.edge_index(x, c) {
                Some(r) => v = v.max(edges[r].value),
                None => continue 'next,
            }
        }
        let mut out = [0u32; 4];
        let at = s.partition_point(|&x| x < c);
        out[..at].copy_from_slice(&s[..at]);
        out[at] = c;
        out[at + 1..=s.len()].copy_from_slice(&s[at..]);
        visit(Key::new(v, out));
    }
}

/// Pops the smallest entry with odd multiplicity.
fn pop_pivot(heap: &mut BinaryHeap<Reverse<Key>>) -> Option<Key> {
    while let Some(Reverse(top)) = heap.pop() {
        if heap.peek() == Some(&Reverse(top)) {
            heap.pop();
        } else {
            return Some(top);
        }
    }
    None
}

/// Reduces the coboundary matrix of one dimension. `columns` must be in reverse
/// filtration order. Pairs go to `pairs`; the returned set holds the paired
/// cofacets, which are negative and can be skipped in the next dimension.
fn reduce_coboundaries(
    f: &Filtration,
    dim: usize,
    columns: &[([u32; 4], f64)],
    pairs: &mut Vec<PersistencePair>,
) -> HashSet<[u32; 4]> {
    let mut pivots: HashMap<[u32; 4], u32> = HashMap::new();
    // reduction chains, kept only for columns that needed more than themselves
    let mut chains: HashMap<u32, Vec<u32>> = HashMap::new();
    let mut heap = BinaryHeap::new();
    let mut scratch = Vec::new();
    for (j, &(verts, value)) in columns.iter().enumerate() {
        let j = j as u32;
        let s = &verts[..=dim];
        let mut first: Option<Key> = None;
        for_each_cofacet(f, s, value, |k| {
            if first.is_none_or(|m| k < m) {
                first = Some(k);
            }
        });
        let Some(first) = first else {
            pairs.push(PersistencePair::new(dim, value, f64::INFINITY));
            continue;
        };
        if let Entry::Vacant(slot) = pivots.entry(first.vertices) {
            slot.insert(j);
            pairs.push(PersistencePair::new(dim, value, first.value()));
            continue;
        }

        heap.clear();
        for_each_cofacet(f, s, value, |k| heap.push(Reverse(k)));
        let mut chain = vec![j];
        loop {
            let Some(pivot) = pop_pivot(&mut heap) else {
                pairs.push(PersistencePair::new(dim, value, f64::INFINITY));
                break;
            };
            let Some(&i) = pivots.get(&pivot.vertices) else {
                pivots.insert(pivot.vertices, j);
                pairs.push(PersistencePair::new(dim, value, pivot.value()));
                if chain.len() > 1 {
                    chains.insert(j, chain);
                }
                break;
            };
            heap.push(Reverse(pivot));
            let single = [i];
            let other = chains.get(&i).map_or(&single[..], |c| &c[..]);
            for &c in other {
                let (cv, cval) = columns[c as usize];
                for_each_cofacet(f, &cv[..=dim], cval, |k| heap.push(Reverse(k)));
            }
            xor_into(&mut chain, other, &mut scratch);
        }
    }
    pivots.into_keys().collect()
}

pub struct TwistReduction;

impl ReductionEngine for TwistReduction {
    fn name(&self) -> &'static str {
        "twist"
    }

    fn compute(&self, f: &Filtration) -> Result<Vec<PersistencePair>> {
        reduce_explicit(&f.to_simplices(), f.max_dim(), true)
    }
}

pub struct StandardReduction;

impl ReductionEngine for StandardReduction {
    fn name(&self) -> &'static str {
        "standard"
    }

    fn compute(&self, f: &Filtration) -> Result<Vec<PersistencePair>> {
        reduce_explicit(&f.to_simplices(), f.max_dim(), false)
    }
}

/// Persistence of an explicit simplex list, given in a filtration order.
///
/// The list is validated first (strictly increasing vertices, finite
/// nonnegative values, each facet listed earlier with a value no larger).
/// Pairs of dimension `<= max_dim` are returned.
pub fn persistence_of_simplices(
    simplices: &[FiltrationSimplex],
    max_dim: usize,
    clearing: bool,
) -> Result<Vec<PersistencePair>> {
    validate_simplices(simplices)?;
    reduce_explicit(simplices, max_dim, clearing)
}

fn malformed(s: &FiltrationSimplex, reason: impl Into<String>) -> Error {
    Error::MalformedFiltration {
        vertices: s.vertices.clone(),
        value: s.value,
        reason: reason.into(),
    }
}

/// Per-dimension positions, keyed by vertex list.
fn index_by_dim(simplices: &[FiltrationSimplex]) -> Vec<HashMap<&[u32], u32>> {
    let top = simplices.iter().map(|s| s.dimension()).max().unwrap_or(0);
    let mut index = vec![HashMap::new(); top + 1];
    for s in simplices {
        let map = &mut index[s.dimension()];
        let pos = map.len() as u32;
        map.insert(s.vertices.as_slice(), pos);
    }
    index
}

pub fn validate_simplices(simplices: &[FiltrationSimplex]) -> Result<()> {
    let mut seen: HashMap<&[u32], f64> = HashMap::new();
    for s in simplices {
        if s.vertices.is_empty() {
            return Err(malformed(s, "empty vertex list"));
        }
        if s.vertices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(malformed(s, "vertices are not strictly increasing"));
        }
        if !s.value.is_finite() || s.value < 0.0 {
            return Err(malformed(s, "value must be finite and nonnegative"));
        }
        if seen.contains_key(s.vertices.as_slice()) {
            return Err(malformed(s, "duplicate simplex"));
        }
        if s.vertices.len() > 1 {
            for skip in 0..s.vertices.len() {
                let facet: Vec<u32> = s
                    .vertices
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| *i != skip)
                    .map(|(_, v)| *v)
                    .collect();
                match seen.get(facet.as_slice()) {
                    None => return Err(malformed(s, format!("facet {facet:?} does not precede it"))),
                    Some(&v) if v > s.value => {
                        return Err(malformed(s, format!("facet {facet:?} has a larger value {v}")))
                    }
                    _ => {}
                }
            }
        }
        seen.insert(s.vertices.as_slice(), s.value);
    }
    Ok(())
}

fn reduce_explicit(
    simplices: &[FiltrationSimplex],
    max_dim: usize,
    clearing: bool,
) -> Result<Vec<PersistencePair>> {
    let index = index_by_dim(simplices);
    let top = index.len() - 1;
    let mut by_dim: Vec<Vec<&FiltrationSimplex>> = vec![Vec::new(); top + 1];
    for s in simplices {
        by_dim[s.dimension()].push(s);
    }

    // columns[k][j] = sorted facet positions of the j-th k-simplex
    let boundary = |k: usize, s: &FiltrationSimplex| -> Vec<u32> {
        let mut col: Vec<u32> = (0..s.vertices.len())
            .map(|skip| {
                let facet: Vec<u32> = s
                    .vertices
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| *i != skip)
                    .map(|(_, v)| *v)
                    .collect();
                index[k - 1][facet.as_slice()]
            })
            .collect();
        col.sort_unstable();
        col
    };

    // positive[k][j]: column j of dimension k reduced to zero (or was cleared)
    let mut positive: Vec<Vec<bool>> = by_dim.iter().map(|v| vec![true; v.len()]).collect();
    let mut paired_rows: Vec<Vec<bool>> = by_dim.iter().map(|v| vec![false; v.len()]).collect();
    let mut pairs = Vec::new();

    let dims: Vec<usize> = if clearing {
        (1..=top).rev().collect()
    } else {
        (1..=top).collect()
    };
    for k in dims {
        let mut table = PivotTable::new(by_dim[k - 1].len());
        for (j, s) in by_dim[k].iter().enumerate() {
            if clearing && paired_rows[k][j] {
                // a pivot of the (k+1)-boundary: this column reduces to zero
                continue;
            }
            if let Some(low) = table.reduce(boundary(k, s)) {
                positive[k][j] = false;
                paired_rows[k - 1][low as usize] = true;
                if k - 1 <= max_dim {
                    pairs.push(PersistencePair::new(k - 1, by_dim[k - 1][low as usize].value, s.value));
                }
            }
        }
    }
    for k in 0..=max_dim.min(top) {
        for (j, s) in by_dim[k].iter().enumerate() {
            if positive[k][j] && !paired_rows[k][j] {
                pairs.push(PersistencePair::new(k, s.value, f64::INFINITY));
            }
        }
    }
    canonical_order(&mut pairs);
    Ok(pairs)
}
