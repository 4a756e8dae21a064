//! Exact bottleneck distance between persistence diagrams.
//!
//! Ground metric: L∞ between `(birth, death)` points; a point's distance to
//! the diagonal is `(death - birth) / 2`. The optimal cost is always one of
//! these finitely many values, so the distance is found by binary search over
//! the sorted candidates with a perfect-matching feasibility test at each step.
//!
//! Essential (infinite-death) features only match each other, at cost
//! `|birth_a - birth_b|`; unequal essential counts give `+inf`.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::diagram::{csv_field, PersistenceDiagram};
use crate::error::{Error, Result};

/// A partial matching between the finite points of one dimension of two diagrams.
/// Indices refer to [`finite_points`] order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Matching {
    pub matched: Vec<(usize, usize)>,
    pub unmatched_a: Vec<usize>,
    pub unmatched_b: Vec<usize>,
}

/// Finite `(birth, death)` points of dimension `dim`, in diagram order.
pub fn finite_points(d: &PersistenceDiagram, dim: usize) -> Vec<(f64, f64)> {
    d.finite(dim).map(|p| (p.birth, p.death)).collect()
}

fn essential_births(d: &PersistenceDiagram, dim: usize) -> Vec<f64> {
    let mut b: Vec<f64> = d
        .dimension(dim)
        .filter(|p| p.is_essential())
        .map(|p| p.birth)
        .collect();
    b.sort_by(f64::total_cmp);
    b
}

#[inline]
fn linf(p: (f64, f64), q: (f64, f64)) -> f64 {
    (p.0 - q.0).abs().max((p.1 - q.1).abs())
}

#[inline]
fn to_diagonal(p: (f64, f64)) -> f64 {
    (p.1 - p.0) / 2.0
}

fn check_scales(a: &PersistenceDiagram, b: &PersistenceDiagram) -> Result<()> {
    if a.scale != b.scale {
        return Err(Error::ScaleMismatch {
            left: a.scale.to_string(),
            right: b.scale.to_string(),
        });
    }
    Ok(())
}

/// Cost of a given matching: the largest matched L∞ distance or unmatched
/// diagonal distance.
pub fn matching_cost(
    a: &PersistenceDiagram,
    b: &PersistenceDiagram,
    m: &Matching,
    dim: usize,
) -> Result<f64> {
    let pa = finite_points(a, dim);
    let pb = finite_points(b, dim);
    let mut seen_a = vec![false; pa.len()];
    let mut seen_b = vec![false; pb.len()];
    let mark = |seen: &mut [bool], i: usize, side: &str| -> Result<()> {
        match seen.get_mut(i) {
            None => Err(Error::InvalidMatching(format!("{side} index {i} out of range"))),
            Some(true) => Err(Error::InvalidMatching(format!("{side} index {i} used twice"))),
            Some(s) => {
                *s = true;
                Ok(())
            }
        }
    };
    let mut cost: f64 = 0.0;
    for &(i, j) in &m.matched {
        mark(&mut seen_a, i, "A")?;
        mark(&mut seen_b, j, "B")?;
        cost = cost.max(linf(pa[i], pb[j]));
    }
    for &i in &m.unmatched_a {
        mark(&mut seen_a, i, "A")?;
        cost = cost.max(to_diagonal(pa[i]));
    }
    for &j in &m.unmatched_b {
        mark(&mut seen_b, j, "B")?;
        cost = cost.max(to_diagonal(pb[j]));
    }
    if let Some(i) = seen_a.iter().position(|s| !s) {
        return Err(Error::InvalidMatching(format!("A index {i} is not covered")));
    }
    if let Some(j) = seen_b.iter().position(|s| !s) {
        return Err(Error::InvalidMatching(format!("B index {j} is not covered")));
    }
    Ok(cost)
}

/// Bipartite graph whose perfect matchings are the matchings of cost <= delta.
///
/// Left: A points, then diagonal copies of B points. Right: B points, then
/// diagonal copies of A points.
struct FeasibilityGraph {
    adj: Vec<Vec<u32>>,
    right: usize,
}

impl FeasibilityGraph {
    fn new(pa: &[(f64, f64)], pb: &[(f64, f64)], delta: f64) -> Self {
        let (na, nb) = (pa.len(), pb.len());
        let mut adj = Vec::with_capacity(na + nb);
        for (i, &p) in pa.iter().enumerate() {
            let mut row: Vec<u32> = pb
                .iter()
                .enumerate()
                .filter(|(_, &q)| linf(p, q) <= delta)
                .map(|(j, _)| j as u32)
                .collect();
            if to_diagonal(p) <= delta {
                row.push((nb + i) as u32);
            }
            adj.push(row);
        }
        for (j, &q) in pb.iter().enumerate() {
            let mut row = Vec::with_capacity(na + 1);
            if to_diagonal(q) <= delta {
                row.push(j as u32);
            }
            row.extend((nb..nb + na).map(|r| r as u32));
            adj.push(row);
        }
        Self { adj, right: na + nb }
    }

    /// Hopcroft-Karp. Returns `match_left` (right vertex per left vertex, or NONE).
    fn max_matching(&self) -> (usize, Vec<u32>) {
        const NONE: u32 = u32::MAX;
        let left = self.adj.len();
        let mut match_l = vec![NONE; left];
        let mut match_r = vec![NONE; self.right];
        let mut dist = vec![0u32; left];
        let mut size = 0;
        loop {
            // BFS layering from free left vertices
            let mut queue = VecDeque::new();
            for u in 0..left {
                if match_l[u] == NONE {
                    dist[u] = 0;
                    queue.push_back(u);
                } else {
                    dist[u] = u32::MAX;
                }
            }
            let mut found = false;
            while let Some(u) = queue.pop_front() {
                for &v in &self.adj[u] {
                    let w = match_r[v as usize];
                    if w == NONE {
                        found = true;
                    } else if dist[w as usize] == u32::MAX {
                        dist[w as usize] = dist[u] + 1;
                        queue.push_back(w as usize);
                    }
                }
            }
            if !found {
                break;
            }
            let mut it = vec![0usize; left];
            for u in 0..left {
                if match_l[u] == NONE && self.augment(u, &mut match_l, &mut match_r, &mut dist, &mut it) {
                    size += 1;
                }
            }
        }
        (size, match_l)
    }

    /// DFS along the BFS layers; path length is bounded by the left side size.
    fn augment(
        &self,
        u: usize,
        match_l: &mut [u32],
        match_r: &mut [u32],
        dist: &mut [u32],
        it: &mut [usize],
    ) -> bool {
        const NONE: u32 = u32::MAX;
        while it[u] < self.adj[u].len() {
            let v = self.adj[u][it[u]] as usize;
            it[u] += 1;
            let w = match_r[v];
            let free_path = w == NONE
                || (dist[w as usize] == dist[u] + 1
                    && self.augment(w as usize, match_l, match_r, dist, it));
            if free_path {
                match_l[u] = v as u32;
                match_r[v] = u as u32;
                return true;
            }
        }
        dist[u] = u32::MAX;
        false
    }
}

fn feasible(pa: &[(f64, f64)], pb: &[(f64, f64)], delta: f64) -> bool {
    let g = FeasibilityGraph::new(pa, pb, delta);
    g.max_matching().0 == pa.len() + pb.len()
}

fn candidates(pa: &[(f64, f64)], pb: &[(f64, f64)]) -> Vec<f64> {
    let mut c = Vec::with_capacity(pa.len() * pb.len() + pa.len() + pb.len() + 1);
    c.push(0.0);
    c.extend(pa.iter().map(|&p| to_diagonal(p)));
    c.extend(pb.iter().map(|&q| to_diagonal(q)));
    for &p in pa {
        c.extend(pb.iter().map(|&q| linf(p, q)));
    }
    c.sort_by(f64::total_cmp);
    c.dedup();
    c
}

/// Smallest feasible candidate.
fn finite_bottleneck(pa: &[(f64, f64)], pb: &[(f64, f64)]) -> f64 {
    // points on the diagonal cost nothing unmatched and matching them elsewhere never helps
    let off = |p: &[(f64, f64)]| -> Vec<(f64, f64)> { p.iter().copied().filter(|q| q.1 > q.0).collect() };
    let (pa, pb) = (&off(pa)[..], &off(pb)[..]);
    if pa.is_empty() && pb.is_empty() {
        return 0.0;
    }
    let c = candidates(pa, pb);
    // the largest candidate dominates every diagonal distance, so it is feasible
    let (mut lo, mut hi) = (0usize, c.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if feasible(pa, pb, c[mid]) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    c[lo]
}

fn essential_cost(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Bottleneck distance between the dimension-`dim` parts of two diagrams.
pub fn bottleneck_distance(a: &PersistenceDiagram, b: &PersistenceDiagram, dim: usize) -> Result<f64> {
    check_scales(a, b)?;
    let inf = essential_cost(&essential_births(a, dim), &essential_births(b, dim));
    if inf.is_infinite() {
        return Ok(inf);
    }
    let finite = finite_bottleneck(&finite_points(a, dim), &finite_points(b, dim));
    Ok(finite.max(inf))
}

/// An optimal matching of the finite points together with its cost.
pub fn bottleneck_matching(
    a: &PersistenceDiagram,
    b: &PersistenceDiagram,
    dim: usize,
) -> Result<(f64, Matching)> {
    check_scales(a, b)?;
    let pa = finite_points(a, dim);
    let pb = finite_points(b, dim);
    let delta = finite_bottleneck(&pa, &pb);
    let g = FeasibilityGraph::new(&pa, &pb, delta);
    let (_, match_l) = g.max_matching();
    let nb = pb.len();
    let mut m = Matching::default();
    for (i, &r) in match_l.iter().take(pa.len()).enumerate() {
        if (r as usize) < nb {
            m.matched.push((i, r as usize));
        } else {
            m.unmatched_a.push(i);
        }
    }
    let mut taken = vec![false; nb];
    for &(_, j) in &m.matched {
        taken[j] = true;
    }
    m.unmatched_b = (0..nb).filter(|&j| !taken[j]).collect();
    Ok((delta, m))
}

/// Labeled symmetric matrix of bottleneck distances; `+inf` entries are allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagramDistanceMatrix {
    pub labels: Vec<String>,
    pub values: Vec<f64>,
}

impl DiagramDistanceMatrix {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.len() + j]
    }

    pub fn new(labels: Vec<String>, values: Vec<f64>) -> Result<Self> {
        let n = labels.len();
        if values.len() != n * n {
            return Err(Error::InvalidArgument(format!(
                "{n} labels need {} matrix entries, got {}",
                n * n,
                values.len()
            )));
        }
        for i in 0..n {
            if values[i * n + i] != 0.0 {
                return Err(Error::InvalidArgument(format!("nonzero diagonal at '{}'", labels[i])));
            }
            for j in 0..i {
                let v = values[i * n + j];
                if v.is_nan() || v < 0.0 || v != values[j * n + i] {
                    return Err(Error::InvalidArgument(format!(
                        "entries ({}, {}) are not a symmetric nonnegative pair",
                        labels[i], labels[j]
                    )));
                }
            }
        }
        Ok(Self { labels, values })
    }

    /// First row and column hold labels; infinite entries are written `inf`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("label");
        for l in &self.labels {
            out.push(',');
            out.push_str(&csv_field(l));
        }
        out.push('\n');
        let n = self.len();
        for (i, l) in self.labels.iter().enumerate() {
            out.push_str(&csv_field(l));
            for j in 0..n {
                write!(out, ",{}", self.get(i, j)).unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str, path: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .from_reader(text.as_bytes());
        let mut records = rdr.records();
        let header = records
            .next()
            .ok_or_else(|| Error::parse(path, 1, "empty distance matrix"))??;
        let labels: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let n = labels.len();
        let mut values = Vec::with_capacity(n * n);
        for (i, rec) in records.enumerate() {
            let rec = rec?;
            let lineno = i + 2;
            if rec.len() != n + 1 {
                return Err(Error::parse(path, lineno, format!("expected {} fields, got {}", n + 1, rec.len())));
            }
            if i >= n || rec[0] != labels[i] {
                return Err(Error::parse(path, lineno, "row label does not match the header order"));
            }
            for f in rec.iter().skip(1) {
                values.push(
                    f.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::parse(path, lineno, format!("bad distance '{f}'")))?,
                );
            }
        }
        if values.len() != n * n {
            return Err(Error::parse(path, n + 1, "matrix is not square"));
        }
        Self::new(labels, values)
    }
}

pub fn load_distance_matrix(path: &Path) -> Result<DiagramDistanceMatrix> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    DiagramDistanceMatrix::from_csv(&text, path)
}

/// All pairwise bottleneck distances; the upper triangle is computed in parallel.
pub fn pairwise_distances(
    diagrams: &[(String, PersistenceDiagram)],
    dim: usize,
) -> Result<DiagramDistanceMatrix> {
    let n = diagrams.len();
    if n < 2 {
        return Err(Error::InvalidArgument(
            "pairwise distances need at least two diagrams".into(),
        ));
    }
    for (_, d) in &diagrams[1..] {
        check_scales(&diagrams[0].1, d)?;
    }
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let dists: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| bottleneck_distance(&diagrams[i].1, &diagrams[j].1, dim))
        .collect::<Result<_>>()?;
    let mut values = vec![0.0; n * n];
    for (&(i, j), d) in pairs.iter().zip(dists) {
        values[i * n + j] = d;
        values[j * n + i] = d;
    }
    Ok(DiagramDistanceMatrix {
        labels: diagrams.iter().map(|(l, _)| l.clone()).collect(),
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::persistence::PersistencePair;
    use crate::rips::Scale;

    fn dgm(points: &[(f64, f64)]) -> PersistenceDiagram {
        PersistenceDiagram::from_pairs(
            points.iter().map(|&(b, d)| PersistencePair::new(1, b, d)).collect(),
            Scale::Diameter,
            1,
            false,
        )
    }

    #[test]
    fn cost_examples() {
        let empty = dgm(&[]);
        assert_eq!(matching_cost(&empty, &empty, &Matching::default(), 1).unwrap(), 0.0);
        let a = dgm(&[(0.0, 4.0)]);
        let b = dgm(&[(0.0, 1.0)]);
        let to_diag = Matching {
            unmatched_a: vec![0],
            ..Default::default()
        };
        assert_eq!(matching_cost(&a, &empty, &to_diag, 1).unwrap(), 2.0);
        let paired = Matching {
            matched: vec![(0, 0)],
            ..Default::default()
        };
        assert_eq!(matching_cost(&a, &b, &paired, 1).unwrap(), 3.0);
    }

    #[test]
    fn invalid_matchings() {
        let a = dgm(&[(0.0, 4.0), (1.0, 2.0)]);
        let b = dgm(&[(0.0, 1.0)]);
        let reused = Matching {
            matched: vec![(0, 0), (1, 0)],
            ..Default::default()
        };
        assert!(matches!(matching_cost(&a, &b, &reused, 1), Err(Error::InvalidMatching(_))));
        let partial = Matching {
            matched: vec![(0, 0)],
            ..Default::default()
        };
        assert!(matching_cost(&a, &b, &partial, 1).is_err());
    }

    #[test]
    fn distance_examples() {
        let a = dgm(&[(0.0, 4.0)]);
        let b = dgm(&[(0.0, 1.0)]);
        assert_eq!(bottleneck_distance(&a, &b, 1).unwrap(), 2.0);
        assert_eq!(bottleneck_distance(&a, &dgm(&[]), 1).unwrap(), 2.0);
        assert_eq!(bottleneck_distance(&a, &a, 1).unwrap(), 0.0);
    }

    #[test]
    fn essential_features() {
        let one = dgm(&[(0.5, f64::INFINITY), (0.0, 1.0)]);
        let shifted = dgm(&[(0.75, f64::INFINITY), (0.0, 1.0)]);
        let none = dgm(&[(0.0, 1.0)]);
        assert_eq!(bottleneck_distance(&one, &shifted, 1).unwrap(), 0.25);
        assert_eq!(bottleneck_distance(&one, &none, 1).unwrap(), f64::INFINITY);
    }

    #[test]
    fn scale_mismatch() {
        let a = dgm(&[(0.0, 1.0)]);
        let mut b = a.clone();
        b.scale = Scale::Radius;
        assert!(matches!(bottleneck_distance(&a, &b, 1), Err(Error::ScaleMismatch { .. })));
    }

    #[test]
    fn optimal_matching_achieves_distance() {
        let a = dgm(&[(0.0, 4.0), (1.0, 3.0), (2.0, 2.5)]);
        let b = dgm(&[(0.5, 3.5), (1.0, 1.2)]);
        let (d, m) = bottleneck_matching(&a, &b, 1).unwrap();
        assert_eq!(d, bottleneck_distance(&a, &b, 1).unwrap());
        assert_eq!(matching_cost(&a, &b, &m, 1).unwrap(), d);
    }

    #[test]
    fn pairwise_matrix() {
        let a = dgm(&[(0.0, 4.0)]);
        let m = pairwise_distances(&[("x".into(), a.clone()), ("y".into(), a)], 1).unwrap();
        assert_eq!(m.values, vec![0.0; 4]);
        let inf = pairwise_distances(
            &[
                ("x".into(), dgm(&[(0.0, f64::INFINITY)])),
                ("y".into(), dgm(&[])),
            ],
            1,
        )
        .unwrap();
        assert_eq!(inf.get(0, 1), f64::INFINITY);
        let text = inf.to_csv();
        assert_eq!(text, "label,x,y\nx,0,inf\ny,inf,0\n");
        assert_eq!(DiagramDistanceMatrix::from_csv(&text, Path::new("m")).unwrap(), inf);
    }
}
