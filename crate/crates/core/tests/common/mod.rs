//! Brute-force reference implementations used as test oracles. Nothing here
//! calls into the library; inputs are plain coordinate lists.

#![allow(dead_code)]

use std::collections::HashMap;

use rand::Rng;

pub type Points = Vec<Vec<f64>>;

pub fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn dist_matrix(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    points
        .iter()
        .map(|p| points.iter().map(|q| euclid(p, q)).collect())
        .collect()
}

pub fn enclosing_radius(d: &[Vec<f64>]) -> f64 {
    d.iter()
        .map(|row| row.iter().copied().fold(0.0, f64::max))
        .fold(f64::INFINITY, f64::min)
}

pub fn random_cloud(rng: &mut impl Rng, n: usize, dim: usize) -> Points {
    (0..n)
        .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect()
}

pub fn polygon(n: usize) -> Points {
    (0..n)
        .map(|i| {
            let t = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
            vec![t.cos(), t.sin()]
        })
        .collect()
}

/// Fibonacci lattice on the unit sphere.
pub fn fibonacci_sphere(n: usize) -> Points {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let y = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - y * y).sqrt();
            let t = golden * i as f64;
            vec![r * t.cos(), y, r * t.sin()]
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct Simplex {
    pub verts: Vec<usize>,
    pub value: f64,
}

impl Simplex {
    pub fn dim(&self) -> usize {
        self.verts.len() - 1
    }
}

fn combinations(n: usize, k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if cur.len() == k {
        out.push(cur.clone());
        return;
    }
    for v in start..n {
        if n - v < k - cur.len() {
            break;
        }
        cur.push(v);
        combinations(n, k, v + 1, cur, out);
        cur.pop();
    }
}

/// Every vertex subset of size 1..=top_dim+1 whose largest pairwise distance
/// (times `factor`) is at most `threshold`, sorted by value, dimension, then
/// vertex list.
pub fn rips_complex(d: &[Vec<f64>], top_dim: usize, factor: f64, threshold: f64) -> Vec<Simplex> {
    let n = d.len();
    let mut out = Vec::new();
    for k in 1..=top_dim + 1 {
        let mut subsets = Vec::new();
        combinations(n, k, 0, &mut Vec::new(), &mut subsets);
        for verts in subsets {
            let mut diam: f64 = 0.0;
            for a in 0..verts.len() {
                for b in a + 1..verts.len() {
                    diam = diam.max(d[verts[a]][verts[b]]);
                }
            }
            let value = diam * factor;
            if value <= threshold {
                out.push(Simplex { verts, value });
            }
        }
    }
    out.sort_by(|a, b| {
        a.value
            .total_cmp(&b.value)
            .then(a.verts.len().cmp(&b.verts.len()))
            .then(a.verts.cmp(&b.verts))
    });
    out
}

fn boundary(simplices: &[Simplex]) -> Vec<Vec<usize>> {
    let index: HashMap<&[usize], usize> = simplices
        .iter()
        .enumerate()
        .map(|(i, s)| (s.verts.as_slice(), i))
        .collect();
    simplices
        .iter()
        .map(|s| {
            if s.verts.len() == 1 {
                return Vec::new();
            }
            let mut col: Vec<usize> = (0..s.verts.len())
                .map(|skip| {
                    let face: Vec<usize> = s
                        .verts
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| *i != skip)
                        .map(|(_, v)| *v)
                        .collect();
                    index[face.as_slice()]
                })
                .collect();
            col.sort_unstable();
            col
        })
        .collect()
}

fn xor_sorted(a: &[usize], b: &[usize]) -> Vec<usize> {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::with_capacity(a.len() + b.len());
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// Textbook left-to-right column reduction over Z/2 with no shortcuts.
/// Returns `(dim, birth, death)` for dimensions `<= max_dim`, zero-length
/// pairs included; essential classes have `death = inf`.
pub fn naive_persistence(simplices: &[Simplex], max_dim: usize) -> Vec<(usize, f64, f64)> {
    let mut cols = boundary(simplices);
    let mut low_owner: HashMap<usize, usize> = HashMap::new();
    for j in 0..cols.len() {
        while let Some(&low) = cols[j].last() {
            match low_owner.get(&low) {
                Some(&k) => {
                    let other = cols[k].clone();
                    cols[j] = xor_sorted(&cols[j], &other);
                }
                None => {
                    low_owner.insert(low, j);
                    break;
                }
            }
        }
    }
    let mut pairs = Vec::new();
    let mut killed = vec![false; simplices.len()];
    for (&low, &j) in &low_owner {
        killed[low] = true;
        let s = &simplices[low];
        if s.dim() <= max_dim {
            pairs.push((s.dim(), s.value, simplices[j].value));
        }
    }
    for (j, s) in simplices.iter().enumerate() {
        if cols[j].is_empty() && !killed[j] && s.dim() <= max_dim {
            pairs.push((s.dim(), s.value, f64::INFINITY));
        }
    }
    sort_pairs(&mut pairs);
    pairs
}

pub fn sort_pairs(pairs: &mut [(usize, f64, f64)]) {
    pairs.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.total_cmp(&b.2)));
}

/// Rank over Z/2 by Gaussian elimination on bit rows.
pub fn rank_z2(mut rows: Vec<Vec<u64>>) -> usize {
    let mut rank = 0;
    let width = rows.first().map_or(0, |r| r.len() * 64);
    for bit in 0..width {
        let (w, m) = (bit / 64, 1u64 << (bit % 64));
        let Some(p) = (rank..rows.len()).find(|&r| rows[r][w] & m != 0) else {
            continue;
        };
        rows.swap(rank, p);
        let pivot = rows[rank].clone();
        for r in 0..rows.len() {
            if r != rank && rows[r][w] & m != 0 {
                for (x, y) in rows[r].iter_mut().zip(&pivot) {
                    *x ^= y;
                }
            }
        }
        rank += 1;
    }
    rank
}

/// Betti numbers of the Rips complex at `eps` from boundary ranks:
/// `b_k = n_k - rank d_k - rank d_{k+1}`.
pub fn betti_by_rank(d: &[Vec<f64>], max_dim: usize, factor: f64, eps: f64) -> Vec<usize> {
    let simplices = rips_complex(d, max_dim + 1, factor, eps);
    let by_dim: Vec<Vec<&Simplex>> = (0..=max_dim + 1)
        .map(|k| simplices.iter().filter(|s| s.dim() == k).collect())
        .collect();
    let index: Vec<HashMap<&[usize], usize>> = by_dim
        .iter()
        .map(|ss| ss.iter().enumerate().map(|(i, s)| (s.verts.as_slice(), i)).collect())
        .collect();
    // rank of the boundary map from k-chains to (k-1)-chains
    let rank = |k: usize| -> usize {
        if k == 0 || by_dim[k].is_empty() || by_dim[k - 1].is_empty() {
            return 0;
        }
        let words = by_dim[k - 1].len().div_ceil(64);
        let rows = by_dim[k]
            .iter()
            .map(|s| {
                let mut row = vec![0u64; words];
                for skip in 0..s.verts.len() {
                    let face: Vec<usize> = s
                        .verts
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| *i != skip)
                        .map(|(_, v)| *v)
                        .collect();
                    let f = index[k - 1][face.as_slice()];
                    row[f / 64] ^= 1 << (f % 64);
                }
                row
            })
            .collect();
        rank_z2(rows)
    };
    (0..=max_dim).map(|k| by_dim[k].len() - rank(k) - rank(k + 1)).collect()
}

pub fn linf(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).abs().max((a.1 - b.1).abs())
}

pub fn to_diagonal(p: (f64, f64)) -> f64 {
    (p.1 - p.0) / 2.0
}

fn enumerate_matchings(a: &[(f64, f64)], b: &[(f64, f64)], i: usize, used: &mut Vec<bool>, cur: f64, best: &mut f64) {
    if cur >= *best {
        return;
    }
    if i == a.len() {
        let rest = b
            .iter()
            .zip(used.iter())
            .filter(|(_, u)| !**u)
            .map(|(p, _)| to_diagonal(*p))
            .fold(cur, f64::max);
        *best = best.min(rest);
        return;
    }
    enumerate_matchings(a, b, i + 1, used, cur.max(to_diagonal(a[i])), best);
    for j in 0..b.len() {
        if !used[j] {
            used[j] = true;
            enumerate_matchings(a, b, i + 1, used, cur.max(linf(a[i], b[j])), best);
            used[j] = false;
        }
    }
}

/// Minimum over every partial matching of finite points (unmatched points go
/// to the diagonal) of the largest cost, found by exhaustive enumeration.
pub fn exhaustive_bottleneck(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let mut best = f64::INFINITY;
    enumerate_matchings(a, b, 0, &mut vec![false; b.len()], 0.0, &mut best);
    best
}

fn permutations_min(a: &[f64], b: &[f64], i: usize, used: &mut Vec<bool>, cur: f64, best: &mut f64) {
    if i == a.len() {
        *best = best.min(cur);
        return;
    }
    for j in 0..b.len() {
        if !used[j] {
            used[j] = true;
            permutations_min(a, b, i + 1, used, cur.max((a[i] - b[j]).abs()), best);
            used[j] = false;
        }
    }
}

/// Essential classes can only match each other, so unequal counts are infinitely far apart.
pub fn exhaustive_essential(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let mut best = f64::INFINITY;
    if a.is_empty() {
        return 0.0;
    }
    permutations_min(a, b, 0, &mut vec![false; b.len()], 0.0, &mut best);
    best
}

/// Local outlier factor straight from the definition, one point at a time.
pub fn lof(points: &[Vec<f64>], k: usize) -> Vec<f64> {
    let n = points.len();
    let d = dist_matrix(points);
    let k_distance: Vec<f64> = (0..n)
        .map(|p| {
            let mut others: Vec<f64> = (0..n).filter(|&o| o != p).map(|o| d[p][o]).collect();
            others.sort_by(f64::total_cmp);
            others[k - 1]
        })
        .collect();
    let hood = |p: usize| -> Vec<usize> { (0..n).filter(|&o| o != p && d[p][o] <= k_distance[p]).collect() };
    let lrd: Vec<f64> = (0..n)
        .map(|p| {
            let h = hood(p);
            let reach: f64 = h.iter().map(|&o| k_distance[o].max(d[p][o])).sum();
            h.len() as f64 / reach
        })
        .collect();
    (0..n)
        .map(|p| {
            let h = hood(p);
            h.iter().map(|&o| lrd[o]).sum::<f64>() / h.len() as f64 / lrd[p]
        })
        .collect()
}
