//! Planar embeddings of diagram distance matrices.

use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::bottleneck::DiagramDistanceMatrix;
use crate::diagram::csv_field;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Embedding2D {
    pub coords: Vec<[f64; 2]>,
    pub labels: Vec<String>,
    /// `Σ (d_ij - ‖c_i - c_j‖)² / Σ d_ij²` over `i < j`; 0 for an all-zero input.
    pub stress: f64,
}

impl Embedding2D {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("label,x,y\n");
        for (l, c) in self.labels.iter().zip(&self.coords) {
            writeln!(out, "{},{},{}", csv_field(l), c[0], c[1]).unwrap();
        }
        out
    }
}

pub trait Embedder: Send + Sync {
    fn name(&self) -> &'static str;
    fn embed(&self, dm: &DiagramDistanceMatrix) -> Result<Embedding2D>;
}

pub struct EmbedderRegistry {
    embedders: Vec<Arc<dyn Embedder>>,
}

impl Default for EmbedderRegistry {
    fn default() -> Self {
        Self {
            embedders: vec![Arc::new(ClassicalMds)],
        }
    }
}

impl EmbedderRegistry {
    pub fn register(&mut self, e: Arc<dyn Embedder>) {
        self.embedders.retain(|x| x.name() != e.name());
        self.embedders.push(e);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn Embedder>> {
        self.embedders
            .iter()
            .find(|e| e.name() == name)
            .cloned()
            .ok_or_else(|| Error::UnknownStrategy {
                kind: "embedder",
                name: name.into(),
                available: self.names().join(", "),
            })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.embedders.iter().map(|e| e.name()).collect()
    }
}

pub const DEFAULT_EMBEDDER: &str = "cmds";

/// Classical (Torgerson) multidimensional scaling.
pub struct ClassicalMds;

impl Embedder for ClassicalMds {
    fn name(&self) -> &'static str {
        "cmds"
    }

    fn embed(&self, dm: &DiagramDistanceMatrix) -> Result<Embedding2D> {
        classical_mds(dm)
    }
}

fn stress(dm: &DiagramDistanceMatrix, coords: &[[f64; 2]]) -> f64 {
    let n = dm.len();
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..n {
        for j in i + 1..n {
            let d = dm.get(i, j);
            let e = ((coords[i][0] - coords[j][0]).powi(2) + (coords[i][1] - coords[j][1]).powi(2)).sqrt();
            num += (d - e) * (d - e);
            den += d * d;
        }
    }
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// Double-centers `-½ D²`, keeps the two largest eigenpairs (negative
/// eigenvalues clamped to zero) and scales eigenvectors by `√λ`. Each axis is
/// oriented so its first clearly nonzero coordinate is positive.
pub fn classical_mds(dm: &DiagramDistanceMatrix) -> Result<Embedding2D> {
    let n = dm.len();
    if n < 3 {
        return Err(Error::InvalidArgument(format!(
            "embedding needs at least 3 diagrams, got {n}"
        )));
    }
    for i in 0..n {
        for j in i + 1..n {
            if !dm.get(i, j).is_finite() {
                return Err(Error::InfiniteDistance(dm.labels[i].clone(), dm.labels[j].clone()));
            }
        }
    }
    let sq = DMatrix::from_fn(n, n, |i, j| dm.get(i, j) * dm.get(i, j));
    let row_means: Vec<f64> = (0..n).map(|i| sq.row(i).sum() / n as f64).collect();
    let grand = row_means.iter().sum::<f64>() / n as f64;
    let b = DMatrix::from_fn(n, n, |i, j| -0.5 * (sq[(i, j)] - row_means[i] - row_means[j] + grand));

    let eig = SymmetricEigen::new(b);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));

    let scale_tol = 1e-12 * eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let mut coords = vec![[0.0; 2]; n];
    for (axis, &k) in order.iter().take(2).enumerate() {
        let lambda = eig.eigenvalues[k].max(0.0);
        if lambda <= scale_tol {
            continue;
        }
        let v = eig.eigenvectors.column(k);
        let sign = v
            .iter()
            .find(|x| x.abs() > 1e-9)
            .map_or(1.0, |x| x.signum());
        let s = lambda.sqrt() * sign;
        for (i, c) in coords.iter_mut().enumerate() {
            c[axis] = v[i] * s;
        }
    }
    Ok(Embedding2D {
        stress: stress(dm, &coords),
        coords,
        labels: dm.labels.clone(),
    })
}
