//! Point clouds of activation vectors and their Euclidean distance matrices.
//!
//! A cloud is an `n × d` row-major matrix: one row per network input, one
//! column per activation unit. Two on-disk formats are supported:
//!
//! * CSV: one point per line, comma-separated decimals, optional header line.
//! * tdac-binary: `b"TDAC"`, `u32` version (= 1), `u64` n, `u64` d, then
//!   `n·d` little-endian `f64` values in row-major order.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

pub const TDAC_MAGIC: &[u8; 4] = b"TDAC";
pub const TDAC_VERSION: u32 = 1;
const TDAC_HEADER_LEN: usize = 4 + 4 + 8 + 8;

/// Rows whose standard deviation is at or below this are rejected by [`normalize_cloud`].
pub const MIN_ROW_STD: f64 = 1e-12;

/// Free-form description of where a cloud (or a diagram derived from it) came from.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SourceMeta {
    pub model: String,
    pub layer: String,
    pub class: String,
}

impl SourceMeta {
    pub fn new(model: impl Into<String>, layer: impl Into<String>, class: impl Into<String>) -> Self {
        Self {
            model: model.into(),
            layer: layer.into(),
            class: class.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<f64>,
    n: usize,
    d: usize,
    labels: Option<Vec<String>>,
    meta: Option<SourceMeta>,
}

impl PointCloud {
    /// Builds a cloud from row-major coordinates, rejecting empty shapes and
    /// non-finite values.
    pub fn new(points: Vec<f64>, n: usize, d: usize) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::InvalidArgument(format!(
                "a point cloud needs n >= 1 and d >= 1 (got n = {n}, d = {d})"
            )));
        }
        if points.len() != n * d {
            return Err(Error::InvalidArgument(format!(
                "expected {} coordinates for a {n}x{d} cloud, got {}",
                n * d,
                points.len()
            )));
        }
        if let Some(pos) = points.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / d,
                col: pos % d,
            });
        }
        Ok(Self {
            points,
            n,
            d,
            labels: None,
            meta: None,
        })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, |r| r.as_ref().len());
        let mut points = Vec::with_capacity(n * d);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != d {
                return Err(Error::InvalidArgument(format!(
                    "row {i} has {} coordinates, expected {d}",
                    row.len()
                )));
            }
            points.extend_from_slice(row);
        }
        Self::new(points, n, d)
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n {
            return Err(Error::InvalidArgument(format!(
                "{} labels for {} points",
                labels.len(),
                self.n
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn with_meta(mut self, meta: SourceMeta) -> Self {
        self.meta = Some(meta);
        self
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.points[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks_exact(self.d)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.points
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn meta(&self) -> Option<&SourceMeta> {
        self.meta.as_ref()
    }

    /// Restricts the cloud to `indices` (in the given order), carrying labels and meta.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidArgument("cannot select zero points".into()));
        }
        let mut points = Vec::with_capacity(indices.len() * self.d);
        for &i in indices {
            if i >= self.n {
                return Err(Error::InvalidArgument(format!(
                    "row index {i} out of range for {} points",
                    self.n
                )));
            }
            points.extend_from_slice(self.row(i));
        }
        Ok(Self {
            points,
            n: indices.len(),
            d: self.d,
            labels: self
                .labels
                .as_ref()
                .map(|l| indices.iter().map(|&i| l[i].clone()).collect()),
            meta: self.meta.clone(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudFormat {
    Csv,
    TdacBinary,
}

impl CloudFormat {
    /// Guesses the format from the file extension, falling back to sniffing the magic bytes.
    pub fn detect(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => Ok(CloudFormat::Csv),
            Some(ext) if ext.eq_ignore_ascii_case("tdac") || ext.eq_ignore_ascii_case("bin") => {
                Ok(CloudFormat::TdacBinary)
            }
            _ => {
                let mut head = [0u8; 4];
                let mut f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
                let got = std::io::Read::read(&mut f, &mut head).map_err(|e| Error::io(path, e))?;
                if got == 4 && &head == TDAC_MAGIC {
                    Ok(CloudFormat::TdacBinary)
                } else {
                    Ok(CloudFormat::Csv)
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct CsvOptions {
    /// Skip the first line.
    pub header: bool,
}

pub fn load_cloud(path: &Path, format: CloudFormat, opts: CsvOptions) -> Result<PointCloud> {
    match format {
        CloudFormat::Csv => load_csv(path, opts),
        CloudFormat::TdacBinary => load_tdac(path),
    }
}

pub fn save_cloud(cloud: &PointCloud, path: &Path, format: CloudFormat) -> Result<()> {
    let bytes = match format {
        CloudFormat::Csv => {
            let mut out = String::new();
            for row in cloud.rows() {
                let line: Vec<String> = row.iter().map(|x| x.to_string()).collect();
                out.push_str(&line.join(","));
                out.push('\n');
            }
            out.into_bytes()
        }
        CloudFormat::TdacBinary => encode_tdac(cloud),
    };
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))
}

fn load_csv(path: &Path, opts: CsvOptions) -> Result<PointCloud> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut points = Vec::new();
    let mut width: Option<usize> = None;
    let mut n = 0usize;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if i == 0 && opts.header {
            continue;
        }
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut count = 0;
        for (col, field) in line.split(',').enumerate() {
            let field = field.trim();
            let v: f64 = field.parse().map_err(|_| {
                Error::parse(path, lineno, format!("column {}: '{field}' is not a number", col + 1))
            })?;
            if !v.is_finite() {
                return Err(Error::parse(
                    path,
                    lineno,
                    format!("non-finite value in column {}", col + 1),
                ));
            }
            points.push(v);
            count += 1;
        }
        match width {
            None => width = Some(count),
            Some(w) if w != count => {
                return Err(Error::parse(
                    path,
                    lineno,
                    format!("ragged row: {count} columns, expected {w}"),
                ))
            }
            _ => {}
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::parse(path, 1, "no data rows"));
    }
    PointCloud::new(points, n, width.unwrap_or(0))
}

pub fn encode_tdac(cloud: &PointCloud) -> Vec<u8> {
    let mut out = Vec::with_capacity(TDAC_HEADER_LEN + cloud.points.len() * 8);
    out.extend_from_slice(TDAC_MAGIC);
    out.extend_from_slice(&TDAC_VERSION.to_le_bytes());
    out.extend_from_slice(&(cloud.n as u64).to_le_bytes());
    out.extend_from_slice(&(cloud.d as u64).to_le_bytes());
    for x in &cloud.points {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

pub fn decode_tdac(bytes: &[u8], path: &Path) -> Result<PointCloud> {
    if bytes.len() < TDAC_HEADER_LEN {
        return Err(Error::parse(path, 0, "truncated tdac header"));
    }
    if &bytes[0..4] != TDAC_MAGIC {
        return Err(Error::parse(path, 0, "bad magic bytes, expected TDAC"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != TDAC_VERSION {
        return Err(Error::parse(path, 0, format!("unsupported tdac version {version}")));
    }
    let n = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let d = u64::from_le_bytes(bytes[16..24].try_into().unwrap());
    let expected = n
        .checked_mul(d)
        .and_then(|c| c.checked_mul(8))
        .and_then(|c| usize::try_from(c).ok())
        .ok_or_else(|| Error::parse(path, 0, "tdac shape overflows"))?;
    let payload = &bytes[TDAC_HEADER_LEN..];
    if payload.len() != expected {
        return Err(Error::parse(
            path,
            0,
            format!(
                "payload has {} bytes, header declares {n}x{d} values ({expected} bytes)",
                payload.len()
            ),
        ));
    }
    let points = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    PointCloud::new(points, n as usize, d as usize)
}

fn load_tdac(path: &Path) -> Result<PointCloud> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_tdac(&bytes, path)
}

/// Z-scores every row independently using the population standard deviation.
pub fn normalize_cloud(cloud: &PointCloud) -> Result<PointCloud> {
    let d = cloud.d as f64;
    let mut points = Vec::with_capacity(cloud.points.len());
    for (i, row) in cloud.rows().enumerate() {
        let mean = row.iter().sum::<f64>() / d;
        let var = row.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / d;
        let std = var.sqrt();
        if std <= MIN_ROW_STD {
            return Err(Error::ConstantRow { row: i });
        }
        points.extend(row.iter().map(|x| (x - mean) / std));
    }
    Ok(PointCloud {
        points,
        ..cloud.clone()
    })
}

/// Symmetric matrix of pairwise distances with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    values: Vec<f64>,
}

impl DistanceMatrix {
    /// Validates symmetry, the zero diagonal and finiteness.
    pub fn from_full(n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::InvalidArgument(format!(
                "distance matrix needs {} entries, got {}",
                n * n,
                values.len()
            )));
        }
        for i in 0..n {
            if values[i * n + i] != 0.0 {
                return Err(Error::InvalidArgument(format!("nonzero diagonal at {i}")));
            }
            for j in i + 1..n {
                let v = values[i * n + j];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "entry ({i}, {j}) = {v} is not a finite nonnegative distance"
                    )));
                }
                if v != values[j * n + i] {
                    return Err(Error::InvalidArgument(format!(
                        "asymmetric entries at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self { n, values })
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    /// `min_i max_j d(i, j)`: beyond this scale the Rips complex is a cone.
    pub fn enclosing_radius(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row(i).iter().copied().fold(0.0, f64::max))
            .fold(f64::INFINITY, f64::min)
    }
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Pairwise Euclidean distances. Rows are computed in parallel; each entry is
/// computed once for `i < j` and mirrored, so the result does not depend on the
/// worker count.
pub fn distance_matrix(cloud: &PointCloud) -> DistanceMatrix {
    let n = cloud.n;
    let mut values = vec![0.0; n * n];
    values.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        for (j, out) in row.iter_mut().enumerate() {
            if i != j {
                // always evaluate as (min, max) so the mirror entry is bit-identical
                let (a, b) = if i < j { (i, j) } else { (j, i) };
                *out = euclidean(cloud.row(a), cloud.row(b));
            }
        }
    });
    DistanceMatrix { n, values }
}

/// Row indices of a uniform sample of `k` rows without replacement, sorted
/// ascending. `k == n` yields `0..n`.
pub fn subsample_indices(n: usize, k: usize, seed: u64) -> Result<Vec<usize>> {
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "subsample size {k} must lie in 1..={n}"
        )));
    }
    if k == n {
        return Ok((0..n).collect());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = index::sample(&mut rng, n, k).into_vec();
    picked.sort_unstable();
    Ok(picked)
}

pub fn subsample(cloud: &PointCloud, k: usize, seed: u64) -> Result<PointCloud> {
    let idx = subsample_indices(cloud.n, k, seed)?;
    cloud.select(&idx)
}
