//! Experiment protocols over point clouds and manifests of clouds.
//!
//! Every protocol is a pure pipeline per work item (normalize, optional LOF,
//! Rips persistence) with results assembled in key order, so output bytes do
//! not depend on the worker count.
//!
//! The protocols are also registered by name behind [`Experiment`], which is
//! how the command line selects them.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use log::warn;
use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bottleneck::{bottleneck_distance, pairwise_distances, DiagramDistanceMatrix};
use crate::diagram::{csv_field, PersistenceDiagram};
use crate::embed::{ClassicalMds, Embedder, Embedding2D};
use crate::error::{Error, Result};
use crate::outlier::{filter_outliers, DEFAULT_K, DEFAULT_THRESHOLD};
use crate::persistence::{ReductionEngine, StreamingReduction};
use crate::pointcloud::{
    distance_matrix, load_cloud, normalize_cloud, subsample, CloudFormat, CsvOptions, PointCloud,
    SourceMeta,
};
use crate::rips::{build_filtration, FiltrationConfig};

pub const MANIFEST_HEADER: [&str; 4] = ["model", "layer", "class", "path"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LofConfig {
    pub k: usize,
    pub threshold: f64,
}

impl Default for LofConfig {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

/// How one cloud becomes one diagram.
#[derive(Clone)]
pub struct PipelineConfig {
    pub normalize: bool,
    pub lof: Option<LofConfig>,
    pub filtration: FiltrationConfig,
    pub keep_zero_lifetime: bool,
    pub engine: Arc<dyn ReductionEngine>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            normalize: true,
            lof: None,
            filtration: FiltrationConfig::default(),
            keep_zero_lifetime: false,
            engine: Arc::new(StreamingReduction),
        }
    }
}

impl std::fmt::Debug for PipelineConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PipelineConfig")
            .field("normalize", &self.normalize)
            .field("lof", &self.lof)
            .field("filtration", &self.filtration)
            .field("keep_zero_lifetime", &self.keep_zero_lifetime)
            .field("engine", &self.engine.name())
            .finish()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CloudDiagram {
    pub diagram: PersistenceDiagram,
    /// Points removed by LOF.
    pub removed: usize,
    /// Points that entered the filtration.
    pub kept: usize,
}

pub fn cloud_diagram(cloud: &PointCloud, cfg: &PipelineConfig) -> Result<CloudDiagram> {
    let normalized;
    let mut cloud = cloud;
    if cfg.normalize {
        normalized = normalize_cloud(cloud)?;
        cloud = &normalized;
    }
    let filtered;
    let mut removed = 0;
    if let Some(lof) = cfg.lof {
        let (kept, report) = filter_outliers(cloud, lof.k, lof.threshold)?;
        removed = report.flagged.len();
        filtered = kept;
        cloud = &filtered;
    }
    let dm = distance_matrix(cloud);
    let f = build_filtration(&dm, &cfg.filtration)?;
    let pairs = cfg.engine.compute(&f)?;
    let diagram = PersistenceDiagram::from_pairs(
        pairs,
        cfg.filtration.scale,
        cfg.filtration.max_dim,
        cfg.keep_zero_lifetime,
    )
    .with_meta(cloud.meta().cloned());
    Ok(CloudDiagram {
        diagram,
        removed,
        kept: cloud.len(),
    })
}

/// Clouds indexed by `(model, layer, class)`, read from a manifest CSV with
/// header `model,layer,class,path`. Relative paths resolve against the
/// manifest's directory.
#[derive(Debug, Clone)]
pub struct CloudSet {
    pub entries: Vec<(SourceMeta, PathBuf)>,
    pub csv_options: CsvOptions,
}

impl CloudSet {
    pub fn load(manifest: &Path) -> Result<Self> {
        let base = manifest.parent().unwrap_or(Path::new("."));
        let mut rdr = csv::Reader::from_path(manifest)?;
        let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
        if header != MANIFEST_HEADER {
            return Err(Error::parse(
                manifest,
                1,
                format!("manifest header must be {}", MANIFEST_HEADER.join(",")),
            ));
        }
        let mut entries = Vec::new();
        let mut seen = BTreeSet::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let lineno = i + 2;
            if rec.len() != 4 {
                return Err(Error::parse(manifest, lineno, "expected 4 fields"));
            }
            let meta = SourceMeta::new(rec[0].trim(), rec[1].trim(), rec[2].trim());
            if !seen.insert(meta.clone()) {
                return Err(Error::parse(
                    manifest,
                    lineno,
                    format!("duplicate key ({}, {}, {})", meta.model, meta.layer, meta.class),
                ));
            }
            let path = base.join(rec[3].trim());
            if !path.is_file() {
                return Err(Error::parse(
                    manifest,
                    lineno,
                    format!("cloud file {} does not exist", path.display()),
                ));
            }
            entries.push((meta, path));
        }
        Ok(Self {
            entries,
            csv_options: CsvOptions::default(),
        })
    }

    pub fn from_entries(entries: Vec<(SourceMeta, PathBuf)>) -> Self {
        Self {
            entries,
            csv_options: CsvOptions::default(),
        }
    }

    pub fn load_cloud(&self, idx: usize) -> Result<PointCloud> {
        let (meta, path) = &self.entries[idx];
        let cloud = load_cloud(path, CloudFormat::detect(path)?, self.csv_options)?;
        Ok(cloud.with_meta(meta.clone()))
    }

    pub fn models(&self) -> Vec<String> {
        let s: BTreeSet<&String> = self.entries.iter().map(|(m, _)| &m.model).collect();
        s.into_iter().cloned().collect()
    }

    /// Diagrams for every entry, in manifest order.
    pub fn diagrams(&self, cfg: &PipelineConfig) -> Result<Vec<(SourceMeta, CloudDiagram)>> {
        (0..self.entries.len())
            .into_par_iter()
            .map(|i| {
                let cloud = self.load_cloud(i)?;
                Ok((self.entries[i].0.clone(), cloud_diagram(&cloud, cfg)?))
            })
            .collect()
    }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    match values.len() {
        0 => (f64::NAN, f64::NAN),
        1 => (values[0], 0.0),
        n => {
            let mean = values.iter().sum::<f64>() / n as f64;
            if !mean.is_finite() {
                return (mean, f64::NAN);
            }
            let ss: f64 = values.iter().map(|x| (x - mean) * (x - mean)).sum();
            (mean, (ss / (n - 1) as f64).sqrt())
        }
    }
}

/// Parses `start:stop:step` (inclusive stop) or a comma-separated list.
pub fn parse_sizes(list: &str) -> Result<Vec<usize>> {
    let bad = || Error::Usage(format!("invalid size list '{list}'"));
    let sizes: Vec<usize> = if list.contains(':') {
        let parts: Vec<usize> = list
            .split(':')
            .map(|p| p.trim().parse().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        let [start, stop, step] = parts[..] else {
            return Err(bad());
        };
        if step == 0 || start == 0 || start > stop {
            return Err(bad());
        }
        (start..=stop).step_by(step).collect()
    } else {
        list.split(',')
            .map(|p| p.trim().parse().map_err(|_| bad()))
            .collect::<Result<_>>()?
    };
    if sizes.is_empty() || sizes.contains(&0) {
        return Err(bad());
    }
    Ok(sizes)
}

// ---------------------------------------------------------------------------
// subsample study

#[derive(Debug, Clone, PartialEq)]
pub struct SubsampleRow {
    pub size: usize,
    pub kept: usize,
    pub removed: usize,
    /// `(finite feature count, bottleneck distance to baseline)` per requested dimension.
    pub per_dim: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubsampleTable {
    pub dims: Vec<usize>,
    pub baseline: CloudDiagram,
    pub rows: Vec<SubsampleRow>,
}

impl SubsampleTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("size,kept,removed");
        for d in &self.dims {
            write!(out, ",h{d}_count,h{d}_bottleneck").unwrap();
        }
        out.push('\n');
        for r in &self.rows {
            write!(out, "{},{},{}", r.size, r.kept, r.removed).unwrap();
            for (count, dist) in &r.per_dim {
                write!(out, ",{count},{dist}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

fn check_dims(dims: &[usize], max_dim: usize) -> Result<()> {
    if dims.is_empty() {
        return Err(Error::Usage("at least one homology dimension is required".into()));
    }
    if let Some(&d) = dims.iter().find(|&&d| d > max_dim) {
        return Err(Error::Usage(format!(
            "dimension {d} exceeds the filtration max_dim {max_dim}"
        )));
    }
    Ok(())
}

/// Persistence of growing uniform subsamples compared with the full cloud.
pub fn subsample_study(
    cloud: &PointCloud,
    sizes: &[usize],
    seed: u64,
    dims: &[usize],
    cfg: &PipelineConfig,
) -> Result<SubsampleTable> {
    check_dims(dims, cfg.filtration.max_dim)?;
    if sizes.is_empty() {
        return Err(Error::Usage("no subsample sizes given".into()));
    }
    if sizes.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Usage("subsample sizes must be sorted ascending".into()));
    }
    let n = cloud.len();
    if let Some(&s) = sizes.iter().find(|&&s| s > n || s == 0) {
        return Err(Error::InvalidArgument(format!(
            "subsample size {s} is outside 1..={n}"
        )));
    }
    let baseline = cloud_diagram(cloud, cfg)?;
    let rows = sizes
        .par_iter()
        .map(|&s| {
            let sub = subsample(cloud, s, seed)?;
            let res = cloud_diagram(&sub, cfg)?;
            let per_dim = dims
                .iter()
                .map(|&d| {
                    let count = res.diagram.finite(d).count();
                    let dist = bottleneck_distance(&res.diagram, &baseline.diagram, d)?;
                    Ok((count, dist))
                })
                .collect::<Result<_>>()?;
            Ok(SubsampleRow {
                size: s,
                kept: res.kept,
                removed: res.removed,
                per_dim,
            })
        })
        .collect::<Result<_>>()?;
    Ok(SubsampleTable {
        dims: dims.to_vec(),
        baseline,
        rows,
    })
}

// ---------------------------------------------------------------------------
// LOF comparison

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceSummary {
    pub mean: f64,
    pub std: f64,
    pub pairs: usize,
}

impl DistanceSummary {
    fn of(values: &[f64]) -> Self {
        let (mean, std) = mean_std(values);
        Self {
            mean,
            std,
            pairs: values.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LofComparisonRow {
    pub model: String,
    pub layer: String,
    pub dim: usize,
    pub lof: bool,
    pub all: DistanceSummary,
    pub class: DistanceSummary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LofComparison {
    pub rows: Vec<LofComparisonRow>,
}

impl LofComparison {
    pub const HEADER: &'static str =
        "model,layer,dim,lof,all_mean,all_std,all_pairs,class_mean,class_std,class_pairs";

    fn row_fields(r: &LofComparisonRow) -> String {
        format!(
            "{},{},{},{},{},{}",
            r.all.mean, r.all.std, r.all.pairs, r.class.mean, r.class.std, r.class.pairs
        )
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::HEADER);
        out.push('\n');
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{}",
                csv_field(&r.model),
                csv_field(&r.layer),
                r.dim,
                if r.lof { "on" } else { "off" },
                Self::row_fields(r)
            )
            .unwrap();
        }
        out
    }

    /// The half of the table with LOF switched `lof`, without the `lof` column.
    pub fn table(&self, lof: bool) -> String {
        let mut out =
            String::from("model,layer,dim,all_mean,all_std,all_pairs,class_mean,class_std,class_pairs\n");
        for r in self.rows.iter().filter(|r| r.lof == lof) {
            writeln!(
                out,
                "{},{},{},{}",
                csv_field(&r.model),
                csv_field(&r.layer),
                r.dim,
                Self::row_fields(r)
            )
            .unwrap();
        }
        out
    }
}

/// Two disjoint halves of a seed-shuffled index list, each in ascending row order.
pub fn split_halves(n: usize, seed: u64, stream: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng);
    let (a, b) = idx.split_at(n / 2);
    let (mut a, mut b) = (a.to_vec(), b.to_vec());
    a.sort_unstable();
    b.sort_unstable();
    (a, b)
}

/// Bottleneck distances between half-class diagrams, with and without LOF.
///
/// For every `(model, layer)` each class is split into two disjoint halves;
/// "all" pairs range over every pair of half diagrams (optionally capped at
/// `pair_budget` by seeded sampling), "class" pairs over the two halves of the
/// same class.
pub fn lof_comparison(
    set: &CloudSet,
    lof: LofConfig,
    dims: &[usize],
    pair_budget: Option<usize>,
    seed: u64,
    base: &PipelineConfig,
) -> Result<LofComparison> {
    check_dims(dims, base.filtration.max_dim)?;
    let mut groups: BTreeMap<(String, String), Vec<usize>> = BTreeMap::new();
    for (i, (m, _)) in set.entries.iter().enumerate() {
        groups.entry((m.model.clone(), m.layer.clone())).or_default().push(i);
    }
    let mut rows = Vec::new();
    for ((model, layer), mut members) in groups {
        members.sort_by(|&a, &b| set.entries[a].0.class.cmp(&set.entries[b].0.class));
        // (class, half, cloud)
        let mut halves: Vec<(String, PointCloud, PointCloud)> = Vec::new();
        for &i in &members {
            let cloud = set.load_cloud(i)?;
            let class = set.entries[i].0.class.clone();
            if cloud.len() < 4 {
                warn!(
                    "skipping class '{class}' at ({model}, {layer}): {} points, need at least 4",
                    cloud.len()
                );
                continue;
            }
            let (a, b) = split_halves(cloud.len(), seed, i as u64);
            halves.push((class, cloud.select(&a)?, cloud.select(&b)?));
        }
        if halves.len() < 2 {
            return Err(Error::Experiment(format!(
                "LOF comparison needs at least two usable classes at ({model}, {layer})"
            )));
        }
        let m = halves.len() * 2;
        let mut all_pairs: Vec<(usize, usize)> =
            (0..m).flat_map(|i| (i + 1..m).map(move |j| (i, j))).collect();
        if let Some(budget) = pair_budget.filter(|&b| b > 0 && b < all_pairs.len()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut keep = index::sample(&mut rng, all_pairs.len(), budget).into_vec();
            keep.sort_unstable();
            all_pairs = keep.into_iter().map(|k| all_pairs[k]).collect();
        }
        let class_pairs: Vec<(usize, usize)> = (0..halves.len()).map(|c| (2 * c, 2 * c + 1)).collect();

        for use_lof in [false, true] {
            let cfg = PipelineConfig {
                lof: use_lof.then_some(lof),
                ..base.clone()
            };
            let diagrams: Vec<PersistenceDiagram> = (0..m)
                .into_par_iter()
                .map(|k| {
                    let (_, a, b) = &halves[k / 2];
                    let cloud = if k % 2 == 0 { a } else { b };
                    Ok(cloud_diagram(cloud, &cfg)?.diagram)
                })
                .collect::<Result<_>>()?;
            for &dim in dims {
                let dist = |pairs: &[(usize, usize)]| -> Result<Vec<f64>> {
                    pairs
                        .par_iter()
                        .map(|&(i, j)| bottleneck_distance(&diagrams[i], &diagrams[j], dim))
                        .collect()
                };
                rows.push(LofComparisonRow {
                    model: model.clone(),
                    layer: layer.clone(),
                    dim,
                    lof: use_lof,
                    all: DistanceSummary::of(&dist(&all_pairs)?),
                    class: DistanceSummary::of(&dist(&class_pairs)?),
                });
            }
        }
    }
    Ok(LofComparison { rows })
}

// ---------------------------------------------------------------------------
// layer heatmap

#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub model: String,
    pub dim: usize,
    pub layers: Vec<String>,
    /// Row-major; entries below the diagonal are `NaN` (not computed).
    pub values: Vec<f64>,
}

impl Heatmap {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.layers.len() + j]
    }
}

pub fn heatmaps_to_csv(maps: &[Heatmap]) -> String {
    let mut out = String::new();
    let Some(first) = maps.first() else {
        return out;
    };
    out.push_str("model,dim,layer");
    for l in &first.layers {
        write!(out, ",{}", csv_field(l)).unwrap();
    }
    out.push('\n');
    for h in maps {
        let n = h.layers.len();
        for i in 0..n {
            write!(out, "{},{},{}", csv_field(&h.model), h.dim, csv_field(&h.layers[i])).unwrap();
            for j in 0..n {
                if j < i {
                    out.push(',');
                } else {
                    write!(out, ",{}", h.get(i, j)).unwrap();
                }
            }
            out.push('\n');
        }
    }
    out
}

/// Mean over classes of the bottleneck distance between the diagrams stored at
/// layer positions `i <= j` of `layer_order`, one matrix per model and dimension.
pub fn layer_heatmap(
    set: &CloudSet,
    layer_order: &[String],
    dims: &[usize],
    cfg: &PipelineConfig,
) -> Result<Vec<Heatmap>> {
    check_dims(dims, cfg.filtration.max_dim)?;
    if layer_order.is_empty() {
        return Err(Error::Usage("layer order is empty".into()));
    }
    let mut maps = Vec::new();
    for model in set.models() {
        let classes: BTreeSet<String> = set
            .entries
            .iter()
            .filter(|(m, _)| m.model == model && layer_order.contains(&m.layer))
            .map(|(m, _)| m.class.clone())
            .collect();
        let classes: Vec<String> = classes.into_iter().collect();
        let mut cells = Vec::new();
        let mut gaps = Vec::new();
        for layer in layer_order {
            for class in &classes {
                match set
                    .entries
                    .iter()
                    .position(|(m, _)| m.model == model && &m.layer == layer && &m.class == class)
                {
                    Some(i) => cells.push(i),
                    None => gaps.push(format!("({model}, {layer}, {class})")),
                }
            }
        }
        if !gaps.is_empty() {
            return Err(Error::Experiment(format!(
                "missing clouds for the heatmap: {}",
                gaps.join(", ")
            )));
        }
        if classes.is_empty() {
            continue;
        }
        let diagrams: Vec<PersistenceDiagram> = cells
            .par_iter()
            .map(|&i| Ok(cloud_diagram(&set.load_cloud(i)?, cfg)?.diagram))
            .collect::<Result<_>>()?;
        let nc = classes.len();
        let nl = layer_order.len();
        let at = |l: usize, c: usize| &diagrams[l * nc + c];
        for &dim in dims {
            let cells: Vec<(usize, usize)> =
                (0..nl).flat_map(|i| (i..nl).map(move |j| (i, j))).collect();
            let means: Vec<f64> = cells
                .par_iter()
                .map(|&(i, j)| {
                    let ds = (0..nc)
                        .map(|c| bottleneck_distance(at(i, c), at(j, c), dim))
                        .collect::<Result<Vec<f64>>>()?;
                    Ok(ds.iter().sum::<f64>() / nc as f64)
                })
                .collect::<Result<_>>()?;
            let mut values = vec![f64::NAN; nl * nl];
            for (&(i, j), v) in cells.iter().zip(means) {
                values[i * nl + j] = v;
            }
            maps.push(Heatmap {
                model: model.clone(),
                dim,
                layers: layer_order.to_vec(),
                values,
            });
        }
    }
    Ok(maps)
}

// ---------------------------------------------------------------------------
// class matrix and embedding

/// Distance matrix between every diagram stored at `layer` (across models),
/// labeled `model/class`, plus its planar embedding.
pub fn class_matrix_and_embedding(
    set: &CloudSet,
    layer: &str,
    dim: usize,
    cfg: &PipelineConfig,
    embedder: &dyn Embedder,
) -> Result<(DiagramDistanceMatrix, Embedding2D)> {
    check_dims(&[dim], cfg.filtration.max_dim)?;
    let mut members: Vec<usize> = set
        .entries
        .iter()
        .enumerate()
        .filter(|(_, (m, _))| m.layer == layer)
        .map(|(i, _)| i)
        .collect();
    members.sort_by(|&a, &b| set.entries[a].0.cmp(&set.entries[b].0));
    if members.len() < 3 {
        return Err(Error::Experiment(format!(
            "layer '{layer}' has {} diagrams; the class matrix needs at least 3",
            members.len()
        )));
    }
    let diagrams: Vec<(String, PersistenceDiagram)> = members
        .par_iter()
        .map(|&i| {
            let meta = &set.entries[i].0;
            let d = cloud_diagram(&set.load_cloud(i)?, cfg)?.diagram;
            Ok((format!("{}/{}", meta.model, meta.class), d))
        })
        .collect::<Result<_>>()?;
    let matrix = pairwise_distances(&diagrams, dim)?;
    let embedding = embedder.embed(&matrix)?;
    Ok((matrix, embedding))
}

// ---------------------------------------------------------------------------
// registry

/// Parameters shared by all protocols; each protocol checks the ones it needs.
#[derive(Debug, Clone)]
pub struct ExperimentRequest {
    pub input: Option<PointCloud>,
    pub set: Option<CloudSet>,
    pub pipeline: PipelineConfig,
    pub sizes: Vec<usize>,
    pub seed: u64,
    pub dims: Vec<usize>,
    /// LOF setting used by the LOF comparison (the pipeline's own `lof` is the
    /// on/off switch for the other protocols).
    pub lof: LofConfig,
    pub pair_budget: Option<usize>,
    pub layer_order: Vec<String>,
    pub layer: Option<String>,
}

impl Default for ExperimentRequest {
    fn default() -> Self {
        Self {
            input: None,
            set: None,
            pipeline: PipelineConfig::default(),
            sizes: Vec::new(),
            seed: 0,
            dims: vec![0, 1],
            lof: LofConfig::default(),
            pair_budget: None,
            layer_order: Vec::new(),
            layer: None,
        }
    }
}

impl ExperimentRequest {
    fn input(&self) -> Result<&PointCloud> {
        self.input
            .as_ref()
            .ok_or_else(|| Error::Usage("this experiment needs --input".into()))
    }

    fn set(&self) -> Result<&CloudSet> {
        self.set
            .as_ref()
            .ok_or_else(|| Error::Usage("this experiment needs --manifest".into()))
    }
}

/// A named output file: the main table has an empty suffix.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub suffix: String,
    pub contents: String,
}

pub trait Experiment: Send + Sync {
    fn name(&self) -> &'static str;
    fn summary(&self) -> &'static str;
    fn run(&self, req: &ExperimentRequest) -> Result<Vec<Artifact>>;
}

fn main_artifact(contents: String) -> Artifact {
    Artifact {
        suffix: String::new(),
        contents,
    }
}

pub struct SubsampleExperiment;

impl Experiment for SubsampleExperiment {
    fn name(&self) -> &'static str {
        "subsample"
    }

    fn summary(&self) -> &'static str {
        "persistence of growing subsamples vs the full cloud (needs --input, --sizes)"
    }

    fn run(&self, req: &ExperimentRequest) -> Result<Vec<Artifact>> {
        if req.sizes.is_empty() {
            return Err(Error::Usage("the subsample experiment needs --sizes".into()));
        }
        let t = subsample_study(req.input()?, &req.sizes, req.seed, &req.dims, &req.pipeline)?;
        Ok(vec![main_artifact(t.to_csv())])
    }
}

pub struct LofCompareExperiment;

impl Experiment for LofCompareExperiment {
    fn name(&self) -> &'static str {
        "lof-compare"
    }

    fn summary(&self) -> &'static str {
        "half-class bottleneck distances with and without LOF (needs --manifest)"
    }

    fn run(&self, req: &ExperimentRequest) -> Result<Vec<Artifact>> {
        let base = PipelineConfig {
            lof: None,
            ..req.pipeline.clone()
        };
        let t = lof_comparison(req.set()?, req.lof, &req.dims, req.pair_budget, req.seed, &base)?;
        Ok(vec![main_artifact(t.to_csv())])
    }
}

pub struct HeatmapExperiment;

impl Experiment for HeatmapExperiment {
    fn name(&self) -> &'static str {
        "heatmap"
    }

    fn summary(&self) -> &'static str {
        "class-averaged distances between layers (needs --manifest, --layers)"
    }

    fn run(&self, req: &ExperimentRequest) -> Result<Vec<Artifact>> {
        if req.layer_order.is_empty() {
            return Err(Error::Usage("the heatmap experiment needs --layers".into()));
        }
        let maps = layer_heatmap(req.set()?, &req.layer_order, &req.dims, &req.pipeline)?;
        Ok(vec![main_artifact(heatmaps_to_csv(&maps))])
    }
}

pub struct ClassMatrixExperiment {
    pub embedder: Arc<dyn Embedder>,
}

impl Default for ClassMatrixExperiment {
    fn default() -> Self {
        Self {
            embedder: Arc::new(ClassicalMds),
        }
    }
}

impl Experiment for ClassMatrixExperiment {
    fn name(&self) -> &'static str {
        "class-matrix"
    }

    fn summary(&self) -> &'static str {
        "distance matrix and 2D embedding of all diagrams at one layer (needs --manifest, --layer)"
    }

    fn run(&self, req: &ExperimentRequest) -> Result<Vec<Artifact>> {
        let layer = req
            .layer
            .as_deref()
            .ok_or_else(|| Error::Usage("the class-matrix experiment needs --layer".into()))?;
        let [dim] = req.dims[..] else {
            return Err(Error::Usage(
                "the class-matrix experiment takes exactly one dimension".into(),
            ));
        };
        let (matrix, emb) =
            class_matrix_and_embedding(req.set()?, layer, dim, &req.pipeline, self.embedder.as_ref())?;
        Ok(vec![
            main_artifact(matrix.to_csv()),
            Artifact {
                suffix: "embedding".into(),
                contents: emb.to_csv(),
            },
        ])
    }
}

pub struct ExperimentRegistry {
    experiments: Vec<Arc<dyn Experiment>>,
}

impl Default for ExperimentRegistry {
    fn default() -> Self {
        Self {
            experiments: vec![
                Arc::new(SubsampleExperiment),
                Arc::new(LofCompareExperiment),
                Arc::new(HeatmapExperiment),
                Arc::new(ClassMatrixExperiment::default()),
            ],
        }
    }
}

impl ExperimentRegistry {
    pub fn register(&mut self, e: Arc<dyn Experiment>) {
        self.experiments.retain(|x| x.name() != e.name());
        self.experiments.push(e);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn Experiment>> {
        self.experiments
            .iter()
            .find(|e| e.name() == name)
            .cloned()
            .ok_or_else(|| Error::UnknownStrategy {
                kind: "experiment",
                name: name.into(),
                available: self.names().join(", "),
            })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.experiments.iter().map(|e| e.name()).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Arc<dyn Experiment>> {
        self.experiments.iter()
    }
}
