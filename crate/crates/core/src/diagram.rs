//! Persistence diagrams, their summary statistics and CSV forms.
//!
//! Diagram CSV:
//!
//! ```text
//! # scale=diameter
//! # max_dim=1
//! # model=vgg19
//! # layer=Conv 4
//! # class=apple
//! dim,birth,death
//! 0,0,0.53
//! 0,0,inf
//! ```
//!
//! The `#` lines are optional metadata. Values use the shortest decimal that
//! round-trips to the same `f64`, so `load(save(d)) == d` bit for bit.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::persistence::{canonical_order, PersistencePair};
use crate::pointcloud::SourceMeta;
use crate::rips::Scale;

pub const DIAGRAM_HEADER: &str = "dim,birth,death";
pub const STATS_HEADER: &str =
    "layer,class,dim,count,inf_count,birth_mean,birth_std,death_mean,death_std,life_mean,life_std";
pub const QUANTILE_HEADER: &str = "layer,dim,stat,min,q1,median,q3,max,outliers";

#[derive(Debug, Clone, PartialEq)]
pub struct PersistenceDiagram {
    pub pairs: Vec<PersistencePair>,
    pub scale: Scale,
    /// Highest homology degree that was computed (dimensions may be empty).
    pub max_dim: usize,
    pub meta: Option<SourceMeta>,
}

impl PersistenceDiagram {
    /// Wraps reduction output. Zero-lifetime pairs are dropped unless
    /// `keep_zero_lifetime` is set.
    pub fn from_pairs(
        mut pairs: Vec<PersistencePair>,
        scale: Scale,
        max_dim: usize,
        keep_zero_lifetime: bool,
    ) -> Self {
        if !keep_zero_lifetime {
            pairs.retain(|p| p.death > p.birth);
        }
        canonical_order(&mut pairs);
        Self {
            pairs,
            scale,
            max_dim,
            meta: None,
        }
    }

    pub fn with_meta(mut self, meta: Option<SourceMeta>) -> Self {
        self.meta = meta;
        self
    }

    pub fn dimension(&self, dim: usize) -> impl Iterator<Item = &PersistencePair> {
        self.pairs.iter().filter(move |p| p.dim == dim)
    }

    pub fn finite(&self, dim: usize) -> impl Iterator<Item = &PersistencePair> {
        self.dimension(dim).filter(|p| !p.is_essential())
    }

    /// Human-readable label from the metadata (`model/layer/class`, empty parts skipped).
    pub fn label(&self) -> Option<String> {
        self.meta.as_ref().map(|m| {
            [&m.model, &m.layer, &m.class]
                .iter()
                .filter(|s| !s.is_empty())
                .map(|s| s.as_str())
                .collect::<Vec<_>>()
                .join("/")
        })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        writeln!(out, "# scale={}", self.scale).unwrap();
        writeln!(out, "# max_dim={}", self.max_dim).unwrap();
        if let Some(m) = &self.meta {
            writeln!(out, "# model={}", m.model).unwrap();
            writeln!(out, "# layer={}", m.layer).unwrap();
            writeln!(out, "# class={}", m.class).unwrap();
        }
        out.push_str(DIAGRAM_HEADER);
        out.push('\n');
        for p in &self.pairs {
            writeln!(out, "{},{},{}", p.dim, p.birth, p.death).unwrap();
        }
        out
    }

    pub fn from_csv(text: &str, path: &Path) -> Result<Self> {
        let mut scale = Scale::Diameter;
        let mut max_dim: Option<usize> = None;
        let mut meta: Option<SourceMeta> = None;
        let mut pairs = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let lineno = i + 1;
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                let Some((key, value)) = comment.trim().split_once('=') else {
                    continue;
                };
                let value = value.trim();
                match key.trim() {
                    "scale" => {
                        scale = value
                            .parse()
                            .map_err(|e: Error| Error::parse(path, lineno, e.to_string()))?
                    }
                    "max_dim" => {
                        max_dim = Some(value.parse().map_err(|_| {
                            Error::parse(path, lineno, format!("bad max_dim '{value}'"))
                        })?)
                    }
                    "model" => meta.get_or_insert_with(SourceMeta::default).model = value.into(),
                    "layer" => meta.get_or_insert_with(SourceMeta::default).layer = value.into(),
                    "class" => meta.get_or_insert_with(SourceMeta::default).class = value.into(),
                    _ => {}
                }
                continue;
            }
            if line == DIAGRAM_HEADER {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(Error::parse(
                    path,
                    lineno,
                    format!("expected 3 fields (dim,birth,death), got {}", fields.len()),
                ));
            }
            let dim: usize = fields[0]
                .parse()
                .map_err(|_| Error::parse(path, lineno, format!("bad dimension '{}'", fields[0])))?;
            let birth: f64 = fields[1]
                .parse()
                .map_err(|_| Error::parse(path, lineno, format!("bad birth '{}'", fields[1])))?;
            let death: f64 = fields[2]
                .parse()
                .map_err(|_| Error::parse(path, lineno, format!("bad death '{}'", fields[2])))?;
            if !birth.is_finite() {
                return Err(Error::parse(path, lineno, "birth must be finite"));
            }
            if death.is_nan() || death == f64::NEG_INFINITY {
                return Err(Error::parse(path, lineno, "death must be a number or inf"));
            }
            if death < birth {
                return Err(Error::parse(
                    path,
                    lineno,
                    format!("death {death} precedes birth {birth}"),
                ));
            }
            pairs.push(PersistencePair::new(dim, birth, death));
        }
        let max_dim = max_dim
            .or_else(|| pairs.iter().map(|p| p.dim).max())
            .unwrap_or(0);
        canonical_order(&mut pairs);
        Ok(Self {
            pairs,
            scale,
            max_dim,
            meta,
        })
    }
}

pub fn save_diagram(d: &PersistenceDiagram, path: &Path) -> Result<()> {
    fs::write(path, d.to_csv()).map_err(|e| Error::io(path, e))
}

pub fn load_diagram(path: &Path) -> Result<PersistenceDiagram> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    PersistenceDiagram::from_csv(&text, path)
}

/// Moments over the finite features of one homology degree.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DimStatistics {
    pub dim: usize,
    pub count: usize,
    pub inf_count: usize,
    pub birth_mean: f64,
    pub birth_std: f64,
    pub death_mean: f64,
    pub death_std: f64,
    pub life_mean: f64,
    pub life_std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagramStatistics {
    pub per_dim: Vec<DimStatistics>,
    pub meta: Option<SourceMeta>,
}

/// Mean and sample standard deviation; the deviation is 0 for fewer than two values.
fn moments(values: &[f64]) -> (f64, f64) {
    match values.len() {
        0 => (0.0, 0.0),
        1 => (values[0], 0.0),
        n => {
            let mean = values.iter().sum::<f64>() / n as f64;
            let ss: f64 = values.iter().map(|x| (x - mean) * (x - mean)).sum();
            (mean, (ss / (n - 1) as f64).sqrt())
        }
    }
}

/// Per-dimension statistics for dimensions `0..=max_dim`. Essential features
/// are counted in `inf_count` and never enter the moments; an empty dimension
/// reports zero for every moment.
pub fn diagram_stats(d: &PersistenceDiagram) -> DiagramStatistics {
    let top = d
        .pairs
        .iter()
        .map(|p| p.dim)
        .max()
        .unwrap_or(0)
        .max(d.max_dim);
    let per_dim = (0..=top)
        .map(|dim| {
            let finite: Vec<&PersistencePair> = d.finite(dim).collect();
            let births: Vec<f64> = finite.iter().map(|p| p.birth).collect();
            let deaths: Vec<f64> = finite.iter().map(|p| p.death).collect();
            let lives: Vec<f64> = finite.iter().map(|p| p.lifetime()).collect();
            let (birth_mean, birth_std) = moments(&births);
            let (death_mean, death_std) = moments(&deaths);
            let (life_mean, life_std) = moments(&lives);
            DimStatistics {
                dim,
                count: finite.len(),
                inf_count: d.dimension(dim).filter(|p| p.is_essential()).count(),
                birth_mean,
                birth_std,
                death_mean,
                death_std,
                life_mean,
                life_std,
            }
        })
        .collect();
    DiagramStatistics {
        per_dim,
        meta: d.meta.clone(),
    }
}

pub fn stats_to_csv(records: &[DiagramStatistics]) -> String {
    let mut out = String::from(STATS_HEADER);
    out.push('\n');
    for r in records {
        let (layer, class) = r
            .meta
            .as_ref()
            .map_or(("", ""), |m| (m.layer.as_str(), m.class.as_str()));
        for s in &r.per_dim {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                csv_field(layer),
                csv_field(class),
                s.dim,
                s.count,
                s.inf_count,
                s.birth_mean,
                s.birth_std,
                s.death_mean,
                s.death_std,
                s.life_mean,
                s.life_std
            )
            .unwrap();
        }
    }
    out
}

/// Quotes a field if it contains a delimiter, quote or newline.
pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Statistics summarized across a group of diagrams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum SummaryStat {
    Count,
    BirthMean,
    DeathMean,
    LifeMean,
}

impl SummaryStat {
    pub const ALL: [SummaryStat; 4] = [
        SummaryStat::Count,
        SummaryStat::BirthMean,
        SummaryStat::DeathMean,
        SummaryStat::LifeMean,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SummaryStat::Count => "count",
            SummaryStat::BirthMean => "birth_mean",
            SummaryStat::DeathMean => "death_mean",
            SummaryStat::LifeMean => "life_mean",
        }
    }

    /// `None` when a moment is undefined (no finite features).
    fn extract(self, s: &DimStatistics) -> Option<f64> {
        match self {
            SummaryStat::Count => Some(s.count as f64),
            _ if s.count == 0 => None,
            SummaryStat::BirthMean => Some(s.birth_mean),
            SummaryStat::DeathMean => Some(s.death_mean),
            SummaryStat::LifeMean => Some(s.life_mean),
        }
    }
}

/// Boxplot inputs: quartiles by linear interpolation between closest ranks,
/// whiskers at the most extreme values inside `[Q1 - 1.5·IQR, Q3 + 1.5·IQR]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxSummary {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub outliers: Vec<f64>,
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn box_summary(values: &[f64]) -> Result<BoxSummary> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("cannot summarize an empty group".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q1 = quantile_sorted(&sorted, 0.25);
    let median = quantile_sorted(&sorted, 0.5);
    let q3 = quantile_sorted(&sorted, 0.75);
    let iqr = q3 - q1;
    let (lo, hi) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    let inside: Vec<f64> = sorted.iter().copied().filter(|v| *v >= lo && *v <= hi).collect();
    let outliers = sorted.iter().copied().filter(|v| *v < lo || *v > hi).collect();
    Ok(BoxSummary {
        min: inside.first().copied().unwrap_or(q1),
        q1,
        median,
        q3,
        max: inside.last().copied().unwrap_or(q3),
        outliers,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantileRow {
    pub layer: String,
    pub dim: usize,
    pub stat: SummaryStat,
    pub summary: BoxSummary,
}

/// Groups records by layer and summarizes every statistic per dimension.
/// Output is ordered by `(layer, dim, stat)` regardless of input order.
pub fn quantile_summary(records: &[DiagramStatistics]) -> Result<Vec<QuantileRow>> {
    if records.is_empty() {
        return Err(Error::InvalidArgument(
            "quantile summary needs at least one statistics record".into(),
        ));
    }
    let mut groups: BTreeMap<(String, usize, SummaryStat), Vec<f64>> = BTreeMap::new();
    for r in records {
        let layer = r.meta.as_ref().map(|m| m.layer.clone()).unwrap_or_default();
        for s in &r.per_dim {
            for stat in SummaryStat::ALL {
                let entry = groups.entry((layer.clone(), s.dim, stat)).or_default();
                if let Some(v) = stat.extract(s) {
                    entry.push(v);
                }
            }
        }
    }
    groups
        .into_iter()
        .filter(|(_, v)| !v.is_empty())
        .map(|((layer, dim, stat), values)| {
            Ok(QuantileRow {
                layer,
                dim,
                stat,
                summary: box_summary(&values)?,
            })
        })
        .collect()
}

pub fn quantiles_to_csv(rows: &[QuantileRow]) -> String {
    let mut out = String::from(QUANTILE_HEADER);
    out.push('\n');
    for r in rows {
        let s = &r.summary;
        let outliers: Vec<String> = s.outliers.iter().map(f64::to_string).collect();
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            csv_field(&r.layer),
            r.dim,
            r.stat.as_str(),
            s.min,
            s.q1,
            s.median,
            s.q3,
            s.max,
            outliers.join(";")
        )
        .unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diagram(pairs: &[(usize, f64, f64)]) -> PersistenceDiagram {
        PersistenceDiagram::from_pairs(
            pairs.iter().map(|&(k, b, d)| PersistencePair::new(k, b, d)).collect(),
            Scale::Diameter,
            1,
            false,
        )
    }

    #[test]
    fn stats_of_two_h0_features() {
        let s = diagram_stats(&diagram(&[(0, 0.0, 1.0), (0, 0.0, 3.0)]));
        let h0 = s.per_dim[0];
        assert_eq!(h0.count, 2);
        assert_eq!(h0.death_mean, 2.0);
        assert_eq!(h0.life_mean, 2.0);
        assert_eq!(s.per_dim[1].count, 0);
    }

    #[test]
    fn essential_feature_is_counted_apart() {
        let s = diagram_stats(&diagram(&[(0, 0.0, f64::INFINITY)]));
        assert_eq!(s.per_dim[0].count, 0);
        assert_eq!(s.per_dim[0].inf_count, 1);
        assert_eq!(s.per_dim[0].death_mean, 0.0);
    }

    #[test]
    fn empty_diagram() {
        let s = diagram_stats(&diagram(&[]));
        assert!(s.per_dim.iter().all(|d| d.count == 0 && d.inf_count == 0));
    }

    #[test]
    fn zero_lifetime_pairs_are_dropped_by_default() {
        let pairs = vec![PersistencePair::new(0, 0.0, 0.0), PersistencePair::new(0, 0.0, 1.0)];
        let d = PersistenceDiagram::from_pairs(pairs.clone(), Scale::Diameter, 0, false);
        assert_eq!(d.pairs.len(), 1);
        let kept = PersistenceDiagram::from_pairs(pairs, Scale::Diameter, 0, true);
        assert_eq!(kept.pairs.len(), 2);
    }

    #[test]
    fn csv_round_trip_square() {
        let mut d = diagram(&[
            (0, 0.0, 1.0),
            (0, 0.0, 1.0),
            (0, 0.0, 1.0),
            (0, 0.0, f64::INFINITY),
            (1, 1.0, 2f64.sqrt()),
        ]);
        d.meta = Some(SourceMeta::new("vgg", "Conv 4", "apple"));
        let back = PersistenceDiagram::from_csv(&d.to_csv(), Path::new("d.csv")).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn loads_essential_h1() {
        let d = PersistenceDiagram::from_csv("dim,birth,death\n1,0.5,inf\n", Path::new("x")).unwrap();
        assert_eq!(d.pairs, vec![PersistencePair::new(1, 0.5, f64::INFINITY)]);
        assert_eq!(d.scale, Scale::Diameter);
    }

    #[test]
    fn death_before_birth_is_rejected() {
        match PersistenceDiagram::from_csv("dim,birth,death\n0,0,1\n1,2,1\n", Path::new("x")) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn box_of_single_value() {
        let b = box_summary(&[4.0]).unwrap();
        assert_eq!((b.min, b.q1, b.median, b.q3, b.max), (4.0, 4.0, 4.0, 4.0, 4.0));
        assert!(b.outliers.is_empty());
    }

    #[test]
    fn box_flags_far_value() {
        let b = box_summary(&[1.0, 2.0, 3.0, 4.0, 100.0]).unwrap();
        assert_eq!((b.q1, b.median, b.q3), (2.0, 3.0, 4.0));
        assert_eq!(b.outliers, vec![100.0]);
        assert_eq!((b.min, b.max), (1.0, 4.0));
    }

    #[test]
    fn identical_records_have_no_spread() {
        let mut d = diagram(&[(0, 0.0, 1.0), (1, 0.5, 0.75)]);
        d.meta = Some(SourceMeta::new("m", "L1", "c"));
        let s = diagram_stats(&d);
        let rows = quantile_summary(&[s.clone(), s]).unwrap();
        assert!(rows
            .iter()
            .all(|r| r.summary.q1 == r.summary.q3 && r.summary.outliers.is_empty()));
        assert!(quantile_summary(&[]).is_err());
    }

    #[test]
    fn stats_csv_layout() {
        let mut d = diagram(&[(0, 0.0, 1.0), (0, 0.0, 3.0)]);
        d.meta = Some(SourceMeta::new("m", "Conv 1", "cat"));
        let csv = stats_to_csv(&[diagram_stats(&d)]);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(STATS_HEADER));
        assert_eq!(lines.next(), Some("Conv 1,cat,0,2,0,0,0,2,1.4142135623730951,2,1.4142135623730951"));
    }
}
