//! Minimal SVG renderings of result CSVs: diagram scatter, boxplots from a
//! quantile table, and embedding scatter colored by label group.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::diagram::{BoxSummary, PersistenceDiagram, QUANTILE_HEADER};
use crate::embed::Embedding2D;
use crate::error::{Error, Result};

const WIDTH: f64 = 480.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 48.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

/// Fixed-precision coordinate so output bytes do not depend on float noise.
fn fmt(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

struct Axis {
    lo: f64,
    hi: f64,
    px_lo: f64,
    px_hi: f64,
}

impl Axis {
    fn new(lo: f64, hi: f64, px_lo: f64, px_hi: f64) -> Self {
        let (lo, hi) = if hi - lo > 1e-12 { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
        Self { lo, hi, px_lo, px_hi }
    }

    fn map(&self, v: f64) -> f64 {
        self.px_lo + (v - self.lo) / (self.hi - self.lo) * (self.px_hi - self.px_lo)
    }
}

fn header(out: &mut String, title: &str) {
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#,
        w = WIDTH,
        h = HEIGHT
    )
    .unwrap();
    writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(
        out,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
        fmt(WIDTH / 2.0),
        escape(title)
    )
    .unwrap();
}

fn frame(out: &mut String, x: &Axis, y: &Axis, xlabel: &str, ylabel: &str) {
    writeln!(
        out,
        r#"<rect x="{m}" y="{m}" width="{w}" height="{h}" fill="none" stroke="black"/>"#,
        m = fmt(MARGIN),
        w = fmt(WIDTH - 2.0 * MARGIN),
        h = fmt(HEIGHT - 2.0 * MARGIN)
    )
    .unwrap();
    for (v, anchor, px, py) in [
        (x.lo, "start", MARGIN, HEIGHT - MARGIN + 16.0),
        (x.hi, "end", WIDTH - MARGIN, HEIGHT - MARGIN + 16.0),
    ] {
        writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="{anchor}" font-size="10">{}</text>"#,
            fmt(px),
            fmt(py),
            fmt(v)
        )
        .unwrap();
    }
    for (v, py) in [(y.lo, HEIGHT - MARGIN), (y.hi, MARGIN + 10.0)] {
        writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="end" font-size="10">{}</text>"#,
            fmt(MARGIN - 4.0),
            fmt(py),
            fmt(v)
        )
        .unwrap();
    }
    writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">{}</text>"#,
        fmt(WIDTH / 2.0),
        fmt(HEIGHT - 12.0),
        escape(xlabel)
    )
    .unwrap();
    writeln!(
        out,
        r#"<text x="14" y="{y}" text-anchor="middle" font-size="12" transform="rotate(-90 14 {y})">{}</text>"#,
        escape(ylabel),
        y = fmt(HEIGHT / 2.0)
    )
    .unwrap();
}

fn legend(out: &mut String, entries: &[(String, &str)]) {
    for (i, (name, color)) in entries.iter().enumerate() {
        let y = MARGIN + 12.0 + 14.0 * i as f64;
        writeln!(
            out,
            r#"<circle cx="{}" cy="{}" r="4" fill="{color}"/><text x="{}" y="{}" font-size="10">{}</text>"#,
            fmt(WIDTH - MARGIN - 80.0),
            fmt(y - 3.0),
            fmt(WIDTH - MARGIN - 72.0),
            fmt(y),
            escape(name)
        )
        .unwrap();
    }
}

/// Birth/death scatter, one color per homology dimension. Essential features
/// are drawn as triangles on the top edge.
pub fn diagram_svg(d: &PersistenceDiagram, title: &str) -> String {
    let finite: Vec<f64> = d
        .pairs
        .iter()
        .flat_map(|p| [p.birth, p.death])
        .filter(|v| v.is_finite())
        .collect();
    let hi = finite.iter().copied().fold(0.0f64, f64::max);
    let lo = finite.iter().copied().fold(0.0f64, f64::min);
    let pad = (hi - lo).max(1e-9) * 0.05;
    let x = Axis::new(lo, hi + pad, MARGIN, WIDTH - MARGIN);
    let y = Axis::new(lo, hi + pad, HEIGHT - MARGIN, MARGIN);

    let mut out = String::new();
    header(&mut out, title);
    frame(&mut out, &x, &y, "birth", &format!("death ({})", d.scale));
    writeln!(
        out,
        r##"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#999" stroke-dasharray="4 3"/>"##,
        fmt(x.map(x.lo)),
        fmt(y.map(y.lo)),
        fmt(x.map(x.hi)),
        fmt(y.map(y.hi))
    )
    .unwrap();
    let mut entries = Vec::new();
    for dim in 0..=d.max_dim {
        let color = PALETTE[dim % PALETTE.len()];
        let mut any = false;
        for p in d.dimension(dim) {
            any = true;
            let cx = x.map(p.birth);
            if p.is_essential() {
                let cy = MARGIN + 2.0;
                writeln!(
                    out,
                    r#"<path d="M{} {}L{} {}L{} {}Z" fill="{color}"/>"#,
                    fmt(cx - 4.0),
                    fmt(cy + 6.0),
                    fmt(cx + 4.0),
                    fmt(cy + 6.0),
                    fmt(cx),
                    fmt(cy)
                )
                .unwrap();
            } else {
                writeln!(
                    out,
                    r#"<circle cx="{}" cy="{}" r="3" fill="{color}" fill-opacity="0.7"/>"#,
                    fmt(cx),
                    fmt(y.map(p.death))
                )
                .unwrap();
            }
        }
        if any {
            entries.push((format!("H{dim}"), color));
        }
    }
    legend(&mut out, &entries);
    out.push_str("</svg>\n");
    out
}

/// One boxplot row as read back from a quantile CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileRecord {
    pub layer: String,
    pub dim: usize,
    pub stat: String,
    pub summary: BoxSummary,
}

pub fn parse_quantile_csv(text: &str, path: &Path) -> Result<Vec<QuantileRecord>> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let header: Vec<&str> = rdr.headers()?.iter().collect();
    if header.join(",") != QUANTILE_HEADER {
        return Err(Error::parse(path, 1, format!("expected header {QUANTILE_HEADER}")));
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let num = |k: usize| -> Result<f64> {
            rec[k]
                .trim()
                .parse()
                .map_err(|_| Error::parse(path, line, format!("bad number '{}'", &rec[k])))
        };
        let outliers = rec[8]
            .split(';')
            .filter(|s| !s.is_empty())
            .map(|s| s.parse().map_err(|_| Error::parse(path, line, format!("bad outlier '{s}'"))))
            .collect::<Result<_>>()?;
        rows.push(QuantileRecord {
            layer: rec[0].to_string(),
            dim: rec[1]
                .trim()
                .parse()
                .map_err(|_| Error::parse(path, line, "bad dimension"))?,
            stat: rec[2].to_string(),
            summary: BoxSummary {
                min: num(3)?,
                q1: num(4)?,
                median: num(5)?,
                q3: num(6)?,
                max: num(7)?,
                outliers,
            },
        });
    }
    Ok(rows)
}

/// Boxplots of one statistic in one dimension, one box per layer in file order.
pub fn boxplot_svg(rows: &[QuantileRecord], stat: &str, dim: usize) -> Result<String> {
    let sel: Vec<&QuantileRecord> = rows.iter().filter(|r| r.stat == stat && r.dim == dim).collect();
    if sel.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "no quantile rows for stat '{stat}' in dimension {dim}"
        )));
    }
    let values = sel.iter().flat_map(|r| {
        let s = &r.summary;
        [s.min, s.max].into_iter().chain(s.outliers.iter().copied())
    });
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
    let pad = (hi - lo).max(1e-9) * 0.05;
    let y = Axis::new(lo - pad, hi + pad, HEIGHT - MARGIN, MARGIN);
    let x = Axis::new(0.0, sel.len() as f64, MARGIN, WIDTH - MARGIN);

    let mut out = String::new();
    header(&mut out, &format!("H{dim} {stat}"));
    frame(&mut out, &x, &y, "layer", stat);
    let half = 0.3 * (x.map(1.0) - x.map(0.0));
    for (i, r) in sel.iter().enumerate() {
        let s = &r.summary;
        let cx = x.map(i as f64 + 0.5);
        writeln!(
            out,
            r#"<line x1="{cx}" y1="{}" x2="{cx}" y2="{}" stroke="black"/>"#,
            fmt(y.map(s.min)),
            fmt(y.map(s.max)),
            cx = fmt(cx)
        )
        .unwrap();
        writeln!(
            out,
            r##"<rect x="{}" y="{}" width="{}" height="{}" fill="#cfe2f3" stroke="black"/>"##,
            fmt(cx - half),
            fmt(y.map(s.q3)),
            fmt(2.0 * half),
            fmt(y.map(s.q1) - y.map(s.q3))
        )
        .unwrap();
        writeln!(
            out,
            r#"<line x1="{}" y1="{m}" x2="{}" y2="{m}" stroke="black" stroke-width="2"/>"#,
            fmt(cx - half),
            fmt(cx + half),
            m = fmt(y.map(s.median))
        )
        .unwrap();
        for o in &s.outliers {
            writeln!(
                out,
                r#"<circle cx="{}" cy="{}" r="2.5" fill="none" stroke="black"/>"#,
                fmt(cx),
                fmt(y.map(*o))
            )
            .unwrap();
        }
        writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle" font-size="10">{}</text>"#,
            fmt(cx),
            fmt(HEIGHT - MARGIN + 28.0),
            escape(&r.layer)
        )
        .unwrap();
    }
    out.push_str("</svg>\n");
    Ok(out)
}

pub fn parse_embedding_csv(text: &str, path: &Path) -> Result<Embedding2D> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let header: Vec<&str> = rdr.headers()?.iter().collect();
    if header != ["label", "x", "y"] {
        return Err(Error::parse(path, 1, "expected header label,x,y"));
    }
    let mut labels = Vec::new();
    let mut coords = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let parse = |k: usize| -> Result<f64> {
            rec[k]
                .trim()
                .parse()
                .map_err(|_| Error::parse(path, i + 2, format!("bad coordinate '{}'", &rec[k])))
        };
        coords.push([parse(1)?, parse(2)?]);
        labels.push(rec[0].to_string());
    }
    Ok(Embedding2D {
        coords,
        labels,
        stress: f64::NAN,
    })
}

/// Group key of a label: everything before the first `sep`, or the whole label.
pub fn label_group<'a>(label: &'a str, sep: &str) -> &'a str {
    label.split_once(sep).map_or(label, |(g, _)| g)
}

/// Embedding scatter; points sharing a label group (see [`label_group`]) share a color.
pub fn embedding_svg(e: &Embedding2D, group_sep: &str, title: &str) -> String {
    let (mut xlo, mut xhi, mut ylo, mut yhi) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for c in &e.coords {
        xlo = xlo.min(c[0]);
        xhi = xhi.max(c[0]);
        ylo = ylo.min(c[1]);
        yhi = yhi.max(c[1]);
    }
    let px = (xhi - xlo).max(1e-9) * 0.08;
    let py = (yhi - ylo).max(1e-9) * 0.08;
    let x = Axis::new(xlo - px, xhi + px, MARGIN, WIDTH - MARGIN);
    let y = Axis::new(ylo - py, yhi + py, HEIGHT - MARGIN, MARGIN);

    let mut groups: BTreeMap<&str, &str> = BTreeMap::new();
    for l in &e.labels {
        let next = PALETTE[groups.len() % PALETTE.len()];
        groups.entry(label_group(l, group_sep)).or_insert(next);
    }

    let mut out = String::new();
    header(&mut out, title);
    frame(&mut out, &x, &y, "x", "y");
    for (l, c) in e.labels.iter().zip(&e.coords) {
        let color = groups[label_group(l, group_sep)];
        writeln!(
            out,
            r#"<circle cx="{}" cy="{}" r="4" fill="{color}"><title>{}</title></circle>"#,
            fmt(x.map(c[0])),
            fmt(y.map(c[1])),
            escape(l)
        )
        .unwrap();
    }
    let entries: Vec<(String, &str)> = groups.iter().map(|(g, c)| (g.to_string(), *c)).collect();
    legend(&mut out, &entries);
    out.push_str("</svg>\n");
    out
}
