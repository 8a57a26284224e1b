//! CSV tables and SVG layer-score plots for [`ReportRow`]s.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use super::{Method, ReportRow};
use crate::data::Condition;
use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 11] = [
    "method",
    "scope",
    "pooling",
    "layer",
    "condition",
    "seed",
    "score_kind",
    "score",
    "n_items",
    "wall_time_s",
    "error",
];

/// Writes rows in (method, layer, condition, seed) order with LF endings.
pub fn write_rows<W: Write>(rows: &[ReportRow], out: W) -> Result<()> {
    let mut sorted: Vec<&ReportRow> = rows.iter().collect();
    sorted.sort_by_key(|r| r.sort_key());
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(CSV_HEADER)?;
    for row in sorted {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_csv(rows: &[ReportRow], path: impl AsRef<Path>) -> Result<()> {
    let mut file = BufWriter::new(File::create(path)?);
    write_rows(rows, &mut file)?;
    file.flush()?;
    Ok(())
}

/// Parses rows and checks each against its method.
pub fn read_rows<R: Read>(input: R) -> Result<Vec<ReportRow>> {
    let mut r = csv::ReaderBuilder::new().from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != CSV_HEADER {
        return Err(Error::InvalidRow(format!("unexpected header {}", header.join(","))));
    }
    let mut rows = Vec::new();
    for rec in r.deserialize() {
        let row: ReportRow = rec?;
        row.check()?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<ReportRow>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    read_rows(std::io::BufReader::new(file))
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;
const SEED_COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn nice_range(lo: f64, hi: f64) -> (f64, f64) {
    let (lo, hi) = (lo.min(0.0), hi.max(0.0));
    if hi - lo < 1e-9 {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

/// One panel: a polyline per (condition, seed) over layers; trained solid,
/// random dashed. Rows without a score are skipped.
pub fn render_svg(method: Method, rows: &[ReportRow]) -> Result<String> {
    let mut series: BTreeMap<(Condition, u64), Vec<(usize, f64)>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.method == method) {
        if let Some(score) = r.score {
            series.entry((r.condition, r.seed)).or_default().push((r.layer, score));
        }
    }
    if series.is_empty() {
        return Err(Error::NoRows);
    }
    for pts in series.values_mut() {
        pts.sort_by_key(|p| p.0);
    }
    let max_layer = series.values().flatten().map(|p| p.0).max().unwrap_or(0).max(1);
    let (lo, hi) = series
        .values()
        .flatten()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.1), b.max(p.1)));
    let (y0, y1) = nice_range(lo, hi);
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let sx = |layer: usize| LEFT + plot_w * layer as f64 / max_layer as f64;
    let sy = |v: f64| TOP + plot_h * (y1 - v) / (y1 - y0);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="15">{}</text>"#, LEFT + plot_w / 2.0, method);

    // axes and ticks
    let _ = writeln!(
        s,
        r#"<g stroke="black"><line x1="{LEFT}" y1="{:.1}" x2="{:.1}" y2="{:.1}"/><line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{:.1}"/></g>"#,
        TOP + plot_h,
        LEFT + plot_w,
        TOP + plot_h,
        TOP + plot_h
    );
    for layer in 0..=max_layer {
        let x = sx(layer);
        let _ = writeln!(
            s,
            r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">{layer}</text>"#,
            TOP + plot_h + 16.0
        );
    }
    for k in 0..=4 {
        let v = y0 + (y1 - y0) * k as f64 / 4.0;
        let y = sy(v);
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#dddddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">{v:.2}</text>"##,
            LEFT + plot_w,
            LEFT - 6.0,
            y + 4.0
        );
    }
    if y0 < 0.0 && y1 > 0.0 {
        let _ = writeln!(
            s,
            r#"<line x1="{LEFT}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="gray"/>"#,
            sy(0.0),
            LEFT + plot_w,
            sy(0.0)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">layer</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 14.0
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{:.1}" text-anchor="middle" transform="rotate(-90 18 {:.1})">{}</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0,
        method.score_kind().as_str()
    );

    let seeds: Vec<u64> = {
        let mut v: Vec<u64> = series.keys().map(|k| k.1).collect();
        v.sort_unstable();
        v.dedup();
        v
    };
    let color = |seed: u64| SEED_COLORS[seeds.iter().position(|&s| s == seed).unwrap_or(0) % SEED_COLORS.len()];
    for ((condition, seed), pts) in &series {
        let points: Vec<String> = pts.iter().map(|&(l, v)| format!("{:.1},{:.1}", sx(l), sy(v))).collect();
        let dash = match condition {
            Condition::Trained => "",
            Condition::Random => r#" stroke-dasharray="6 4""#,
        };
        let _ = writeln!(
            s,
            r#"<polyline class="{condition}" data-seed="{seed}" fill="none" stroke="{}" stroke-width="1.8"{dash} points="{}"/>"#,
            color(*seed),
            points.join(" ")
        );
    }

    // legend
    let lx = WIDTH - RIGHT + 16.0;
    let mut ly = TOP + 6.0;
    for (label, dash) in [("trained", ""), ("random", r#" stroke-dasharray="6 4""#)] {
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{:.1}" y2="{ly}" stroke="black"{dash}/><text x="{:.1}" y="{:.1}">{label}</text>"#,
            lx + 28.0,
            lx + 34.0,
            ly + 4.0
        );
        ly += 18.0;
    }
    for &seed in &seeds {
        let _ = writeln!(
            s,
            r#"<rect x="{lx}" y="{:.1}" width="28" height="4" fill="{}"/><text x="{:.1}" y="{:.1}">seed {seed}</text>"#,
            ly - 2.0,
            color(seed),
            lx + 34.0,
            ly + 4.0
        );
        ly += 18.0;
    }
    s.push_str("</svg>\n");
    Ok(s)
}

/// Writes `<method>.svg` into `dir` for every method with at least one
/// scored row.
pub fn emit_svg(rows: &[ReportRow], dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let mut methods: Vec<Method> = rows.iter().filter(|r| r.score.is_some()).map(|r| r.method).collect();
    methods.sort_unstable();
    methods.dedup();
    if methods.is_empty() {
        return Err(Error::NoRows);
    }
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for m in methods {
        let path = dir.join(format!("{m}.svg"));
        std::fs::write(&path, render_svg(m, rows)?)?;
        written.push(path);
    }
    Ok(written)
}
