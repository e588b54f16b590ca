//! Standalone SVG line plots of CSV tables.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use clap::ValueEnum;

use crate::config::{input_error, InputError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlotKind {
    /// First column against every other column.
    Line,
    /// `t` against the `cdf` / `cdf_*` columns, on a probability axis.
    Cdf,
    /// `t` against the `pdf` / `pdf_*` columns.
    Pdf,
    /// As `line`, on a square range with the identity line.
    Qq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: Vec<String>, rows: Vec<Vec<f64>>) -> Self {
        Self { columns, rows }
    }

    fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }

    fn position(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }
}

/// Reads a numeric CSV with a header row; any non-numeric cell is a schema error.
pub fn read_table(path: &Path) -> Result<Table> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let schema = |msg: String| InputError(format!("{}: {msg}", path.display()));
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let columns: Vec<String> =
        reader.headers().map_err(|e| schema(e.to_string()))?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| schema(e.to_string()))?;
        let row = rec
            .iter()
            .map(|cell| cell.trim().parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| schema(format!("row {} is not all finite numbers", i + 1)))?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(schema("no data rows".into()).into());
    }
    Ok(Table { columns, rows })
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 168.0;
const TOP: f64 = 36.0;
const BOTTOM: f64 = 48.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

struct Axis {
    lo: f64,
    hi: f64,
}

impl Axis {
    fn spanning(values: impl Iterator<Item = f64>) -> Self {
        let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        if lo == hi {
            Self { lo: lo - 0.5, hi: hi + 0.5 }
        } else {
            Self { lo, hi }
        }
    }

    fn frac(&self, v: f64) -> f64 {
        (v - self.lo) / (self.hi - self.lo)
    }
}

fn tick_label(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Renders `table` as an SVG document titled `title`.
pub fn render(table: &Table, kind: PlotKind, title: &str) -> Result<String> {
    let (x_col, series): (usize, Vec<usize>) = match kind {
        PlotKind::Line | PlotKind::Qq => {
            if table.columns.len() < 2 {
                return input_error(format!("{kind:?} plot needs an x column and at least one series"));
            }
            (0, (1..table.columns.len()).collect())
        }
        PlotKind::Cdf | PlotKind::Pdf => {
            let prefix = if kind == PlotKind::Cdf { "cdf" } else { "pdf" };
            let Some(t) = table.position("t") else {
                return input_error(format!("{prefix} plot needs a t column"));
            };
            let cols: Vec<usize> = (0..table.columns.len())
                .filter(|&j| table.columns[j] == prefix || table.columns[j].starts_with(&format!("{prefix}_")))
                .collect();
            if cols.is_empty() {
                return input_error(format!("{prefix} plot needs a {prefix} column"));
            }
            (t, cols)
        }
    };
    if let Some(bad) = table.rows.iter().find(|r| r.len() != table.columns.len()) {
        return input_error(format!("row with {} cells under {} columns", bad.len(), table.columns.len()));
    }

    let xs = table.column(x_col);
    let ys: Vec<Vec<f64>> = series
        .iter()
        .map(|&j| {
            let col = table.column(j);
            if kind == PlotKind::Cdf {
                col.into_iter().map(|v| v.clamp(0.0, 1.0)).collect()
            } else {
                col
            }
        })
        .collect();
    let all_y = || ys.iter().flatten().copied();
    let (x_axis, y_axis) = match kind {
        PlotKind::Line => (Axis::spanning(xs.iter().copied()), Axis::spanning(all_y())),
        PlotKind::Cdf => (Axis::spanning(xs.iter().copied()), Axis { lo: 0.0, hi: 1.0 }),
        PlotKind::Pdf => (Axis::spanning(xs.iter().copied()), Axis::spanning(all_y().chain([0.0]))),
        PlotKind::Qq => {
            let both = Axis::spanning(xs.iter().copied().chain(all_y()));
            (Axis { lo: both.lo, hi: both.hi }, both)
        }
    };

    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let px = |v: f64| LEFT + x_axis.frac(v) * plot_w;
    let py = |v: f64| TOP + (1.0 - y_axis.frac(v)) * plot_h;

    let mut svg = String::new();
    let w = &mut svg;
    // writing to a String cannot fail
    let _ = writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(w, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        w,
        r#"<text x="{:.2}" y="20" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#,
        LEFT + plot_w / 2.0,
        escape(title)
    );
    let _ = writeln!(w, r#"<g class="axes" stroke="black" stroke-width="1">"#);
    let _ = writeln!(
        w,
        r#"<line x1="{LEFT:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}"/>"#,
        TOP + plot_h,
        LEFT + plot_w,
        TOP + plot_h
    );
    let _ = writeln!(w, r#"<line x1="{LEFT:.2}" y1="{TOP:.2}" x2="{LEFT:.2}" y2="{:.2}"/>"#, TOP + plot_h);
    for i in 0..=4 {
        let f = f64::from(i) / 4.0;
        let (xv, yv) = (x_axis.lo + f * (x_axis.hi - x_axis.lo), y_axis.lo + f * (y_axis.hi - y_axis.lo));
        let _ = writeln!(
            w,
            r#"<line x1="{0:.2}" y1="{1:.2}" x2="{0:.2}" y2="{2:.2}"/>"#,
            px(xv),
            TOP + plot_h,
            TOP + plot_h + 5.0
        );
        let _ = writeln!(w, r#"<line x1="{0:.2}" y1="{1:.2}" x2="{2:.2}" y2="{1:.2}"/>"#, LEFT - 5.0, py(yv), LEFT);
    }
    let _ = writeln!(w, "</g>");
    let _ = writeln!(w, r#"<g font-family="sans-serif" font-size="11">"#);
    for i in 0..=4 {
        let f = f64::from(i) / 4.0;
        let (xv, yv) = (x_axis.lo + f * (x_axis.hi - x_axis.lo), y_axis.lo + f * (y_axis.hi - y_axis.lo));
        let _ = writeln!(
            w,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            px(xv),
            TOP + plot_h + 18.0,
            tick_label(xv)
        );
        let _ = writeln!(
            w,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 8.0,
            py(yv) + 4.0,
            tick_label(yv)
        );
    }
    let _ = writeln!(
        w,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 8.0,
        escape(&table.columns[x_col])
    );
    let _ = writeln!(w, "</g>");

    if kind == PlotKind::Qq {
        let (lo, hi) = (x_axis.lo, x_axis.hi);
        let _ = writeln!(
            w,
            r##"<line class="identity" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#888888" stroke-dasharray="4 4"/>"##,
            px(lo),
            py(lo),
            px(hi),
            py(hi)
        );
    }
    for (k, (col, y)) in series.iter().zip(&ys).enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let points: Vec<String> = xs.iter().zip(y).map(|(&a, &b)| format!("{:.2},{:.2}", px(a), py(b))).collect();
        let _ =
            writeln!(w, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, points.join(" "));
        let ly = TOP + 12.0 + 16.0 * k as f64;
        let lx = LEFT + plot_w + 12.0;
        let _ = writeln!(
            w,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/>"#,
            lx + 18.0
        );
        let _ = writeln!(
            w,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11">{}</text>"#,
            lx + 24.0,
            ly + 4.0,
            escape(&table.columns[*col])
        );
    }
    let _ = writeln!(w, "</svg>");
    Ok(svg)
}

/// Reads `csv`, renders it and writes the SVG to `out`.
pub fn plot_file(csv: &Path, kind: PlotKind, out: &Path) -> Result<()> {
    let table = read_table(csv)?;
    let title = csv.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let svg = render(&table, kind, &title)?;
    std::fs::write(out, svg).with_context(|| format!("writing {}", out.display()))
}
