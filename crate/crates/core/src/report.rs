//! CSV, JSON and SVG output.
//!
//! Numbers are written with 16 significant digits in Rust's
//! locale-independent scientific notation, so every value round-trips.

use std::fmt::Write as _;
use std::io::Write;

use serde::Serialize;

use crate::error::Result;

/// One CSV number.
pub fn fmt_num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.15e}")
    } else {
        format!("{x}")
    }
}

/// Header line plus one comma-separated record per row.
pub fn write_csv<W: Write>(mut out: W, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<()> {
    writeln!(out, "{}", header.join(","))?;
    for row in rows {
        let line: Vec<String> = row.iter().map(|&x| fmt_num(x)).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    out.flush()?;
    Ok(())
}

/// Columns of equal length written as CSV.
pub fn write_columns<W: Write>(out: W, header: &[&str], columns: &[&[f64]]) -> Result<()> {
    let n = columns.first().map_or(0, |c| c.len());
    assert!(columns.iter().all(|c| c.len() == n), "ragged CSV columns");
    write_csv(out, header, (0..n).map(|i| columns.iter().map(|c| c[i]).collect()))
}

pub fn write_json<W: Write, T: Serialize>(mut out: W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

/// One named curve for [`svg_chart`].
pub struct Series<'a> {
    pub name: &'a str,
    pub x: &'a [f64],
    pub y: &'a [f64],
}

const PALETTE: [&str; 5] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];

/// A minimal line chart: axes box, tick labels at the extremes, one
/// polyline per series and a legend. Non-finite points are skipped.
pub fn svg_chart(title: &str, series: &[Series<'_>]) -> String {
    let (w, h, m) = (640.0, 420.0, 50.0);
    let finite = |v: &f64| v.is_finite();
    let xs = series.iter().flat_map(|s| s.x.iter().copied()).filter(finite);
    let ys = series.iter().flat_map(|s| s.y.iter().copied()).filter(finite);
    let (x0, x1) = bounds(xs);
    let (y0, y1) = bounds(ys);
    let px = |x: f64| m + (x - x0) / (x1 - x0) * (w - 2.0 * m);
    let py = |y: f64| h - m - (y - y0) / (y1 - y0) * (h - 2.0 * m);

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="24" text-anchor="middle" font-family="sans-serif" font-size="16">{}</text>"#, w / 2.0, escape(title));
    let _ = writeln!(svg, r#"<rect x="{m}" y="{m}" width="{}" height="{}" fill="none" stroke="black"/>"#, w - 2.0 * m, h - 2.0 * m);
    for (v, x, y, anchor) in [
        (x0, m, h - m + 16.0, "start"),
        (x1, w - m, h - m + 16.0, "end"),
    ] {
        let _ = writeln!(svg, r#"<text x="{x}" y="{y}" text-anchor="{anchor}" font-family="sans-serif" font-size="11">{}</text>"#, tick(v));
    }
    for (v, y) in [(y0, h - m), (y1, m + 10.0)] {
        let _ = writeln!(svg, r#"<text x="{}" y="{y}" text-anchor="end" font-family="sans-serif" font-size="11">{}</text>"#, m - 4.0, tick(v));
    }
    for (k, s) in series.iter().enumerate() {
        let colour = PALETTE[k % PALETTE.len()];
        let points: Vec<String> = s
            .x
            .iter()
            .zip(s.y)
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|(&x, &y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        let _ = writeln!(svg, r#"<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{}"/>"#, points.join(" "));
        let ly = m + 16.0 + 16.0 * k as f64;
        let _ = writeln!(svg, r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{colour}" stroke-width="2"/>"#, w - m - 110.0, w - m - 90.0);
        let _ = writeln!(svg, r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11">{}</text>"#, w - m - 85.0, ly + 4.0, escape(s.name));
    }
    svg.push_str("</svg>\n");
    svg
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo <= f64::EPSILON * lo.abs().max(1.0) {
        return (lo - 0.5, hi + 0.5);
    }
    (lo, hi)
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-3 || v.abs() >= 1e4) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
