//! Minimal SVG line plots from CSV files. The CSV stays the contract; the
//! plot is a convenience rendering of one column against the first.

use anyhow::{bail, Context, Result};
use std::path::Path;

pub struct PlotData {
    pub x_label: String,
    pub y_label: String,
    pub points: Vec<(f64, f64)>,
}

/// Read a CSV with a header row; x is the first column, y the named column
/// (or the second column when `None`). Rows with non-numeric entries in the
/// chosen columns are skipped.
pub fn read_csv_column(path: &Path, y_column: Option<&str>) -> Result<PlotData> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    let mut lines = text.lines();
    let header = lines.next().context("empty csv")?;
    let names: Vec<&str> = header.split(',').collect();
    if names.len() < 2 {
        bail!("csv needs at least two columns, found {}", names.len());
    }
    let y_index = match y_column {
        None => 1,
        Some(name) => names
            .iter()
            .position(|n| *n == name)
            .with_context(|| format!("no column `{name}` in {header}"))?,
    };
    let mut points = Vec::new();
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != names.len() {
            continue;
        }
        if let (Ok(x), Ok(y)) = (fields[0].parse::<f64>(), fields[y_index].parse::<f64>()) {
            points.push((x, y));
        }
    }
    if points.is_empty() {
        bail!("no numeric rows for column {y_index} in {}", path.display());
    }
    Ok(PlotData {
        x_label: names[0].to_string(),
        y_label: names[y_index].to_string(),
        points,
    })
}

/// Render a polyline plot with axes and min/max tick labels.
pub fn render_svg(data: &PlotData) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const ML: f64 = 70.0;
    const MR: f64 = 20.0;
    const MT: f64 = 20.0;
    const MB: f64 = 50.0;

    let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &data.points {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if x1 == x0 {
        x1 = x0 + 1.0;
    }
    if y1 == y0 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| ML + (x - x0) / (x1 - x0) * (W - ML - MR);
    let sy = |y: f64| H - MB - (y - y0) / (y1 - y0) * (H - MT - MB);

    let mut path = String::new();
    for &(x, y) in &data.points {
        path.push_str(&format!("{:.2},{:.2} ", sx(x), sy(y)));
    }

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&format!(
        "<line x1=\"{ML}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        H - MB,
        W - MR,
        H - MB
    ));
    svg.push_str(&format!(
        "<line x1=\"{ML}\" y1=\"{MT}\" x2=\"{ML}\" y2=\"{}\" stroke=\"black\"/>\n",
        H - MB
    ));
    svg.push_str(&format!(
        "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" points=\"{}\"/>\n",
        path.trim_end()
    ));
    let text = |x: f64, y: f64, anchor: &str, s: String| {
        format!("<text x=\"{x:.1}\" y=\"{y:.1}\" font-size=\"12\" text-anchor=\"{anchor}\" font-family=\"monospace\">{s}</text>\n")
    };
    svg.push_str(&text(ML, H - MB + 16.0, "middle", format!("{x0:.6}")));
    svg.push_str(&text(W - MR, H - MB + 16.0, "middle", format!("{x1:.6}")));
    svg.push_str(&text(ML - 6.0, H - MB, "end", format!("{y0:.6}")));
    svg.push_str(&text(ML - 6.0, MT + 10.0, "end", format!("{y1:.6}")));
    svg.push_str(&text(
        (ML + W - MR) / 2.0,
        H - 12.0,
        "middle",
        data.x_label.clone(),
    ));
    svg.push_str(&text(ML + 4.0, MT + 10.0, "start", data.y_label.clone()));
    svg.push_str("</svg>\n");
    svg
}
