//! CSV / JSON / SVG output of a metric series.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::metrics::MetricsSeries;
use crate::error::{Error, Result};
use crate::trackers::Algorithm;

pub const CSV_HEADER: &str = "t,algorithm,nmse,extras,misses,violations,nonconverged";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

fn cell(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// One row per (frame, algorithm), frames outermost; missing values are
/// empty cells. `f64` is printed in its shortest round-trip form.
pub fn to_csv(series: &MetricsSeries) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for t in 0..series.frames {
        for s in &series.algorithms {
            let _ = writeln!(
                out,
                "{t},{},{},{},{},{},{}",
                s.algorithm.name(),
                cell(s.nmse[t]),
                cell(s.extras[t]),
                cell(s.misses[t]),
                s.violations[t],
                s.nonconverged[t]
            );
        }
    }
    out
}

pub fn to_json(series: &MetricsSeries) -> String {
    serde_json::to_string_pretty(series).expect("metric series serializes")
}

#[derive(Clone, Debug, PartialEq)]
pub struct CsvRow {
    pub t: usize,
    pub algorithm: Algorithm,
    pub nmse: Option<f64>,
    pub extras: Option<f64>,
    pub misses: Option<f64>,
    pub violations: u64,
    pub nonconverged: u64,
}

/// Reads back what [`to_csv`] writes.
pub fn parse_csv(text: &str) -> Result<Vec<CsvRow>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == CSV_HEADER => {}
        _ => return Err(Error::Parse { line: 1, msg: format!("expected header '{CSV_HEADER}'") }),
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        let line_no = i + 1;
        let err = |msg: String| Error::Parse { line: line_no, msg };
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 7 {
            return Err(err(format!("expected 7 fields, got {}", f.len())));
        }
        let opt = |s: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|e| err(format!("bad number '{s}': {e}")))
            }
        };
        rows.push(CsvRow {
            t: f[0].parse().map_err(|e| err(format!("bad t: {e}")))?,
            algorithm: Algorithm::parse(f[1]).map_err(|e| err(e.to_string()))?,
            nmse: opt(f[2])?,
            extras: opt(f[3])?,
            misses: opt(f[4])?,
            violations: f[5].parse().map_err(|e| err(format!("bad count: {e}")))?,
            nonconverged: f[6].parse().map_err(|e| err(format!("bad count: {e}")))?,
        });
    }
    Ok(rows)
}

const COLORS: [&str; 3] = ["#1f77b4", "#d62728", "#2ca02c"];

/// Three stacked line charts (NMSE, extras, misses against t).
pub fn to_svg(series: &MetricsSeries) -> String {
    let (w, h, pad) = (640.0, 200.0, 40.0);
    let panels: [(&str, fn(&super::AlgorithmSeries) -> &Vec<Option<f64>>); 3] =
        [("NMSE", |s| &s.nmse), ("normalized extras", |s| &s.extras), ("normalized misses", |s| &s.misses)];
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{}\" font-family=\"sans-serif\" font-size=\"11\">\n",
        3.0 * h
    );
    let tmax = series.frames.saturating_sub(1).max(1) as f64;
    for (p, (title, get)) in panels.iter().enumerate() {
        let y0 = p as f64 * h;
        let top = series.algorithms.iter().flat_map(|s| get(s).iter().flatten()).fold(0.0f64, |a, &b| a.max(b));
        let top = if top > 0.0 { top } else { 1.0 };
        let _ = writeln!(out, "<text x=\"{pad}\" y=\"{}\">{title} (max {top:.4})</text>", y0 + 14.0);
        let _ = writeln!(
            out,
            "<rect x=\"{pad}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#999\"/>",
            y0 + 20.0,
            w - 2.0 * pad,
            h - 40.0
        );
        for (k, s) in series.algorithms.iter().enumerate() {
            let pts: Vec<String> = get(s)
                .iter()
                .enumerate()
                .filter_map(|(t, v)| {
                    v.map(|v| {
                        let x = pad + (w - 2.0 * pad) * t as f64 / tmax;
                        let y = y0 + h - 20.0 - (h - 40.0) * v / top;
                        format!("{x:.1},{y:.1}")
                    })
                })
                .collect();
            let color = COLORS[k % COLORS.len()];
            let _ = writeln!(out, "<polyline fill=\"none\" stroke=\"{color}\" points=\"{}\"/>", pts.join(" "));
            if p == 0 {
                let _ = writeln!(out, "<text x=\"{}\" y=\"{}\" fill=\"{color}\">{}</text>", w - 2.0 * pad - 60.0, y0 + 34.0 + 12.0 * k as f64, s.algorithm.name());
            }
        }
    }
    out.push_str("</svg>\n");
    out
}

/// Writes the series to `path` in the given format.
pub fn export(series: &MetricsSeries, path: &Path, format: Format) -> Result<()> {
    if series.algorithms.is_empty() || series.frames == 0 {
        return Err(Error::Input("nothing to export".into()));
    }
    let text = match format {
        Format::Csv => to_csv(series),
        Format::Json => to_json(series),
    };
    std::fs::write(path, text)?;
    Ok(())
}
