//! Result files: JSON documents, fixed-precision CSV tables and polyline SVG plots.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{Config, SCHEMA_VERSION};
use crate::error::CliError;

/// Directory receiving one command's files: `dir` itself with `--overwrite`,
/// otherwise a fresh `<command>-<timestamp>` subdirectory.
pub fn run_dir(dir: &Path, command: &str, overwrite: bool) -> Result<PathBuf, CliError> {
    if overwrite {
        fs::create_dir_all(dir)?;
        return Ok(dir.to_path_buf());
    }
    fs::create_dir_all(dir)?;
    let stamp = chrono::Local::now().format("%Y%m%dT%H%M%S");
    let base = format!("{command}-{stamp}");
    for attempt in 0u32.. {
        let name = if attempt == 0 {
            base.clone()
        } else {
            format!("{base}-{attempt}")
        };
        let path = dir.join(name);
        match fs::create_dir(&path) {
            Ok(()) => return Ok(path),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(e.into()),
        }
    }
    unreachable!()
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema_version: u32,
    command: &'a str,
    config: &'a Config,
    #[serde(flatten)]
    body: &'a T,
}

/// Writes `body` wrapped with the schema version and the resolved config.
pub fn write_json<T: Serialize>(
    path: &Path,
    command: &str,
    config: &Config,
    body: &T,
) -> Result<(), CliError> {
    let env = Envelope {
        schema_version: SCHEMA_VERSION,
        command,
        config,
        body,
    };
    let mut text =
        serde_json::to_string_pretty(&env).map_err(|e| CliError::Validation(e.to_string()))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Scientific notation with 17 significant digits, exact on round trip.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_csv(path: &Path, header: &[&str], columns: &[&[f64]]) -> Result<(), CliError> {
    let rows = columns.first().map_or(0, |c| c.len());
    assert!(
        columns.iter().all(|c| c.len() == rows),
        "ragged CSV columns"
    );
    let mut out = header.join(",");
    out.push('\n');
    for r in 0..rows {
        let line: Vec<String> = columns.iter().map(|c| fmt_float(c[r])).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub struct Series<'a> {
    pub label: &'a str,
    pub y: &'a [f64],
    pub dashed: bool,
}

const W: f64 = 640.0;
const H: f64 = 400.0;
const MARGIN: f64 = 60.0;

/// Line plot with one polyline per series over a shared x axis.
pub fn write_svg(
    path: &Path,
    title: &str,
    x_label: &str,
    x: &[f64],
    series: &[Series],
) -> Result<(), CliError> {
    fs::write(path, render_svg(title, x_label, x, series))?;
    Ok(())
}

fn extent(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
            (a.min(v), b.max(v))
        });
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo <= 0.0 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

pub fn render_svg(title: &str, x_label: &str, x: &[f64], series: &[Series]) -> String {
    let (x0, x1) = extent(x.iter().copied());
    let (y0, y1) = extent(series.iter().flat_map(|s| s.y.iter().copied()));
    let px = |v: f64| MARGIN + (v - x0) / (x1 - x0) * (W - 2.0 * MARGIN);
    let py = |v: f64| H - MARGIN - (v - y0) / (y1 - y0) * (H - 2.0 * MARGIN);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="16">{}</text>"#,
        W / 2.0,
        escape(title)
    );
    let (l, r, t, b) = (MARGIN, W - MARGIN, MARGIN, H - MARGIN);
    let _ = writeln!(
        s,
        r#"<path d="M{l} {t} L{l} {b} L{r} {b}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="13">{}</text>"#,
        W / 2.0,
        H - 18.0,
        escape(x_label)
    );
    for (v, anchor, xpos) in [(x0, "start", l), (x1, "end", r)] {
        let _ = writeln!(
            s,
            r#"<text x="{xpos}" y="{}" text-anchor="{anchor}" font-size="11">{}</text>"#,
            b + 16.0,
            tick(v)
        );
    }
    for (v, ypos) in [(y0, b), (y1, t)] {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end" font-size="11">{}</text>"#,
            l - 6.0,
            ypos + 4.0,
            tick(v)
        );
    }
    let colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];
    for (k, ser) in series.iter().enumerate() {
        let pts: Vec<String> = x
            .iter()
            .zip(ser.y)
            .filter(|(a, b)| a.is_finite() && b.is_finite())
            .map(|(&a, &b)| format!("{:.2},{:.2}", px(a), py(b)))
            .collect();
        let dash = if ser.dashed {
            r#" stroke-dasharray="6 4""#
        } else {
            ""
        };
        let color = colors[k % colors.len()];
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash} points="{}"/>"#,
            pts.join(" ")
        );
        let ly = t + 16.0 * k as f64;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{ly}" text-anchor="end" font-size="12" fill="{color}">{}</text>"#,
            r - 4.0,
            escape(ser.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn tick(v: f64) -> String {
    format!("{v:.3e}")
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}
