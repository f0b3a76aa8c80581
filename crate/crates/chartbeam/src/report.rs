// SPDX-License-Identifier: Apache-2.0

//! Report artifacts: CDF and correlation-map CSV/SVG, and a TOML summary.
//!
//! Numbers are written with Rust's shortest round-trip formatting so the
//! files are byte-stable across runs.

use std::fmt::Write as _;
use std::path::Path;

use chartbeam_core::metrics::CDF_POINTS;

use crate::error::{PipelineError, Result};

/// Low end of the correlation color ramp (eta = 0).
pub const RAMP_LOW: [u8; 3] = [20, 40, 160];
/// High end of the correlation color ramp (eta = 1).
pub const RAMP_HIGH: [u8; 3] = [240, 200, 20];

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"];
const SIZE: f64 = 480.0;
const MARGIN: f64 = 40.0;

/// Linear interpolation between [`RAMP_LOW`] and [`RAMP_HIGH`], with `t`
/// clamped to `[0, 1]`.
pub fn ramp_color(t: f64) -> [u8; 3] {
    let t = if t.is_nan() { 0.0 } else { t.clamp(0.0, 1.0) };
    let mut c = [0u8; 3];
    for k in 0..3 {
        let (lo, hi) = (RAMP_LOW[k] as f64, RAMP_HIGH[k] as f64);
        c[k] = (lo + t * (hi - lo)).round() as u8;
    }
    c
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> PipelineError + '_ {
    move |e| PipelineError::Report(format!("{}: {e}", path.display()))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(PipelineError::io(path))
}

pub fn write_cdf_csv(path: &Path, cdf: &[(f64, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(["threshold", "cdf"]).map_err(csv_err(path))?;
    for (t, f) in cdf {
        w.write_record([t.to_string(), f.to_string()]).map_err(csv_err(path))?;
    }
    w.flush().map_err(PipelineError::io(path))
}

pub fn read_cdf_csv(path: &Path) -> Result<Vec<(f64, f64)>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    r.deserialize().map(|row| row.map_err(csv_err(path))).collect()
}

/// Post-write check of a CDF file: 101 rows, thresholds rising from 0 to 1,
/// values in [0, 1], non-decreasing, ending at 1.
pub fn check_cdf_csv(path: &Path) -> Result<()> {
    let rows = read_cdf_csv(path)?;
    let fail = |what: &str| Err(PipelineError::Report(format!("{}: {what}", path.display())));
    if rows.len() != CDF_POINTS {
        return fail("wrong number of rows");
    }
    if rows[0].0 != 0.0 || rows[CDF_POINTS - 1].0 != 1.0 || rows[CDF_POINTS - 1].1 != 1.0 {
        return fail("CDF must span thresholds 0..1 and end at 1");
    }
    for w in rows.windows(2) {
        if !(w[1].0 > w[0].0) || w[1].1 < w[0].1 {
            return fail("CDF not monotone");
        }
    }
    if rows.iter().any(|r| !(0.0..=1.0).contains(&r.1)) {
        return fail("CDF value outside [0, 1]");
    }
    Ok(())
}

/// `(x, y, eta)` rows.
pub fn write_map_csv(path: &Path, positions: &[[f64; 2]], values: &[f64]) -> Result<()> {
    if positions.len() != values.len() {
        return Err(PipelineError::Report("map positions and values differ in length".into()));
    }
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(["x", "y", "eta"]).map_err(csv_err(path))?;
    for (p, v) in positions.iter().zip(values) {
        w.write_record([p[0].to_string(), p[1].to_string(), v.to_string()]).map_err(csv_err(path))?;
    }
    w.flush().map_err(PipelineError::io(path))
}

pub fn read_map_csv(path: &Path) -> Result<Vec<(f64, f64, f64)>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    r.deserialize().map(|row| row.map_err(csv_err(path))).collect()
}

fn svg_open(title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{w}" viewBox="0 0 {w} {w}" font-family="sans-serif" font-size="12">"#,
        w = SIZE
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle">{}</text>"#, SIZE / 2.0, escape(title));
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Plot-area mapping of `v` in `[lo, hi]` to pixels.
fn scale(v: f64, lo: f64, hi: f64) -> f64 {
    let span = if hi > lo { hi - lo } else { 1.0 };
    MARGIN + (v - lo) / span * (SIZE - 2.0 * MARGIN)
}

/// Step plot of several CDFs on one axis pair.
pub fn write_cdf_svg(path: &Path, title: &str, series: &[(&str, &[(f64, f64)])]) -> Result<()> {
    let mut s = svg_open(title);
    let bottom = SIZE - MARGIN;
    let _ = writeln!(
        s,
        r#"<rect x="{m}" y="{m}" width="{w}" height="{w}" fill="none" stroke="black"/>"#,
        m = MARGIN,
        w = SIZE - 2.0 * MARGIN
    );
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">correlation</text>"#, SIZE / 2.0, SIZE - 10.0);
    let _ = writeln!(s, r#"<text x="12" y="{}" transform="rotate(-90 12 {})" text-anchor="middle">CDF</text>"#, SIZE / 2.0, SIZE / 2.0);
    for (k, (name, cdf)) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let mut points = String::new();
        let mut prev: Option<f64> = None;
        for (t, f) in cdf.iter() {
            let (x, y) = (scale(*t, 0.0, 1.0), bottom - (scale(*f, 0.0, 1.0) - MARGIN));
            if let Some(py) = prev {
                let _ = write!(points, "{x:.2},{py:.2} ");
            }
            let _ = write!(points, "{x:.2},{y:.2} ");
            prev = Some(y);
        }
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, points.trim_end());
        let ly = MARGIN + 16.0 + 16.0 * k as f64;
        let _ = writeln!(s, r#"<text x="{}" y="{ly}" fill="{color}">{}</text>"#, MARGIN + 8.0, escape(name));
    }
    s.push_str("</svg>\n");
    write_text(path, &s)
}

/// Scatter plot with one circle per sample, colored by [`ramp_color`].
pub fn write_map_svg(path: &Path, title: &str, positions: &[[f64; 2]], values: &[f64]) -> Result<()> {
    if positions.len() != values.len() {
        return Err(PipelineError::Report("map positions and values differ in length".into()));
    }
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in positions {
        x0 = x0.min(p[0]);
        x1 = x1.max(p[0]);
        y0 = y0.min(p[1]);
        y1 = y1.max(p[1]);
    }
    // same scale on both axes
    let span = (x1 - x0).max(y1 - y0);
    let mut s = svg_open(title);
    for (p, v) in positions.iter().zip(values) {
        let [r, g, b] = ramp_color(*v);
        let x = scale(p[0], x0, x0 + span);
        let y = SIZE - scale(p[1], y0, y0 + span);
        let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="3" fill="rgb({r},{g},{b})"/>"#);
    }
    s.push_str("</svg>\n");
    write_text(path, &s)
}

pub fn write_toml<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = toml::to_string(value).map_err(|e| PipelineError::Report(e.to_string()))?;
    write_text(path, &text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chartbeam_core::metrics::correlation_cdf;

    #[test]
    fn ramp_midpoint_is_exact() {
        assert_eq!(ramp_color(0.0), RAMP_LOW);
        assert_eq!(ramp_color(1.0), RAMP_HIGH);
        assert_eq!(ramp_color(0.5), [130, 120, 90]);
        assert_eq!(ramp_color(2.0), RAMP_HIGH);
    }

    #[test]
    fn map_round_trip_and_marks() {
        let dir = tempfile::tempdir().unwrap();
        let pos = [[1.5, -2.25], [0.1, 1e-9], [-30.000001, 7.0]];
        let vals = [0.0, 0.123456789012345, 1.0];
        let csv = dir.path().join("m.csv");
        write_map_csv(&csv, &pos, &vals).unwrap();
        let back = read_map_csv(&csv).unwrap();
        for ((p, v), r) in pos.iter().zip(vals).zip(back) {
            assert_eq!((p[0], p[1], v), r);
        }
        let svg = dir.path().join("m.svg");
        write_map_svg(&svg, "map", &pos, &vals).unwrap();
        let text = std::fs::read_to_string(&svg).unwrap();
        assert_eq!(text.matches("<circle").count(), 3);
    }

    #[test]
    fn cdf_lint() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.csv");
        write_cdf_csv(&p, &correlation_cdf(&[0.2, 0.9, 0.5]).unwrap()).unwrap();
        check_cdf_csv(&p).unwrap();
        let mut bad = correlation_cdf(&[0.2]).unwrap();
        bad[50].1 = 0.0;
        write_cdf_csv(&p, &bad).unwrap();
        assert!(check_cdf_csv(&p).is_err());
        write_cdf_csv(&p, &bad[..10]).unwrap();
        assert!(check_cdf_csv(&p).is_err());
        let svg = dir.path().join("c.svg");
        let cdf = correlation_cdf(&[0.2, 0.9]).unwrap();
        write_cdf_svg(&svg, "cdf", &[("a", &cdf), ("b", &cdf)]).unwrap();
        assert_eq!(std::fs::read_to_string(&svg).unwrap().matches("<polyline").count(), 2);
    }
}
