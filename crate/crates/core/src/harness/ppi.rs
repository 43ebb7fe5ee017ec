//! Plan-position-indicator output as SVG plus a CSV twin.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::geometry::AzimuthGrid;
use crate::harness::matching::DetectionReport;
use crate::recovery::{RangeGrid, SparseEstimate};
use crate::scene::Scene;

/// East/north position of a target at `range_m` and sine-of-DoA `sin_doa`.
pub fn east_north(range_m: f64, sin_doa: f64) -> (f64, f64) {
    let s = sin_doa.clamp(-1.0, 1.0);
    (range_m * s, range_m * (1.0 - s * s).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarkerClass {
    Truth,
    Hit,
    FalseAlarm,
}

impl MarkerClass {
    fn name(self) -> &'static str {
        match self {
            MarkerClass::Truth => "truth",
            MarkerClass::Hit => "hit",
            MarkerClass::FalseAlarm => "false_alarm",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PpiPoint {
    pub class: MarkerClass,
    pub index: usize,
    pub range_m: f64,
    pub sin_doa: f64,
    pub east_m: f64,
    pub north_m: f64,
}

/// Truth targets followed by estimates, each with its marker class.
pub fn ppi_points(
    report: &DetectionReport,
    truth: &Scene,
    est: &SparseEstimate,
    rgrid: &RangeGrid,
    agrid: &AzimuthGrid,
) -> Vec<PpiPoint> {
    let mut out = Vec::with_capacity(truth.len() + est.len());
    for (i, t) in truth.targets.iter().enumerate() {
        let (e, n) = east_north(t.range_m(), t.sin_doa);
        out.push(PpiPoint {
            class: MarkerClass::Truth,
            index: i,
            range_m: t.range_m(),
            sin_doa: t.sin_doa,
            east_m: e,
            north_m: n,
        });
    }
    for (i, &(rn, ap)) in est.support.iter().enumerate() {
        let range_m = rgrid.range_m(rn);
        let sin_doa = agrid.values[ap];
        let (e, n) = east_north(range_m, sin_doa);
        let class = if report.hits.iter().any(|&(_, ei)| ei == i) {
            MarkerClass::Hit
        } else {
            MarkerClass::FalseAlarm
        };
        out.push(PpiPoint {
            class,
            index: i,
            range_m,
            sin_doa,
            east_m: e,
            north_m: n,
        });
    }
    out
}

fn render_svg(points: &[PpiPoint]) -> String {
    const SIZE: f64 = 600.0;
    const MARGIN: f64 = 40.0;
    let extent = points
        .iter()
        .map(|p| p.east_m.abs().max(p.north_m.abs()))
        .fold(1.0, f64::max)
        * 1.1;
    let scale = (SIZE / 2.0 - MARGIN) / extent;
    let c = SIZE / 2.0;
    let to_px = |e: f64, n: f64| (c + e * scale, c - n * scale);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(
        svg,
        "<style>.truth{{fill:none;stroke:blue;stroke-width:2}} .hit{{fill:none;stroke:green;stroke-width:2}} .false_alarm{{fill:none;stroke:magenta;stroke-width:2}} .axis{{stroke:#999;stroke-width:1}}</style>"
    );
    let _ = writeln!(svg, r#"<line class="axis" x1="0" y1="{c}" x2="{SIZE}" y2="{c}"/>"#);
    let _ = writeln!(svg, r#"<line class="axis" x1="{c}" y1="0" x2="{c}" y2="{SIZE}"/>"#);
    // North marker.
    let _ = writeln!(svg, r#"<circle cx="{c}" cy="{}" r="5" fill="red"/>"#, MARGIN / 2.0);
    let _ = writeln!(
        svg,
        r#"<text x="{SIZE}" y="{SIZE}" text-anchor="end" font-size="10">extent {extent:.0} m</text>"#
    );
    for p in points {
        let (x, y) = to_px(p.east_m, p.north_m);
        let r = match p.class {
            MarkerClass::Truth => 8.0,
            _ => 5.0,
        };
        let _ = writeln!(
            svg,
            r#"<circle class="{}" cx="{x:.2}" cy="{y:.2}" r="{r}"/>"#,
            p.class.name()
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Writes `path` (SVG) and a CSV twin next to it; returns the CSV path.
pub fn emit_ppi(
    report: &DetectionReport,
    truth: &Scene,
    est: &SparseEstimate,
    rgrid: &RangeGrid,
    agrid: &AzimuthGrid,
    path: &Path,
) -> Result<PathBuf> {
    let points = ppi_points(report, truth, est, rgrid, agrid);
    fs::write(path, render_svg(&points)).map_err(|e| Error::io(path, e))?;

    let csv_path = path.with_extension("csv");
    let mut w = csv::Writer::from_path(&csv_path)
        .map_err(|e| Error::io(&csv_path, std::io::Error::other(e)))?;
    let io = |e: csv::Error| Error::io(&csv_path, std::io::Error::other(e));
    w.write_record(["class", "index", "range_m", "sin_doa", "east_m", "north_m"])
        .map_err(io)?;
    for p in &points {
        w.write_record([
            p.class.name().to_string(),
            p.index.to_string(),
            p.range_m.to_string(),
            p.sin_doa.to_string(),
            p.east_m.to_string(),
            p.north_m.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(&csv_path, e))?;
    Ok(csv_path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compass_points() {
        let (e, n) = east_north(1000.0, 0.0);
        assert!(e.abs() < 1e-12 && (n - 1000.0).abs() < 1e-9);
        let (e, n) = east_north(1000.0, 1.0 - 1e-12);
        assert!((e - 1000.0).abs() < 1e-6 && n < 1.0);
        let (e, _) = east_north(1000.0, -0.5);
        assert!(e < 0.0);
    }
}
