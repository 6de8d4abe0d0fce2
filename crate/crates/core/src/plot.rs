//! Static SVG line plots of trajectories in the x–z plane.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::ins::Vector3;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 360.0;
const MARGIN: f64 = 56.0;
const COLORS: [&str; 6] = ["#000000", "#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e"];

pub struct Series<'a> {
    pub label: &'a str,
    pub points: &'a [Vector3],
}

fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + 1e-12 * step {
        out.push(t);
        t += step;
    }
    out
}

/// Renders horizontal position `x` against `z`, one polyline per series.
pub fn xz_svg(title: &str, series: &[Series<'_>]) -> Result<String> {
    let all: Vec<&Vector3> = series.iter().flat_map(|s| s.points).collect();
    if all.is_empty() {
        return Err(Error::invalid("nothing to plot"));
    }
    if all.iter().any(|p| !p.x.is_finite() || !p.z.is_finite()) {
        return Err(Error::NonFinite("plot coordinates".into()));
    }
    let bounds = |f: fn(&Vector3) -> f64| {
        let lo = all.iter().map(|p| f(p)).fold(f64::INFINITY, f64::min);
        let hi = all.iter().map(|p| f(p)).fold(f64::NEG_INFINITY, f64::max);
        let pad = ((hi - lo) * 0.05).max(1e-3);
        (lo - pad, hi + pad)
    };
    let (x0, x1) = bounds(|p| p.x);
    let (z0, z1) = bounds(|p| p.z);
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let sz = |z: f64| HEIGHT - MARGIN - (z - z0) / (z1 - z0) * (HEIGHT - 2.0 * MARGIN);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, WIDTH / 2.0, escape(title));
    let (l, r, t, b) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(svg, r##"<rect x="{l}" y="{t}" width="{}" height="{}" fill="none" stroke="#888"/>"##, r - l, b - t);
    for x in ticks(x0, x1) {
        let px = sx(x);
        let _ = writeln!(svg, r##"<line x1="{px:.2}" y1="{b}" x2="{px:.2}" y2="{}" stroke="#888"/>"##, b + 4.0);
        let _ = writeln!(svg, r#"<text x="{px:.2}" y="{}" text-anchor="middle">{}</text>"#, b + 16.0, fmt_tick(x));
    }
    for z in ticks(z0, z1) {
        let pz = sz(z);
        let _ = writeln!(svg, r##"<line x1="{}" y1="{pz:.2}" x2="{l}" y2="{pz:.2}" stroke="#888"/>"##, l - 4.0);
        let _ = writeln!(svg, r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, l - 6.0, pz + 4.0, fmt_tick(z));
    }
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">x [m]</text>"#, WIDTH / 2.0, HEIGHT - 12.0);
    let _ = writeln!(
        svg,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">z [m]</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );
    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = s.points.iter().map(|p| format!("{:.2},{:.2}", sx(p.x), sz(p.z))).collect();
        let _ = writeln!(svg, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, pts.join(" "));
        let ly = t + 14.0 + 14.0 * i as f64;
        let _ = writeln!(svg, r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, r - 120.0, r - 100.0);
        let _ = writeln!(svg, r#"<text x="{}" y="{}">{}</text>"#, r - 95.0, ly + 4.0, escape(s.label));
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn write_xz_svg(path: &Path, title: &str, series: &[Series<'_>]) -> Result<()> {
    fs::write(path, xz_svg(title, series)?)?;
    Ok(())
}

fn fmt_tick(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_one_polyline_per_series() {
        let a = [Vector3::new(0.0, 0.0, 0.7), Vector3::new(1.0, 0.0, 0.8)];
        let b = [Vector3::new(0.0, 0.0, 0.7), Vector3::new(1.1, 0.0, 0.75)];
        let svg = xz_svg("t <1>", &[Series { label: "gt", points: &a }, Series { label: "pred", points: &b }]).unwrap();
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("t &lt;1&gt;"));
        assert!(svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn rejects_empty_and_non_finite() {
        assert!(xz_svg("", &[]).is_err());
        let bad = [Vector3::new(f64::NAN, 0.0, 0.0)];
        assert!(xz_svg("", &[Series { label: "x", points: &bad }]).is_err());
    }

    #[test]
    fn tick_spacing_is_round() {
        let labels: Vec<String> = ticks(0.0, 1.0).into_iter().map(fmt_tick).collect();
        assert_eq!(labels, ["0", "0.2", "0.4", "0.6", "0.8", "1"]);
        assert_eq!(ticks(-0.05, 0.32).len(), 4);
    }
}
