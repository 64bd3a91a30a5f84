//! Minimal deterministic SVG line plots.
//!
//! Output depends only on the input numbers: coordinates are printed with
//! fixed precision and nothing (dates, ids) varies between runs.

use std::fmt::Write as _;
use std::path::Path;

use crate::analysis::Curve;
use crate::error::{Error, Result};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 450.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;
/// Polylines longer than this are thinned with a fixed stride.
const MAX_POINTS: usize = 2000;

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

#[derive(Debug, Clone, PartialEq)]
pub struct LineStyle {
    pub color: String,
    pub dashed: bool,
    pub width: f64,
}

impl LineStyle {
    pub fn solid(color: &str) -> Self {
        Self {
            color: color.into(),
            dashed: false,
            width: 1.5,
        }
    }

    pub fn dashed(color: &str) -> Self {
        Self {
            dashed: true,
            ..Self::solid(color)
        }
    }

    /// The i-th palette colour, solid.
    pub fn nth(i: usize) -> Self {
        Self::solid(PALETTE[i % PALETTE.len()])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotSeries {
    pub label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub style: LineStyle,
}

impl PlotSeries {
    pub fn new(label: impl Into<String>, x: Vec<f64>, y: Vec<f64>, style: LineStyle) -> Self {
        Self {
            label: label.into(),
            x,
            y,
            style,
        }
    }

    pub fn from_curve(label: impl Into<String>, curve: &Curve, style: LineStyle) -> Self {
        Self::new(label, curve.t.clone(), curve.y.clone(), style)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FigureSpec {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<PlotSeries>,
    /// Fixed y range; derived from the data when `None`.
    pub y_range: Option<(f64, f64)>,
}

impl FigureSpec {
    pub fn new(title: impl Into<String>, x_label: impl Into<String>, y_label: impl Into<String>) -> Self {
        Self {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            ..Self::default()
        }
    }

    pub fn with(mut self, series: PlotSeries) -> Self {
        self.series.push(series);
        self
    }

    pub fn y_range(mut self, lo: f64, hi: f64) -> Self {
        self.y_range = Some((lo, hi));
        self
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Tick positions on a 1-2-5 ladder, about five per axis.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

fn tick_label(v: f64) -> String {
    let s = format!("{:.4}", v);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if hi > lo {
        (lo, hi)
    } else {
        let pad = if lo == 0.0 { 1.0 } else { 0.1 * lo.abs() };
        (lo - pad, hi + pad)
    }
}

/// Renders `spec` to an SVG document.
pub fn render_svg(spec: &FigureSpec) -> Result<String> {
    if spec.series.is_empty() {
        return Err(Error::EmptySeries("figure has no series".into()));
    }
    for s in &spec.series {
        if s.x.is_empty() || s.x.len() != s.y.len() {
            return Err(Error::EmptySeries(format!(
                "series `{}` is empty or has mismatched lengths",
                s.label
            )));
        }
        if s.x.iter().chain(&s.y).any(|v| !v.is_finite()) {
            return Err(Error::Analysis(format!("series `{}` contains non-finite values", s.label)));
        }
    }
    let all_x = spec.series.iter().flat_map(|s| s.x.iter().copied());
    let (x0, x1) = all_x.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let (y0, y1) = spec.y_range.unwrap_or_else(|| {
        let all_y = spec.series.iter().flat_map(|s| s.y.iter().copied());
        let (a, b) = all_y.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        let pad = 0.05 * (b - a);
        (a - pad, b + pad)
    });
    let (x0, x1) = padded(x0, x1);
    let (y0, y1) = padded(y0, y1);
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + (y1 - y) / (y1 - y0) * ph;

    let mut o = String::new();
    let _ = writeln!(
        o,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(o, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        o,
        r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(&spec.title)
    );
    let _ = writeln!(
        o,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for t in ticks(x0, x1) {
        let x = sx(t);
        let _ = writeln!(
            o,
            r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            TOP + ph,
            TOP + ph + 5.0,
            TOP + ph + 18.0,
            tick_label(t)
        );
    }
    for t in ticks(y0, y1) {
        let y = sy(t);
        let _ = writeln!(
            o,
            r#"<line x1="{:.2}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 5.0,
            LEFT - 8.0,
            y + 4.0,
            tick_label(t)
        );
    }
    let _ = writeln!(
        o,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 12.0,
        escape(&spec.x_label)
    );
    let _ = writeln!(
        o,
        r#"<text x="18" y="{:.1}" text-anchor="middle" transform="rotate(-90 18 {:.1})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        escape(&spec.y_label)
    );
    let _ = writeln!(
        o,
        r#"<clipPath id="plot"><rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}"/></clipPath>"#
    );
    for s in &spec.series {
        let stride = s.x.len().div_ceil(MAX_POINTS).max(1);
        let mut pts = String::new();
        let mut idx: Vec<usize> = (0..s.x.len()).step_by(stride).collect();
        if idx.last() != Some(&(s.x.len() - 1)) {
            idx.push(s.x.len() - 1);
        }
        for (n, i) in idx.into_iter().enumerate() {
            if n > 0 {
                pts.push(' ');
            }
            let _ = write!(pts, "{:.2},{:.2}", sx(s.x[i]), sy(s.y[i]));
        }
        let dash = if s.style.dashed { r#" stroke-dasharray="6 4""# } else { "" };
        let _ = writeln!(
            o,
            r#"<polyline clip-path="url(#plot)" fill="none" stroke="{}" stroke-width="{}"{dash} points="{pts}"/>"#,
            s.style.color, s.style.width
        );
    }
    for (i, s) in spec.series.iter().enumerate() {
        let y = TOP + 14.0 + 16.0 * i as f64;
        let x = LEFT + pw - 170.0;
        let dash = if s.style.dashed { r#" stroke-dasharray="6 4""# } else { "" };
        let _ = writeln!(
            o,
            r#"<line x1="{x:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="{}" stroke-width="{}"{dash}/><text x="{:.1}" y="{:.1}">{}</text>"#,
            x + 24.0,
            s.style.color,
            s.style.width,
            x + 30.0,
            y + 4.0,
            escape(&s.label)
        );
    }
    o.push_str("</svg>\n");
    Ok(o)
}

pub fn write_svg(spec: &FigureSpec, path: &Path) -> Result<()> {
    std::fs::write(path, render_svg(spec)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(y: Vec<f64>) -> PlotSeries {
        let x = (0..y.len()).map(|i| i as f64).collect();
        PlotSeries::new("a", x, y, LineStyle::nth(0))
    }

    fn polylines(svg: &str) -> Vec<&str> {
        svg.lines().filter(|l| l.starts_with("<polyline")).collect()
    }

    #[test]
    fn empty_is_rejected() {
        assert!(render_svg(&FigureSpec::new("t", "x", "y")).is_err());
        let spec = FigureSpec::new("t", "x", "y").with(line(vec![]));
        assert!(render_svg(&spec).is_err());
        let spec = FigureSpec::new("t", "x", "y").with(line(vec![1.0, f64::NAN]));
        assert!(render_svg(&spec).is_err());
    }

    #[test]
    fn constant_series_is_horizontal() {
        let svg = render_svg(&FigureSpec::new("c", "t", "Sz").with(line(vec![1.0; 10]))).unwrap();
        let poly = polylines(&svg)[0];
        let pts = poly.split("points=\"").nth(1).unwrap().trim_end_matches("\"/>");
        let ys: Vec<&str> = pts.split(' ').map(|p| p.split(',').nth(1).unwrap()).collect();
        assert!(ys.iter().all(|y| *y == ys[0]));
    }

    #[test]
    fn identical_series_overlap() {
        let y: Vec<f64> = (0..50).map(|i| (i as f64 * 0.2).sin()).collect();
        let mut b = line(y.clone());
        b.style = LineStyle::dashed("black");
        let svg = render_svg(&FigureSpec::new("o", "t", "Sz").with(line(y)).with(b)).unwrap();
        let p = polylines(&svg);
        let pts = |s: &str| s.split("points=").nth(1).unwrap().to_string();
        assert_eq!(pts(p[0]), pts(p[1]));
        assert!(p[1].contains("stroke-dasharray"));
    }

    #[test]
    fn rendering_is_deterministic_and_thinned() {
        let y: Vec<f64> = (0..10_001).map(|i| (i as f64 * 1e-3).cos()).collect();
        let spec = FigureSpec::new("d", "t", "Sz").with(line(y)).y_range(-1.0, 1.0);
        let a = render_svg(&spec).unwrap();
        assert_eq!(a, render_svg(&spec).unwrap());
        let n = polylines(&a)[0].matches(',').count();
        assert!(n <= MAX_POINTS + 1, "{n}");
        assert!(a.contains("<text"));
    }

    #[test]
    fn tick_ladder() {
        assert_eq!(ticks(0.0, 10.0), vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0]);
        assert_eq!(tick_label(-0.0), "0");
        assert_eq!(tick_label(0.25), "0.25");
    }
}
