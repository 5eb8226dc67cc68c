use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::write_atomic;
use crate::error::{Error, Result};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 36.0;
const MARGIN_BOTTOM: f64 = 50.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesStyle {
    Line,
    Points,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub style: SeriesStyle,
}

impl Series {
    pub fn line(label: impl Into<String>, x: Vec<f64>, y: Vec<f64>) -> Self {
        Self { label: label.into(), x, y, style: SeriesStyle::Line }
    }

    pub fn points(label: impl Into<String>, x: Vec<f64>, y: Vec<f64>) -> Self {
        Self { label: label.into(), x, y, style: SeriesStyle::Points }
    }
}

/// One set of axes with any number of overlaid series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Panel {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn check(panel: &Panel) -> Result<()> {
    if panel.series.is_empty() {
        return Err(Error::Validation(format!("panel '{}' has no series", panel.title)));
    }
    for s in &panel.series {
        if s.x.is_empty() {
            return Err(Error::Validation(format!("series '{}' is empty", s.label)));
        }
        if s.x.len() != s.y.len() {
            return Err(Error::Validation(format!("series '{}' has mismatched x and y", s.label)));
        }
        if s.x.iter().chain(&s.y).any(|v| !v.is_finite()) {
            return Err(Error::Validation(format!("series '{}' has non-finite values", s.label)));
        }
    }
    Ok(())
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if hi > lo {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    } else {
        let half = if lo == 0.0 { 1.0 } else { 0.5 * lo.abs() };
        (lo - half, hi + half)
    }
}

/// Roughly five round tick positions covering [lo, hi].
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
    (first..=last).map(|k| k as f64 * step).collect()
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if (1e-3..1e4).contains(&a) {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.2e}")
    }
}

fn render_panel(out: &mut String, panel: &Panel, y0: f64) {
    let pw = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let ph = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let (x_lo, x_hi) = range(panel.series.iter().flat_map(|s| s.x.iter().copied()));
    let (y_lo, y_hi) = range(panel.series.iter().flat_map(|s| s.y.iter().copied()));
    let sx = |x: f64| MARGIN_LEFT + (x - x_lo) / (x_hi - x_lo) * pw;
    let sy = |y: f64| y0 + MARGIN_TOP + (y_hi - y) / (y_hi - y_lo) * ph;

    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        y0 + 22.0,
        escape(&panel.title)
    );
    let _ = writeln!(
        out,
        r#"<rect x="{MARGIN_LEFT:.2}" y="{:.2}" width="{pw:.2}" height="{ph:.2}" fill="none" stroke="black"/>"#,
        y0 + MARGIN_TOP
    );
    for t in ticks(x_lo, x_hi) {
        let x = sx(t);
        let yb = y0 + MARGIN_TOP + ph;
        let _ = writeln!(out, r#"<line x1="{x:.2}" y1="{yb:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/>"#, yb + 5.0);
        let _ = writeln!(
            out,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle" font-size="11">{}</text>"#,
            yb + 18.0,
            tick_label(t)
        );
    }
    for t in ticks(y_lo, y_hi) {
        let y = sy(t);
        let _ = writeln!(
            out,
            r#"<line x1="{:.2}" y1="{y:.2}" x2="{MARGIN_LEFT:.2}" y2="{y:.2}" stroke="black"/>"#,
            MARGIN_LEFT - 5.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end" font-size="11">{}</text>"#,
            MARGIN_LEFT - 8.0,
            y + 4.0,
            tick_label(t)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="13">{}</text>"#,
        MARGIN_LEFT + pw / 2.0,
        y0 + HEIGHT - 10.0,
        escape(&panel.x_label)
    );
    let (lx, ly) = (16.0, y0 + MARGIN_TOP + ph / 2.0);
    let _ = writeln!(
        out,
        r#"<text x="{lx:.2}" y="{ly:.2}" text-anchor="middle" font-size="13" transform="rotate(-90 {lx:.2} {ly:.2})">{}</text>"#,
        escape(&panel.y_label)
    );

    for (i, s) in panel.series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        match s.style {
            SeriesStyle::Line => {
                let pts: Vec<String> = s.x.iter().zip(&s.y).map(|(&x, &y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
                let _ = writeln!(
                    out,
                    r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                    pts.join(" ")
                );
            }
            SeriesStyle::Points => {
                for (&x, &y) in s.x.iter().zip(&s.y) {
                    let _ = writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, sx(x), sy(y));
                }
            }
        }
    }
    if panel.series.len() > 1 {
        for (i, s) in panel.series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let x = WIDTH - MARGIN_RIGHT - 150.0;
            let y = y0 + MARGIN_TOP + 16.0 + 16.0 * i as f64;
            let _ = writeln!(
                out,
                r#"<rect x="{:.2}" y="{:.2}" width="12" height="4" fill="{color}"/>"#,
                x,
                y - 6.0
            );
            let _ = writeln!(
                out,
                r#"<text x="{:.2}" y="{y:.2}" font-size="11">{}</text>"#,
                x + 18.0,
                escape(&s.label)
            );
        }
    }
}

/// Renders stacked panels into one SVG document. The output depends only on
/// the input, so repeated renders are byte-identical.
pub fn render_svg(panels: &[Panel]) -> Result<String> {
    if panels.is_empty() {
        return Err(Error::Validation("nothing to plot".into()));
    }
    panels.iter().try_for_each(check)?;
    let total = HEIGHT * panels.len() as f64;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{total}" viewBox="0 0 {WIDTH} {total}" font-family="sans-serif">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (i, p) in panels.iter().enumerate() {
        render_panel(&mut out, p, HEIGHT * i as f64);
    }
    out.push_str("</svg>\n");
    Ok(out)
}

pub fn emit_plot(panels: &[Panel], path: &Path) -> Result<()> {
    write_atomic(path, render_svg(panels)?.as_bytes())
}
