//! Minimal SVG line and histogram plots.

use std::fmt::Write as _;

use crate::spectrum::HistogramData;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN_LEFT: f64 = 80.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 60.0;
const COLORS: [&str; 4] = ["#1f4e9c", "#c0392b", "#2e8b57", "#8e44ad"];

#[derive(Debug, Clone)]
pub struct PlotSeries {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

impl PlotSeries {
    pub fn line(label: &str, points: Vec<(f64, f64)>) -> Self {
        Self {
            label: label.to_string(),
            points,
        }
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn new(x: (f64, f64), y: (f64, f64)) -> Self {
        let widen = |(lo, hi): (f64, f64)| {
            if !(lo.is_finite() && hi.is_finite()) {
                (0.0, 1.0)
            } else if hi > lo {
                (lo, hi)
            } else {
                (lo - 0.5, hi + 0.5)
            }
        };
        Self { x: widen(x), y: widen(y) }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN_LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN_BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)
    }
}

// 1-2-5 tick spacing giving roughly `target` ticks.
fn ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    let raw = (hi - lo) / target as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

fn fmt_tick(v: f64) -> String {
    let s = format!("{v:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".to_string() } else { s.to_string() }
}

fn open(out: &mut String, title: &str, x_label: &str, y_label: &str, frame: &Frame) {
    let _ = writeln!(
        out,
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">
<rect width="100%" height="100%" fill="white"/>
<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let (x0, x1) = (frame.px(frame.x.0), frame.px(frame.x.1));
    let (y0, y1) = (frame.py(frame.y.0), frame.py(frame.y.1));
    let _ = writeln!(out, r#"<rect x="{x0}" y="{y1}" width="{}" height="{}" fill="none" stroke="black"/>"#, x1 - x0, y0 - y1);
    for t in ticks(frame.x.0, frame.x.1, 8) {
        let px = frame.px(t);
        let _ = writeln!(
            out,
            r#"<line x1="{px:.2}" y1="{y0}" x2="{px:.2}" y2="{}" stroke="black"/><text x="{px:.2}" y="{}" text-anchor="middle">{}</text>"#,
            y0 + 5.0,
            y0 + 18.0,
            fmt_tick(t)
        );
    }
    for t in ticks(frame.y.0, frame.y.1, 6) {
        let py = frame.py(t);
        let _ = writeln!(
            out,
            r#"<line x1="{}" y1="{py:.2}" x2="{x0}" y2="{py:.2}" stroke="black"/><text x="{}" y="{:.2}" text-anchor="end">{}</text>"#,
            x0 - 5.0,
            x0 - 8.0,
            py + 4.0,
            fmt_tick(t)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>
<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">{}</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 15.0,
        escape(x_label),
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(y_label)
    );
}

fn polyline(out: &mut String, frame: &Frame, series: &PlotSeries, color: &str) {
    let pts: Vec<String> = series
        .points
        .iter()
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .map(|&(x, y)| format!("{:.2},{:.2}", frame.px(x), frame.py(y)))
        .collect();
    let _ = writeln!(
        out,
        r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"><title>{}</title></polyline>"#,
        pts.join(" "),
        escape(&series.label)
    );
}

fn legend(out: &mut String, labels: &[(&str, &str)]) {
    for (i, (label, color)) in labels.iter().enumerate() {
        let y = MARGIN_TOP + 15.0 + 16.0 * i as f64;
        let x = WIDTH - MARGIN_RIGHT - 120.0;
        let _ = writeln!(
            out,
            r#"<line x1="{x}" y1="{y}" x2="{}" y2="{y}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            x + 20.0,
            x + 26.0,
            y + 4.0,
            escape(label)
        );
    }
}

fn bounds<'a>(points: impl Iterator<Item = &'a (f64, f64)>) -> ((f64, f64), (f64, f64)) {
    let mut xb = (f64::INFINITY, f64::NEG_INFINITY);
    let mut yb = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in points.filter(|(x, y)| x.is_finite() && y.is_finite()) {
        xb = (xb.0.min(x), xb.1.max(x));
        yb = (yb.0.min(y), yb.1.max(y));
    }
    (xb, yb)
}

pub fn line_plot(title: &str, x_label: &str, y_label: &str, series: &[PlotSeries]) -> String {
    let (xb, yb) = bounds(series.iter().flat_map(|s| s.points.iter()));
    let pad = 0.05 * (yb.1 - yb.0).abs().max(1e-12);
    let frame = Frame::new(xb, (yb.0.min(0.0), yb.1 + pad));
    let mut out = String::new();
    open(&mut out, title, x_label, y_label, &frame);
    for (i, s) in series.iter().enumerate() {
        polyline(&mut out, &frame, s, COLORS[i % COLORS.len()]);
    }
    if series.len() > 1 {
        let labels: Vec<(&str, &str)> = series.iter().enumerate().map(|(i, s)| (s.label.as_str(), COLORS[i % COLORS.len()])).collect();
        legend(&mut out, &labels);
    }
    out.push_str("</svg>\n");
    out
}

pub fn histogram_plot(title: &str, x_label: &str, y_label: &str, h: &HistogramData, overlays: &[PlotSeries]) -> String {
    let x = (h.bin_edges[0], *h.bin_edges.last().unwrap_or(&1.0));
    let max_count = h.counts.iter().copied().max().unwrap_or(0) as f64;
    let (_, yb) = bounds(overlays.iter().flat_map(|s| s.points.iter()));
    let top = max_count.max(if yb.1.is_finite() { yb.1 } else { 0.0 });
    let frame = Frame::new(x, (0.0, top * 1.05 + f64::from(u8::from(top == 0.0))));
    let mut out = String::new();
    open(&mut out, title, x_label, y_label, &frame);
    for (w, &c) in h.bin_edges.windows(2).zip(&h.counts) {
        if c == 0 {
            continue;
        }
        let (x0, x1) = (frame.px(w[0]), frame.px(w[1]));
        let (y0, y1) = (frame.py(0.0), frame.py(c as f64));
        let _ = writeln!(
            out,
            r##"<rect x="{x0:.2}" y="{y1:.2}" width="{:.2}" height="{:.2}" fill="#9db4d8" stroke="#1f4e9c" stroke-width="0.5"/>"##,
            x1 - x0,
            y0 - y1
        );
    }
    for (i, s) in overlays.iter().enumerate() {
        polyline(&mut out, &frame, s, COLORS[(i + 1) % COLORS.len()]);
    }
    out.push_str("</svg>\n");
    out
}
