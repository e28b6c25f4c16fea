//! Hand-emitted SVG figures: the mode-colored layout scatter and the
//! dual-axis sweep line charts.
//!
//! Plots are static documents, so they are assembled as plain SVG text with
//! no plotting dependency. Output is deterministic: the same inputs produce
//! byte-identical files.

use crate::math::Matrix;
use crate::perturb::SweepResult;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];
const NOISE_COLOR: &str = "#c8c8c8";

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn fmt(v: f64) -> String {
    // fixed notation keeps coordinates compact and deterministic
    let s = format!("{v:.2}");
    if s == "-0.00" { "0.00".into() } else { s }
}

/// Tick label: short, trailing zeros trimmed.
fn tick_label(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() || s == "-" { "0".into() } else { s.to_string() }
}

struct Axis {
    lo: f64,
    hi: f64,
    px_lo: f64,
    px_hi: f64,
}

impl Axis {
    fn new(lo: f64, hi: f64, px_lo: f64, px_hi: f64) -> Self {
        let (lo, hi) = if (hi - lo).abs() < 1e-12 { (lo - 0.5, hi + 0.5) } else { (lo, hi) };
        Axis { lo, hi, px_lo, px_hi }
    }

    fn px(&self, v: f64) -> f64 {
        self.px_lo + (v - self.lo) / (self.hi - self.lo) * (self.px_hi - self.px_lo)
    }

    fn ticks(&self, n: usize) -> Vec<f64> {
        (0..=n).map(|i| self.lo + (self.hi - self.lo) * i as f64 / n as f64).collect()
    }
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        (0.0, 1.0)
    } else {
        let pad = 0.05 * (hi - lo).max(1e-9);
        (lo - pad, hi + pad)
    }
}

/// Scatter of 2-D (or first-two-dimensions) layout points colored by mode
/// label, noise in gray, centroids drawn as ringed crosses, with a legend of
/// mode populations.
pub fn layout_scatter(points: &Matrix, labels: &[i64], centroids: Option<&Matrix>, title: &str) -> String {
    assert_eq!(points.rows, labels.len(), "one label per point");
    let (w, h) = (760.0, 520.0);
    let (ml, mr, mt, mb) = (60.0, 150.0, 44.0, 50.0);
    let get = |r: usize, c: usize| if c < points.cols { points.row(r)[c] } else { 0.0 };
    let (x_lo, x_hi) = bounds((0..points.rows).map(|r| get(r, 0)));
    let (y_lo, y_hi) = bounds((0..points.rows).map(|r| get(r, 1)));
    let xa = Axis::new(x_lo, x_hi, ml, w - mr);
    let ya = Axis::new(y_lo, y_hi, h - mb, mt); // y grows upward

    let mut s = String::new();
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\">\n"
    ));
    s.push_str(&format!("<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n"));
    s.push_str(&format!(
        "<text x=\"{}\" y=\"24\" font-size=\"15\" text-anchor=\"middle\">{}</text>\n",
        fmt((ml + w - mr) / 2.0),
        esc(title)
    ));
    // frame and ticks
    s.push_str(&format!(
        "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#444\"/>\n",
        fmt(ml),
        fmt(mt),
        fmt(w - ml - mr),
        fmt(h - mt - mb)
    ));
    for t in xa.ticks(5) {
        let x = fmt(xa.px(t));
        s.push_str(&format!(
            "<line x1=\"{x}\" y1=\"{}\" x2=\"{x}\" y2=\"{}\" stroke=\"#444\"/>\n",
            fmt(h - mb),
            fmt(h - mb + 4.0)
        ));
        s.push_str(&format!(
            "<text x=\"{x}\" y=\"{}\" font-size=\"11\" text-anchor=\"middle\">{}</text>\n",
            fmt(h - mb + 16.0),
            tick_label(t)
        ));
    }
    for t in ya.ticks(5) {
        let y = fmt(ya.px(t));
        s.push_str(&format!(
            "<line x1=\"{}\" y1=\"{y}\" x2=\"{}\" y2=\"{y}\" stroke=\"#444\"/>\n",
            fmt(ml - 4.0),
            fmt(ml)
        ));
        s.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"end\">{}</text>\n",
            fmt(ml - 7.0),
            fmt(ya.px(t) + 4.0),
            tick_label(t)
        ));
    }
    // points
    for r in 0..points.rows {
        let color = match labels[r] {
            l if l < 0 => NOISE_COLOR,
            l => PALETTE[l as usize % PALETTE.len()],
        };
        s.push_str(&format!(
            "<circle cx=\"{}\" cy=\"{}\" r=\"3\" fill=\"{color}\" fill-opacity=\"0.75\"/>\n",
            fmt(xa.px(get(r, 0))),
            fmt(ya.px(get(r, 1)))
        ));
    }
    // centroids
    if let Some(c) = centroids {
        for m in 0..c.rows {
            let cx = xa.px(c.row(m).first().copied().unwrap_or(0.0));
            let cy = ya.px(if c.cols > 1 { c.row(m)[1] } else { 0.0 });
            s.push_str(&format!(
                "<circle cx=\"{}\" cy=\"{}\" r=\"7\" fill=\"none\" stroke=\"black\" stroke-width=\"1.5\"/>\n",
                fmt(cx),
                fmt(cy)
            ));
            s.push_str(&format!(
                "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\" stroke-width=\"1.5\"/>\n",
                fmt(cx - 7.0),
                fmt(cy),
                fmt(cx + 7.0),
                fmt(cy)
            ));
            s.push_str(&format!(
                "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\" stroke-width=\"1.5\"/>\n",
                fmt(cx),
                fmt(cy - 7.0),
                fmt(cx),
                fmt(cy + 7.0)
            ));
        }
    }
    // legend: mode populations, noise last
    let mut counts = std::collections::BTreeMap::<i64, usize>::new();
    for &l in labels {
        *counts.entry(l).or_insert(0) += 1;
    }
    let lx = w - mr + 14.0;
    let mut ly = mt + 10.0;
    for (&l, &n) in counts.iter().filter(|(l, _)| **l >= 0) {
        let color = PALETTE[l as usize % PALETTE.len()];
        s.push_str(&format!(
            "<circle cx=\"{}\" cy=\"{}\" r=\"4\" fill=\"{color}\"/>\n",
            fmt(lx),
            fmt(ly)
        ));
        s.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"12\">mode {l} ({n})</text>\n",
            fmt(lx + 9.0),
            fmt(ly + 4.0)
        ));
        ly += 18.0;
    }
    if let Some(&n) = counts.get(&-1) {
        s.push_str(&format!(
            "<circle cx=\"{}\" cy=\"{}\" r=\"4\" fill=\"{NOISE_COLOR}\"/>\n",
            fmt(lx),
            fmt(ly)
        ));
        s.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"12\">noise ({n})</text>\n",
            fmt(lx + 9.0),
            fmt(ly + 4.0)
        ));
    }
    s.push_str("</svg>\n");
    s
}

/// Which metrics a sweep chart draws, with their axis side and color.
/// Rates (0..1) use the left axis; displacement metrics share the right.
const SWEEP_METRICS: [(&str, bool, &str); 6] = [
    ("mmcm", true, "#d62728"),
    ("c", true, "#1f77b4"),
    ("v", true, "#2ca02c"),
    ("apd", false, "#9467bd"),
    ("mmade", false, "#ff7f0e"),
    ("mmfde", false, "#8c564b"),
];

/// Dual-axis line chart of a sweep: one polyline per metric, rates on the
/// left axis (fixed 0–1), displacement metrics on the right axis, the swept
/// level on x. Metrics absent at every level (e.g. APD for single-prediction
/// sweeps) are omitted entirely.
pub fn sweep_lines(sweep: &SweepResult, title: &str) -> String {
    let (w, h) = (760.0, 460.0);
    let (ml, mr, mt, mb) = (60.0, 190.0, 44.0, 54.0);
    let value_of = |metric: &str, l: &crate::perturb::SweepLevel| -> Option<f64> {
        match metric {
            "mmcm" => Some(l.mmcm),
            "c" => Some(l.c),
            "v" => Some(l.v),
            "apd" => l.apd,
            "mmade" => Some(l.mmade),
            "mmfde" => Some(l.mmfde),
            _ => None,
        }
    };
    // series with at least one defined point
    let series: Vec<(&str, bool, &str, Vec<(f64, f64)>)> = SWEEP_METRICS
        .iter()
        .filter_map(|&(name, left, color)| {
            let pts: Vec<(f64, f64)> = sweep
                .levels
                .iter()
                .filter_map(|l| value_of(name, l).map(|v| (l.level, v)))
                .collect();
            if pts.is_empty() { None } else { Some((name, left, color, pts)) }
        })
        .collect();

    let (x_lo, x_hi) = bounds(sweep.levels.iter().map(|l| l.level));
    let (r_lo, r_hi) = bounds(
        series
            .iter()
            .filter(|(_, left, _, _)| !left)
            .flat_map(|(_, _, _, pts)| pts.iter().map(|&(_, v)| v)),
    );
    let xa = Axis::new(x_lo, x_hi, ml, w - mr);
    let la = Axis::new(0.0, 1.0, h - mb, mt);
    let ra = Axis::new(r_lo.min(0.0), r_hi, h - mb, mt);

    let mut s = String::new();
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\">\n"
    ));
    s.push_str(&format!("<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n"));
    s.push_str(&format!(
        "<text x=\"{}\" y=\"24\" font-size=\"15\" text-anchor=\"middle\">{}</text>\n",
        fmt((ml + w - mr) / 2.0),
        esc(title)
    ));
    s.push_str(&format!(
        "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#444\"/>\n",
        fmt(ml),
        fmt(mt),
        fmt(w - ml - mr),
        fmt(h - mt - mb)
    ));
    // x ticks at the actual levels (capped to avoid collisions)
    let mut xticks: Vec<f64> = sweep.levels.iter().map(|l| l.level).collect();
    if xticks.len() > 8 {
        xticks = xa.ticks(6);
    }
    for t in xticks {
        let x = fmt(xa.px(t));
        s.push_str(&format!(
            "<line x1=\"{x}\" y1=\"{}\" x2=\"{x}\" y2=\"{}\" stroke=\"#444\"/>\n",
            fmt(h - mb),
            fmt(h - mb + 4.0)
        ));
        s.push_str(&format!(
            "<text x=\"{x}\" y=\"{}\" font-size=\"11\" text-anchor=\"middle\">{}</text>\n",
            fmt(h - mb + 16.0),
            tick_label(t)
        ));
    }
    s.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">level</text>\n",
        fmt((ml + w - mr) / 2.0),
        fmt(h - 12.0)
    ));
    // left axis (rates)
    for t in la.ticks(5) {
        s.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"end\">{}</text>\n",
            fmt(ml - 7.0),
            fmt(la.px(t) + 4.0),
            tick_label(t)
        ));
    }
    s.push_str(&format!(
        "<text x=\"16\" y=\"{}\" font-size=\"12\" transform=\"rotate(-90 16 {})\" text-anchor=\"middle\">rate</text>\n",
        fmt((mt + h - mb) / 2.0),
        fmt((mt + h - mb) / 2.0)
    ));
    // right axis (meters), only if any right-side series exists
    if series.iter().any(|(_, left, _, _)| !left) {
        for t in ra.ticks(5) {
            s.push_str(&format!(
                "<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"start\">{}</text>\n",
                fmt(w - mr + 7.0),
                fmt(ra.px(t) + 4.0),
                tick_label(t)
            ));
        }
        s.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"12\" transform=\"rotate(90 {} {})\" text-anchor=\"middle\">meters</text>\n",
            fmt(w - mr + 44.0),
            fmt((mt + h - mb) / 2.0),
            fmt(w - mr + 44.0),
            fmt((mt + h - mb) / 2.0)
        ));
    }
    // polylines + markers + legend
    let mut ly = mt + 10.0;
    for (name, left, color, pts) in &series {
        let axis = if *left { &la } else { &ra };
        let coords: Vec<String> =
            pts.iter().map(|&(x, v)| format!("{},{}", fmt(xa.px(x)), fmt(axis.px(v)))).collect();
        s.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
            coords.join(" ")
        ));
        for &(x, v) in pts {
            s.push_str(&format!(
                "<circle cx=\"{}\" cy=\"{}\" r=\"3\" fill=\"{color}\"/>\n",
                fmt(xa.px(x)),
                fmt(axis.px(v))
            ));
        }
        let lx = w - mr + 64.0;
        s.push_str(&format!(
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
            fmt(lx),
            fmt(ly),
            fmt(lx + 16.0),
            fmt(ly)
        ));
        s.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"12\">{} ({})</text>\n",
            fmt(lx + 21.0),
            fmt(ly + 4.0),
            name.to_uppercase(),
            if *left { "left" } else { "right" }
        ));
        ly += 18.0;
    }
    s.push_str("</svg>\n");
    s
}
