//! Minimal deterministic SVG rendering for the report artifacts: bar
//! charts, pie rows, the projected scatter and the sweep curve. Output is
//! plain text with fixed-precision coordinates, so identical inputs give
//! byte-identical files.

use std::fmt::Write as _;

use crate::graph::SweepCurve;
use crate::report::PieChart;

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn fmt(value: f64) -> String {
    format!("{value:.3}")
}

struct Svg {
    width: f64,
    height: f64,
    body: String,
}

impl Svg {
    fn new(width: f64, height: f64) -> Self {
        Svg {
            width,
            height,
            body: String::new(),
        }
    }

    fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str) {
        let _ = writeln!(
            self.body,
            r#"<rect x="{}" y="{}" width="{}" height="{}" fill="{fill}"/>"#,
            fmt(x),
            fmt(y),
            fmt(w),
            fmt(h)
        );
    }

    fn circle(&mut self, cx: f64, cy: f64, r: f64, fill: &str, opacity: f64) {
        let _ = writeln!(
            self.body,
            r#"<circle cx="{}" cy="{}" r="{}" fill="{fill}" fill-opacity="{}"/>"#,
            fmt(cx),
            fmt(cy),
            fmt(r),
            fmt(opacity)
        );
    }

    fn text(&mut self, x: f64, y: f64, size: f64, content: &str) {
        let _ = writeln!(
            self.body,
            r#"<text x="{}" y="{}" font-size="{}" font-family="sans-serif">{}</text>"#,
            fmt(x),
            fmt(y),
            fmt(size),
            escape(content)
        );
    }

    fn polyline(&mut self, points: &[(f64, f64)], stroke: &str) {
        let path: Vec<String> = points
            .iter()
            .map(|&(x, y)| format!("{},{}", fmt(x), fmt(y)))
            .collect();
        let _ = writeln!(
            self.body,
            r#"<polyline points="{}" fill="none" stroke="{stroke}" stroke-width="1.5"/>"#,
            path.join(" ")
        );
    }

    fn path(&mut self, d: &str, fill: &str) {
        let _ = writeln!(self.body, r#"<path d="{d}" fill="{fill}"/>"#);
    }

    fn finish(self) -> String {
        format!(
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\">\n{}</svg>\n",
            fmt(self.width),
            fmt(self.height),
            fmt(self.width),
            fmt(self.height),
            self.body
        )
    }
}

/// Green-to-red ramp used to color points by quality.
fn quality_color(value: f64, lo: f64, hi: f64) -> String {
    let t = if hi > lo {
        ((value - lo) / (hi - lo)).clamp(0.0, 1.0)
    } else {
        1.0
    };
    let red = (40.0 + 180.0 * t) as u32;
    let green = (170.0 - 140.0 * t) as u32;
    format!("#{red:02x}{green:02x}30")
}

const PALETTE: [&str; 8] = [
    "#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860", "#da8bc3", "#8c8c8c",
];

/// Vertical bar chart from labeled fractions.
pub fn bar_chart(title: &str, bins: &[(String, f64)]) -> String {
    let width = 60.0 + bins.len() as f64 * 36.0;
    let height = 220.0;
    let mut svg = Svg::new(width.max(220.0), height);
    svg.text(10.0, 18.0, 13.0, title);
    let max = bins.iter().map(|b| b.1).fold(0.0, f64::max).max(1e-12);
    let base = height - 40.0;
    let span = 150.0;
    for (i, (label, value)) in bins.iter().enumerate() {
        let x = 40.0 + i as f64 * 36.0;
        let h = span * value / max;
        svg.rect(x, base - h, 26.0, h, PALETTE[0]);
        svg.text(x, base + 14.0, 9.0, label);
        svg.text(x, base - h - 4.0, 8.0, &format!("{:.2}", value));
    }
    svg.finish()
}

fn pie_at(svg: &mut Svg, cx: f64, cy: f64, r: f64, chart: &PieChart) {
    svg.text(cx - r, cy - r - 8.0, 10.0, &chart.attribute);
    if chart.slices.len() == 1 {
        svg.circle(cx, cy, r, PALETTE[0], 1.0);
        svg.text(cx - r / 2.0, cy, 10.0, &chart.slices[0].label);
        return;
    }
    let mut angle = -std::f64::consts::FRAC_PI_2;
    for (i, slice) in chart.slices.iter().enumerate() {
        let sweep = slice.fraction * std::f64::consts::TAU;
        let (x1, y1) = (cx + r * angle.cos(), cy + r * angle.sin());
        let end = angle + sweep;
        let (x2, y2) = (cx + r * end.cos(), cy + r * end.sin());
        let large = if sweep > std::f64::consts::PI { 1 } else { 0 };
        let d = format!(
            "M {} {} L {} {} A {} {} 0 {large} 1 {} {} Z",
            fmt(cx),
            fmt(cy),
            fmt(x1),
            fmt(y1),
            fmt(r),
            fmt(r),
            fmt(x2),
            fmt(y2)
        );
        svg.path(&d, PALETTE[i % PALETTE.len()]);
        if slice.label == chart.largest {
            let mid = angle + sweep / 2.0;
            svg.text(
                cx + (r + 10.0) * mid.cos() - 8.0,
                cy + (r + 10.0) * mid.sin(),
                9.0,
                &slice.label,
            );
        }
        angle = end;
    }
}

/// A row of value pies, one per attribute, largest slice labeled.
pub fn pie_row(title: &str, pies: &[PieChart]) -> String {
    let cell = 130.0;
    let mut svg = Svg::new(40.0 + pies.len() as f64 * cell, 170.0);
    svg.text(10.0, 16.0, 12.0, title);
    for (i, chart) in pies.iter().enumerate() {
        pie_at(&mut svg, 70.0 + i as f64 * cell, 95.0, 40.0, chart);
    }
    svg.finish()
}

/// Projected scatter: the first two components give the position, the
/// third the point size (depth cue), the quality the color.
pub fn projection_scatter(
    title: &str,
    scores: &[[f64; 3]],
    quality: &[f64],
    circles: &[[f64; 3]],
) -> String {
    let width = 420.0;
    let height = 420.0;
    let mut svg = Svg::new(width, height);
    svg.text(10.0, 18.0, 13.0, title);
    if scores.is_empty() {
        return svg.finish();
    }
    let bound = |axis: usize| -> (f64, f64) {
        let lo = scores.iter().map(|s| s[axis]).fold(f64::INFINITY, f64::min);
        let hi = scores
            .iter()
            .map(|s| s[axis])
            .fold(f64::NEG_INFINITY, f64::max);
        if hi > lo {
            (lo, hi)
        } else {
            (lo - 1.0, hi + 1.0)
        }
    };
    let (x_lo, x_hi) = bound(0);
    let (y_lo, y_hi) = bound(1);
    let (z_lo, z_hi) = bound(2);
    let q_lo = quality.iter().copied().fold(f64::INFINITY, f64::min);
    let q_hi = quality.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let map_x = |v: f64| 30.0 + (v - x_lo) / (x_hi - x_lo) * (width - 60.0);
    let map_y = |v: f64| height - 30.0 - (v - y_lo) / (y_hi - y_lo) * (height - 70.0);
    for (score, &q) in scores.iter().zip(quality) {
        let depth = (score[2] - z_lo) / (z_hi - z_lo);
        let radius = 3.0 + 4.0 * depth;
        svg.circle(
            map_x(score[0]),
            map_y(score[1]),
            radius,
            &quality_color(q, q_lo, q_hi),
            0.5 + 0.5 * depth,
        );
    }
    // Dense regions marked with open circles around their centroids.
    for centroid in circles {
        let _ = writeln!(
            svg.body,
            r##"<circle cx="{}" cy="{}" r="26" fill="none" stroke="#000000" stroke-width="1.5"/>"##,
            fmt(map_x(centroid[0])),
            fmt(map_y(centroid[1]))
        );
    }
    svg.finish()
}

/// The sweep curve: mean quality and mean size against the scale, each
/// normalized to its own maximum, with the raw extrema in the legend.
pub fn sweep_chart(title: &str, curve: &SweepCurve) -> String {
    let width = 460.0;
    let height = 260.0;
    let mut svg = Svg::new(width, height);
    svg.text(10.0, 18.0, 13.0, title);
    if curve.points.is_empty() {
        return svg.finish();
    }
    let tau_lo = curve.points.first().unwrap().tau_exp;
    let tau_hi = curve.points.last().unwrap().tau_exp.max(tau_lo + 1e-9);
    let size_hi = curve
        .points
        .iter()
        .map(|p| p.mean_size)
        .fold(0.0, f64::max)
        .max(1e-12);
    let map_x = |tau: f64| 40.0 + (tau - tau_lo) / (tau_hi - tau_lo) * (width - 80.0);
    let map_y = |t: f64| height - 40.0 - t * (height - 80.0);
    let cq_line: Vec<(f64, f64)> = curve
        .points
        .iter()
        .map(|p| (map_x(p.tau_exp), map_y(p.mean_cq)))
        .collect();
    let size_line: Vec<(f64, f64)> = curve
        .points
        .iter()
        .map(|p| (map_x(p.tau_exp), map_y(p.mean_size / size_hi)))
        .collect();
    svg.polyline(&cq_line, PALETTE[2]);
    svg.polyline(&size_line, PALETTE[3]);
    svg.text(
        40.0,
        height - 12.0,
        10.0,
        "mean CQ (green), mean size / max (red)",
    );
    svg.text(
        width - 150.0,
        height - 12.0,
        10.0,
        &format!("max size {:.1}", size_hi),
    );
    svg.finish()
}
