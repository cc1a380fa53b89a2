//! Self-contained SVG raster with a log₁₀ color scale.

use std::fmt::Write as _;

// Viridis samples at 0, 0.25, 0.5, 0.75, 1.
const ANCHORS: [(f64, f64, f64); 5] = [
    (68.0, 1.0, 84.0),
    (59.0, 82.0, 139.0),
    (33.0, 145.0, 140.0),
    (94.0, 201.0, 98.0),
    (253.0, 231.0, 37.0),
];

fn color(t: f64) -> String {
    let t = t.clamp(0.0, 1.0) * (ANCHORS.len() - 1) as f64;
    let i = (t.floor() as usize).min(ANCHORS.len() - 2);
    let f = t - i as f64;
    let (a, b) = (ANCHORS[i], ANCHORS[i + 1]);
    let mix = |x: f64, y: f64| (x + f * (y - x)).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

/// Declared color-scale bounds in log₁₀ units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogScale {
    pub lo: f64,
    pub hi: f64,
}

impl LogScale {
    /// Bounds from the positive values, rounded outwards to whole decades.
    pub fn fit(values: &[f64]) -> Self {
        let pos = values.iter().copied().filter(|v| *v > 0.0 && v.is_finite());
        let (lo, hi) = pos.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
        if !lo.is_finite() {
            return LogScale { lo: -16.0, hi: 0.0 };
        }
        let (lo, hi) = (lo.log10().floor(), hi.log10().ceil());
        LogScale { lo, hi: if hi > lo { hi } else { lo + 1.0 } }
    }

    fn position(&self, v: f64) -> f64 {
        if !(v > 0.0) {
            return 0.0;
        }
        (v.log10() - self.lo) / (self.hi - self.lo)
    }
}

/// Renders square cells of side `cell` centered at `(x, y)` colored by
/// `log₁₀(value)`. Values ≤ 0 take the bottom color.
pub fn heatmap(title: &str, points: &[(f64, f64)], values: &[f64], cell: f64, scale: LogScale) -> String {
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in points {
        x0 = x0.min(x - cell / 2.0);
        x1 = x1.max(x + cell / 2.0);
        y0 = y0.min(y - cell / 2.0);
        y1 = y1.max(y + cell / 2.0);
    }
    if points.is_empty() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    let size = 480.0;
    let px = size / (x1 - x0).max(y1 - y0);
    let (w, h) = ((x1 - x0) * px, (y1 - y0) * px);
    let bar_x = w + 20.0;
    let mut s = String::new();
    writeln!(s, "<?xml version=\"1.0\" encoding=\"UTF-8\"?>").unwrap();
    writeln!(s, "<!-- color scale: log10, lo={}, hi={} -->", scale.lo, scale.hi).unwrap();
    writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0}\" height=\"{:.0}\" shape-rendering=\"crispEdges\">",
        bar_x + 80.0,
        h + 40.0
    )
    .unwrap();
    writeln!(s, "<title>{}</title>", escape(title)).unwrap();
    writeln!(s, "<g transform=\"translate(0,30)\">").unwrap();
    let side = cell * px;
    for (&(x, y), &v) in points.iter().zip(values) {
        // SVG y grows downwards.
        let sx = (x - cell / 2.0 - x0) * px;
        let sy = (y1 - (y + cell / 2.0)) * px;
        writeln!(
            s,
            "<rect x=\"{sx:.2}\" y=\"{sy:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{}\"/>",
            side + 0.05,
            side + 0.05,
            color(scale.position(v))
        )
        .unwrap();
    }
    let steps = 32;
    for i in 0..steps {
        let t = i as f64 / (steps - 1) as f64;
        let y = h * (1.0 - t) - h / steps as f64;
        writeln!(
            s,
            "<rect x=\"{bar_x:.2}\" y=\"{:.2}\" width=\"16\" height=\"{:.2}\" fill=\"{}\"/>",
            y.max(0.0),
            h / steps as f64 + 0.5,
            color(t)
        )
        .unwrap();
    }
    writeln!(s, "<text x=\"{:.2}\" y=\"10\" font-size=\"11\">1e{}</text>", bar_x + 20.0, scale.hi).unwrap();
    writeln!(s, "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\">1e{}</text>", bar_x + 20.0, h, scale.lo).unwrap();
    writeln!(s, "</g>").unwrap();
    writeln!(s, "<text x=\"4\" y=\"18\" font-size=\"13\">{}</text>", escape(title)).unwrap();
    writeln!(s, "</svg>").unwrap();
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
