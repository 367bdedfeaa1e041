//! Minimal static SVG line charts.
//!
//! Output depends only on the data: fixed canvas, fixed number formatting,
//! no timestamps or random ids, so plots are byte-reproducible.

use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const PANEL_HEIGHT: f64 = 280.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 30.0;
const MARGIN_B: f64 = 45.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Style {
    Line,
    Markers,
}

#[derive(Clone, Debug)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub style: Style,
}

impl Series {
    pub fn line(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self {
            label: label.into(),
            points,
            style: Style::Line,
        }
    }

    pub fn markers(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self {
            label: label.into(),
            points,
            style: Style::Markers,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct Panel {
    pub title: String,
    pub xlabel: String,
    pub ylabel: String,
    pub series: Vec<Series>,
    /// Draw `y = 0`.
    pub zero_line: bool,
}

impl Panel {
    pub fn new(title: impl Into<String>, xlabel: impl Into<String>, ylabel: impl Into<String>) -> Self {
        Self {
            title: title.into(),
            xlabel: xlabel.into(),
            ylabel: ylabel.into(),
            ..Self::default()
        }
    }

    pub fn with(mut self, s: Series) -> Self {
        self.series.push(s);
        self
    }

    pub fn zero_line(mut self) -> Self {
        self.zero_line = true;
        self
    }

    fn bounds(&self) -> (f64, f64, f64, f64) {
        let pts = self.series.iter().flat_map(|s| s.points.iter()).filter(|p| p.0.is_finite() && p.1.is_finite());
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for &(x, y) in pts {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        if self.zero_line {
            y0 = y0.min(0.0);
            y1 = y1.max(0.0);
        }
        if !x0.is_finite() {
            return (0.0, 1.0, 0.0, 1.0);
        }
        let pad = |lo: f64, hi: f64| {
            if hi > lo {
                let d = 0.05 * (hi - lo);
                (lo - d, hi + d)
            } else {
                let d = if lo == 0.0 { 1.0 } else { 0.1 * lo.abs() };
                (lo - d, hi + d)
            }
        };
        let (x0, x1) = if x1 > x0 { (x0, x1) } else { pad(x0, x1) };
        let (y0, y1) = pad(y0, y1);
        (x0, x1, y0, y1)
    }

    fn render(&self, out: &mut String, top: f64) {
        let (x0, x1, y0, y1) = self.bounds();
        let pw = WIDTH - MARGIN_L - MARGIN_R;
        let ph = PANEL_HEIGHT - MARGIN_T - MARGIN_B;
        let left = MARGIN_L;
        let ptop = top + MARGIN_T;
        let sx = |x: f64| left + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| ptop + (y1 - y) / (y1 - y0) * ph;

        let _ = writeln!(
            out,
            r##"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="14">{}</text>"##,
            left + pw / 2.0,
            top + 20.0,
            escape(&self.title)
        );
        let _ = writeln!(
            out,
            r##"<rect x="{left:.1}" y="{ptop:.1}" width="{pw:.1}" height="{ph:.1}" fill="none" stroke="#444"/>"##
        );
        for k in 0..=4 {
            let t = k as f64 / 4.0;
            let xv = x0 + t * (x1 - x0);
            let yv = y0 + t * (y1 - y0);
            let _ = writeln!(
                out,
                r##"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="10">{}</text>"##,
                sx(xv),
                ptop + ph + 14.0,
                tick(xv)
            );
            let _ = writeln!(
                out,
                r##"<text x="{:.1}" y="{:.1}" text-anchor="end" font-size="10">{}</text>"##,
                left - 4.0,
                sy(yv) + 3.0,
                tick(yv)
            );
        }
        let _ = writeln!(
            out,
            r##"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="12">{}</text>"##,
            left + pw / 2.0,
            ptop + ph + 32.0,
            escape(&self.xlabel)
        );
        let _ = writeln!(
            out,
            r##"<text x="14" y="{:.1}" text-anchor="middle" font-size="12" transform="rotate(-90 14 {:.1})">{}</text>"##,
            ptop + ph / 2.0,
            ptop + ph / 2.0,
            escape(&self.ylabel)
        );
        if self.zero_line && y0 < 0.0 && y1 > 0.0 {
            let _ = writeln!(
                out,
                r##"<line x1="{left:.1}" y1="{y:.2}" x2="{:.1}" y2="{y:.2}" stroke="#999" stroke-dasharray="4 3"/>"##,
                left + pw,
                y = sy(0.0)
            );
        }
        for (k, s) in self.series.iter().enumerate() {
            let color = PALETTE[k % PALETTE.len()];
            let pts = s.points.iter().filter(|p| p.0.is_finite() && p.1.is_finite());
            match s.style {
                Style::Line => {
                    let path: Vec<String> = pts.map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
                    if !path.is_empty() {
                        let _ = writeln!(
                            out,
                            r##"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"##,
                            path.join(" ")
                        );
                    }
                }
                Style::Markers => {
                    for &(x, y) in pts {
                        let _ = writeln!(
                            out,
                            r##"<circle cx="{:.2}" cy="{:.2}" r="4" fill="none" stroke="{color}" stroke-width="1.5"/>"##,
                            sx(x),
                            sy(y)
                        );
                    }
                }
            }
            let ly = ptop + 12.0 + 14.0 * k as f64;
            let _ = writeln!(
                out,
                r##"<text x="{:.1}" y="{ly:.1}" text-anchor="end" font-size="10" fill="{color}">{}</text>"##,
                left + pw - 6.0,
                escape(&s.label)
            );
        }
    }
}

/// Vertically stacked panels sharing the canvas width.
pub fn render(panels: &[Panel]) -> String {
    let height = PANEL_HEIGHT * panels.len().max(1) as f64;
    let mut out = format!(
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH:.0}" height="{height:.0}" viewBox="0 0 {WIDTH:.0} {height:.0}" font-family="sans-serif">
<rect width="100%" height="100%" fill="white"/>
"##
    );
    for (k, p) in panels.iter().enumerate() {
        p.render(&mut out, k as f64 * PANEL_HEIGHT);
    }
    out.push_str("</svg>\n");
    out
}

fn tick(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-3..1e4).contains(&a) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
