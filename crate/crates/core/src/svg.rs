//! Static SVG charts: bar histograms with optional line overlays.

use std::fmt::Write as _;

const W: f64 = 640.0;
const H: f64 = 400.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

/// Bars spanning `[left, left + width)` with height `value`.
#[derive(Debug, Clone)]
pub struct Bars {
    pub left: Vec<f64>,
    pub width: f64,
    pub value: Vec<f64>,
    pub fill: &'static str,
    pub opacity: f64,
    pub label: String,
}

#[derive(Debug, Clone)]
pub struct Line {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub stroke: &'static str,
    pub label: String,
}

#[derive(Debug, Clone, Default)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub bars: Vec<Bars>,
    pub lines: Vec<Line>,
}

impl Chart {
    pub fn new(title: impl Into<String>, x_label: impl Into<String>, y_label: impl Into<String>) -> Self {
        Chart {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            ..Default::default()
        }
    }

    fn bounds(&self) -> (f64, f64, f64, f64) {
        let mut x0 = f64::INFINITY;
        let mut x1 = f64::NEG_INFINITY;
        let mut y0: f64 = 0.0;
        let mut y1: f64 = 0.0;
        for b in &self.bars {
            for (&l, &v) in b.left.iter().zip(&b.value) {
                x0 = x0.min(l);
                x1 = x1.max(l + b.width);
                y0 = y0.min(v);
                y1 = y1.max(v);
            }
        }
        for l in &self.lines {
            for (&x, &y) in l.x.iter().zip(&l.y) {
                if x.is_finite() && y.is_finite() {
                    x0 = x0.min(x);
                    x1 = x1.max(x);
                    y0 = y0.min(y);
                    y1 = y1.max(y);
                }
            }
        }
        if !(x0.is_finite() && x1 > x0) {
            x0 = 0.0;
            x1 = 1.0;
        }
        if y1.is_nan() || y0.is_nan() || y1 <= y0 {
            y1 = y0 + 1.0;
        }
        let pad = 0.05 * (y1 - y0);
        (x0, x1, if y0 < 0.0 { y0 - pad } else { y0 }, y1 + pad)
    }

    pub fn render(&self) -> String {
        let (x0, x1, y0, y1) = self.bounds();
        let pw = W - LEFT - RIGHT;
        let ph = H - TOP - BOTTOM;
        let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| TOP + (y1 - y) / (y1 - y0) * ph;

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
            W / 2.0,
            escape(&self.title)
        );

        for b in &self.bars {
            let _ = writeln!(s, r#"<g fill="{}" fill-opacity="{}">"#, b.fill, b.opacity);
            for (&l, &v) in b.left.iter().zip(&b.value) {
                if v == 0.0 {
                    continue;
                }
                let (xa, xb) = (sx(l), sx(l + b.width));
                let (ya, yb) = (sy(v.max(0.0)), sy(v.min(0.0)));
                let _ = writeln!(
                    s,
                    r#"<rect x="{xa:.2}" y="{ya:.2}" width="{:.2}" height="{:.2}"/>"#,
                    (xb - xa).max(0.5),
                    yb - ya
                );
            }
            let _ = writeln!(s, "</g>");
        }
        for l in &self.lines {
            let pts: Vec<String> = l
                .x
                .iter()
                .zip(&l.y)
                .filter(|(x, y)| x.is_finite() && y.is_finite())
                .map(|(&x, &y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                .collect();
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{}" stroke-width="2" points="{}"/>"#,
                l.stroke,
                pts.join(" ")
            );
        }

        // axes
        let _ = writeln!(
            s,
            r#"<g stroke="black"><line x1="{LEFT}" y1="{:.2}" x2="{:.2}" y2="{:.2}"/><line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{:.2}"/></g>"#,
            TOP + ph,
            LEFT + pw,
            TOP + ph,
            TOP + ph
        );
        if y0 < 0.0 && y1 > 0.0 {
            let _ = writeln!(
                s,
                r##"<line x1="{LEFT}" y1="{0:.2}" x2="{1:.2}" y2="{0:.2}" stroke="#999" stroke-dasharray="4,3"/>"##,
                sy(0.0),
                LEFT + pw
            );
        }
        for i in 0..=5 {
            let fx = x0 + (x1 - x0) * i as f64 / 5.0;
            let fy = y0 + (y1 - y0) * i as f64 / 5.0;
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                sx(fx),
                TOP + ph + 16.0,
                tick(fx)
            );
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
                LEFT - 6.0,
                sy(fy) + 4.0,
                tick(fy)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            LEFT + pw / 2.0,
            H - 12.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="16" y="{0:.1}" text-anchor="middle" transform="rotate(-90 16 {0:.1})">{1}</text>"#,
            TOP + ph / 2.0,
            escape(&self.y_label)
        );

        // legend
        let mut ly = TOP + 8.0;
        let legend = self
            .bars
            .iter()
            .map(|b| (b.fill, &b.label))
            .chain(self.lines.iter().map(|l| (l.stroke, &l.label)));
        for (color, label) in legend {
            let _ = writeln!(
                s,
                r#"<rect x="{:.1}" y="{:.1}" width="12" height="12" fill="{color}"/><text x="{:.1}" y="{:.1}">{}</text>"#,
                W - RIGHT - 170.0,
                ly,
                W - RIGHT - 152.0,
                ly + 10.0,
                escape(label)
            );
            ly += 18.0;
        }
        s.push_str("</svg>\n");
        s
    }
}

fn tick(v: f64) -> String {
    if v.abs() >= 1000.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
