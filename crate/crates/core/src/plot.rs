//! Minimal self-contained SVG line charts.

use std::fmt::Write as _;

const WIDTH: f64 = 900.0;
const HEIGHT: f64 = 360.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

#[derive(Debug, Clone)]
pub struct Line {
    pub label: String,
    pub color: String,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
}

impl Line {
    pub fn new(label: impl Into<String>, color: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self {
            label: label.into(),
            color: color.into(),
            points,
            dashed: false,
        }
    }
}

/// Shaded envelope between `lo` and `hi` at each `x`.
#[derive(Debug, Clone)]
pub struct Band {
    pub label: String,
    pub color: String,
    pub points: Vec<(f64, f64, f64)>,
}

#[derive(Debug, Clone, Default)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub lines: Vec<Line>,
    pub bands: Vec<Band>,
    /// Horizontal reference lines `(y, color, label)`.
    pub hlines: Vec<(f64, String, String)>,
    /// Shaded x intervals `[x0, x1]`.
    pub spans: Vec<(f64, f64)>,
    pub span_color: String,
}

impl Chart {
    pub fn new(title: &str, x_label: &str, y_label: &str) -> Self {
        Self {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            span_color: "#f4a3a3".into(),
            ..Default::default()
        }
    }

    fn bounds(&self) -> (f64, f64, f64, f64) {
        let mut xs: Vec<f64> = Vec::new();
        let mut ys: Vec<f64> = Vec::new();
        for l in &self.lines {
            for &(x, y) in &l.points {
                xs.push(x);
                ys.push(y);
            }
        }
        for b in &self.bands {
            for &(x, lo, hi) in &b.points {
                xs.push(x);
                ys.extend([lo, hi]);
            }
        }
        ys.extend(self.hlines.iter().map(|h| h.0));
        let finite = |v: &[f64], lo: &mut f64, hi: &mut f64| {
            for &x in v.iter().filter(|x| x.is_finite()) {
                *lo = lo.min(x);
                *hi = hi.max(x);
            }
        };
        let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        finite(&xs, &mut x0, &mut x1);
        finite(&ys, &mut y0, &mut y1);
        if x0 > x1 {
            (x0, x1) = (0.0, 1.0);
        }
        if y0 > y1 {
            (y0, y1) = (0.0, 1.0);
        }
        if x1 - x0 < 1e-12 {
            x1 = x0 + 1.0;
        }
        if y1 - y0 < 1e-12 {
            y0 -= 0.5;
            y1 += 0.5;
        }
        let pad = 0.05 * (y1 - y0);
        (x0, x1, y0 - pad, y1 + pad)
    }

    pub fn render(&self) -> String {
        let (x0, x1, y0, y1) = self.bounds();
        let pw = WIDTH - LEFT - RIGHT;
        let ph = HEIGHT - TOP - BOTTOM;
        let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| TOP + (1.0 - (y.clamp(y0, y1) - y0) / (y1 - y0)) * ph;

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
            WIDTH / 2.0,
            escape(&self.title)
        );
        for &(a, b) in &self.spans {
            let (xa, xb) = (sx(a.max(x0)), sx(b.min(x1)));
            let _ = writeln!(
                s,
                r#"<rect x="{xa:.2}" y="{TOP}" width="{:.2}" height="{ph}" fill="{}" fill-opacity="0.5"/>"#,
                (xb - xa).max(1.0),
                self.span_color
            );
        }
        for band in &self.bands {
            let upper: Vec<String> = band.points.iter().map(|p| format!("{:.2},{:.2}", sx(p.0), sy(p.2))).collect();
            let lower: Vec<String> = band.points.iter().rev().map(|p| format!("{:.2},{:.2}", sx(p.0), sy(p.1))).collect();
            let _ = writeln!(
                s,
                r#"<polygon points="{} {}" fill="{}" fill-opacity="0.3" stroke="none"/>"#,
                upper.join(" "),
                lower.join(" "),
                band.color
            );
        }
        // axes
        let _ = writeln!(
            s,
            r##"<path d="M{LEFT},{TOP} V{:.1} H{:.1}" fill="none" stroke="#333"/>"##,
            TOP + ph,
            LEFT + pw
        );
        for k in 0..=4 {
            let fy = y0 + (y1 - y0) * k as f64 / 4.0;
            let fx = x0 + (x1 - x0) * k as f64 / 4.0;
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
                LEFT - 6.0,
                sy(fy) + 4.0,
                tick(fy)
            );
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
                sx(fx),
                TOP + ph + 16.0,
                tick(fx)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            LEFT + pw / 2.0,
            HEIGHT - 10.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
            TOP + ph / 2.0,
            TOP + ph / 2.0,
            escape(&self.y_label)
        );
        for (y, color, _) in &self.hlines {
            let _ = writeln!(
                s,
                r#"<line x1="{LEFT}" x2="{:.1}" y1="{:.2}" y2="{:.2}" stroke="{color}" stroke-dasharray="6 4"/>"#,
                LEFT + pw,
                sy(*y),
                sy(*y)
            );
        }
        for line in &self.lines {
            let pts: Vec<String> = line
                .points
                .iter()
                .filter(|p| p.1.is_finite())
                .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                .collect();
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.2"{}/>"#,
                pts.join(" "),
                line.color,
                if line.dashed { r#" stroke-dasharray="4 3""# } else { "" }
            );
        }
        // legend
        let mut entries: Vec<(&str, &str)> = Vec::new();
        entries.extend(self.lines.iter().map(|l| (l.label.as_str(), l.color.as_str())));
        entries.extend(self.bands.iter().map(|b| (b.label.as_str(), b.color.as_str())));
        entries.extend(self.hlines.iter().map(|h| (h.2.as_str(), h.1.as_str())));
        if !self.spans.is_empty() {
            entries.push(("labelled anomaly", self.span_color.as_str()));
        }
        for (k, (label, color)) in entries.iter().filter(|e| !e.0.is_empty()).enumerate() {
            let y = TOP + 8.0 + 16.0 * k as f64;
            let x = LEFT + pw - 150.0;
            let _ = writeln!(
                s,
                r#"<rect x="{x:.1}" y="{:.1}" width="12" height="8" fill="{color}"/><text x="{:.1}" y="{:.1}">{}</text>"#,
                y - 7.0,
                x + 18.0,
                y,
                escape(label)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

fn tick(v: f64) -> String {
    if v.abs() >= 1e4 || (v != 0.0 && v.abs() < 1e-2) {
        format!("{v:.2e}")
    } else {
        format!("{v:.2}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Contiguous runs of nonzero labels as `[start, end]` x intervals.
pub fn label_spans(xs: &[f64], labels: &[u8]) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    for (i, &l) in labels.iter().enumerate() {
        match (l != 0, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push((xs[s], xs[i - 1]));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((xs[s], xs[labels.len() - 1]));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_well_formed() {
        let mut c = Chart::new("a < b", "t", "y");
        c.lines.push(Line::new("score", "#1f77b4", vec![(0.0, 1.0), (1.0, 3.0)]));
        c.hlines.push((2.0, "#d62728".into(), "threshold".into()));
        c.spans = label_spans(&[0.0, 1.0], &[0, 1]);
        let svg = c.render();
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert!(svg.contains("a &lt; b"));
        assert_eq!(svg, c.render());
    }

    #[test]
    fn spans() {
        let xs = [0.0, 1.0, 2.0, 3.0, 4.0];
        assert_eq!(label_spans(&xs, &[1, 1, 0, 1, 1]), vec![(0.0, 1.0), (3.0, 4.0)]);
    }
}
