//! Log-log convergence charts as standalone SVG markup.

use std::fmt::Write as _;

use miskrige::analysis::RateFit;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

pub struct Series<'a> {
    pub label: &'a str,
    pub color: &'a str,
    pub points: Vec<(f64, f64)>,
    pub fit: Option<&'a RateFit>,
    /// Predicted slope, drawn as a dashed reference line through the first point.
    pub predicted: Option<f64>,
}

struct Axes {
    lx: (f64, f64),
    ly: (f64, f64),
}

impl Axes {
    fn px(&self, n: f64) -> f64 {
        LEFT + (n.log10() - self.lx.0) / (self.lx.1 - self.lx.0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, e: f64) -> f64 {
        HEIGHT - BOTTOM - (e.log10() - self.ly.0) / (self.ly.1 - self.ly.0) * (HEIGHT - TOP - BOTTOM)
    }
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Formats a slope with two decimals, never as "-0.00".
pub fn slope_label(slope: f64) -> String {
    let s = format!("{slope:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

pub fn render(title: &str, series: &[Series]) -> String {
    let all: Vec<(f64, f64)> = series
        .iter()
        .flat_map(|s| s.points.iter().copied())
        .filter(|&(n, e)| n > 0.0 && e > 0.0 && e.is_finite())
        .collect();
    let (mut xmin, mut xmax, mut ymin, mut ymax) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(n, e) in &all {
        xmin = xmin.min(n.log10());
        xmax = xmax.max(n.log10());
        ymin = ymin.min(e.log10());
        ymax = ymax.max(e.log10());
    }
    if all.is_empty() {
        (xmin, xmax, ymin, ymax) = (0.0, 1.0, 0.0, 1.0);
    }
    let ax = Axes { lx: padded(xmin, xmax), ly: padded(ymin, ymax) };

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        (LEFT + WIDTH - RIGHT) / 2.0,
        escape(title)
    );
    let (x0, x1) = (LEFT, WIDTH - RIGHT);
    let (y0, y1) = (HEIGHT - BOTTOM, TOP);
    let _ = writeln!(
        out,
        r#"<rect x="{x0}" y="{y1}" width="{:.1}" height="{:.1}" fill="none" stroke="black"/>"#,
        x1 - x0,
        y0 - y1
    );

    for k in ax.lx.0.ceil() as i32..=ax.lx.1.floor() as i32 {
        let x = ax.px(10f64.powi(k));
        let _ = writeln!(out, r#"<line x1="{x:.1}" y1="{y0}" x2="{x:.1}" y2="{:.1}" stroke="black"/>"#, y0 + 5.0);
        let _ = writeln!(out, r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">1e{k}</text>"#, y0 + 18.0);
    }
    for k in ax.ly.0.ceil() as i32..=ax.ly.1.floor() as i32 {
        let y = ax.py(10f64.powi(k));
        let _ = writeln!(out, r#"<line x1="{:.1}" y1="{y:.1}" x2="{x0}" y2="{y:.1}" stroke="black"/>"#, x0 - 5.0);
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">1e{k}</text>"#, x0 - 8.0, y + 4.0);
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">n</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 15.0
    );
    let _ = writeln!(
        out,
        r#"<text x="18" y="{:.1}" text-anchor="middle" transform="rotate(-90 18 {:.1})">error</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0
    );

    let mut legend_y = TOP + 10.0;
    for s in series {
        let pts: Vec<(f64, f64)> = s.points.iter().copied().filter(|&(n, e)| n > 0.0 && e > 0.0).collect();
        for &(n, e) in &pts {
            let _ = writeln!(
                out,
                r#"<circle cx="{:.1}" cy="{:.1}" r="3.5" fill="{}"/>"#,
                ax.px(n),
                ax.py(e),
                s.color
            );
        }
        if let (Some(fit), Some(first), Some(last)) = (s.fit, pts.first(), pts.last()) {
            let line = |n: f64| (fit.intercept + fit.slope * n.ln()).exp();
            let _ = writeln!(
                out,
                r#"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="{}" stroke-width="1.5"/>"#,
                ax.px(first.0),
                ax.py(line(first.0)),
                ax.px(last.0),
                ax.py(line(last.0)),
                s.color
            );
        }
        if let (Some(p), Some(first), Some(last)) = (s.predicted, pts.first(), pts.last()) {
            let end = first.1 * (last.0 / first.0).powf(p);
            let _ = writeln!(
                out,
                r#"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="{}" stroke-dasharray="6 4" stroke-opacity="0.6"/>"#,
                ax.px(first.0),
                ax.py(first.1),
                ax.px(last.0),
                ax.py(end),
                s.color
            );
        }
        let lx = WIDTH - RIGHT + 12.0;
        let _ = writeln!(out, r#"<circle cx="{lx:.1}" cy="{:.1}" r="4" fill="{}"/>"#, legend_y - 4.0, s.color);
        let _ = writeln!(out, r#"<text x="{:.1}" y="{legend_y:.1}">{}</text>"#, lx + 10.0, escape(s.label));
        legend_y += 16.0;
        if let Some(fit) = s.fit {
            let _ = writeln!(
                out,
                r#"<text x="{:.1}" y="{legend_y:.1}">slope={}</text>"#,
                lx + 10.0,
                slope_label(fit.slope)
            );
            legend_y += 16.0;
        }
        if let Some(p) = s.predicted {
            let _ = writeln!(
                out,
                r#"<text x="{:.1}" y="{legend_y:.1}">predicted={}</text>"#,
                lx + 10.0,
                slope_label(p)
            );
            legend_y += 16.0;
        }
        legend_y += 8.0;
    }
    out.push_str("</svg>\n");
    out
}
