//! Minimal SVG line plots. Coordinates are printed with fixed precision so
//! the same data always gives the same file.

use std::fmt::Write as _;

const WIDTH: f64 = 720.0;
const PANEL_HEIGHT: f64 = 180.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 45.0;
const GAP: f64 = 25.0;

pub struct Panel {
    pub label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Points to mark with circles.
    pub markers: Vec<(f64, f64)>,
}

/// Round `span / n` up to 1, 2 or 5 times a power of ten.
fn nice_step(span: f64, n: usize) -> f64 {
    let raw = span / n as f64;
    if !(raw > 0.0) || !raw.is_finite() {
        return 1.0;
    }
    let mag = 10f64.powf(raw.log10().floor());
    let f = raw / mag;
    let m = if f <= 1.0 {
        1.0
    } else if f <= 2.0 {
        2.0
    } else if f <= 5.0 {
        5.0
    } else {
        10.0
    };
    m * mag
}

fn range(v: &[f64]) -> (f64, f64) {
    let lo = v.iter().copied().filter(|x| x.is_finite()).fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().filter(|x| x.is_finite()).fold(f64::NEG_INFINITY, f64::max);
    if !(lo < hi) {
        let c = if lo.is_finite() { lo } else { 0.0 };
        return (c - 1.0, c + 1.0);
    }
    (lo, hi)
}

fn tick_label(v: f64, step: f64) -> String {
    let decimals = if step >= 1.0 { 0 } else { (-step.log10().floor()) as usize };
    let s = format!("{v:.decimals$}");
    if s == "-0" { "0".into() } else { s }
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Vertically stacked panels sharing an x label.
pub fn panels(title: &str, x_label: &str, y_label: &str, panels: &[Panel]) -> String {
    let n = panels.len().max(1) as f64;
    let height = TOP + n * PANEL_HEIGHT + (n - 1.0) * GAP + BOTTOM;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH:.0}" height="{height:.0}" viewBox="0 0 {WIDTH:.0} {height:.0}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{:.1}" y="18" text-anchor="middle" font-size="13">{}</text>"#, WIDTH / 2.0, esc(title));

    let pw = WIDTH - LEFT - RIGHT;
    for (k, p) in panels.iter().enumerate() {
        let y0 = TOP + k as f64 * (PANEL_HEIGHT + GAP);
        let (xlo, xhi) = range(&p.x);
        let (ylo, yhi) = range(&p.y);
        let (ylo, yhi) = if ylo >= 0.0 { (0.0, yhi) } else { (ylo, yhi) };
        let px = |x: f64| LEFT + (x - xlo) / (xhi - xlo) * pw;
        let py = |y: f64| y0 + PANEL_HEIGHT - (y - ylo) / (yhi - ylo) * PANEL_HEIGHT;

        let _ = writeln!(
            s,
            r#"<rect x="{LEFT:.1}" y="{y0:.1}" width="{pw:.1}" height="{PANEL_HEIGHT:.1}" fill="none" stroke="black"/>"#
        );
        for (step, lo, hi, horizontal) in
            [(nice_step(xhi - xlo, 6), xlo, xhi, true), (nice_step(yhi - ylo, 4), ylo, yhi, false)]
        {
            let mut v = (lo / step).ceil() * step;
            while v <= hi + 1e-9 * step {
                let label = tick_label(v, step);
                if horizontal {
                    let x = px(v);
                    let yb = y0 + PANEL_HEIGHT;
                    let _ = writeln!(s, r#"<line x1="{x:.1}" y1="{yb:.1}" x2="{x:.1}" y2="{:.1}" stroke="black"/>"#, yb + 4.0);
                    let _ = writeln!(s, r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">{label}</text>"#, yb + 16.0);
                } else {
                    let y = py(v);
                    let _ = writeln!(s, r#"<line x1="{:.1}" y1="{y:.1}" x2="{LEFT:.1}" y2="{y:.1}" stroke="black"/>"#, LEFT - 4.0);
                    let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{label}</text>"#, LEFT - 6.0, y + 4.0);
                }
                v += step;
            }
        }

        let mut path = String::new();
        for (x, y) in p.x.iter().zip(&p.y) {
            if x.is_finite() && y.is_finite() {
                let _ = write!(path, "{:.2},{:.2} ", px(*x), py(*y));
            }
        }
        let _ = writeln!(s, r#"<polyline fill="none" stroke="steelblue" stroke-width="1" points="{}"/>"#, path.trim_end());
        for (x, y) in &p.markers {
            let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="none" stroke="firebrick"/>"#, px(*x), py(*y));
        }
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, WIDTH - RIGHT - 6.0, y0 + 14.0, esc(&p.label));
        let cy = y0 + PANEL_HEIGHT / 2.0;
        let _ = writeln!(
            s,
            r#"<text x="16" y="{cy:.1}" text-anchor="middle" transform="rotate(-90 16 {cy:.1})">{}</text>"#,
            esc(y_label)
        );
    }
    let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, LEFT + pw / 2.0, height - 8.0, esc(x_label));
    s.push_str("</svg>\n");
    s
}
