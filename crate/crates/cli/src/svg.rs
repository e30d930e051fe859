//! Static SVG bifurcation diagram: branch points in the `(mu, r)` plane with
//! the asymptotic parabola `mu = mu_* + mu2 r^2` overlaid.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 480.0;
const PAD: f64 = 56.0;

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        PAD + (x - self.x0) / (self.x1 - self.x0) * (W - 2.0 * PAD)
    }
    fn py(&self, y: f64) -> f64 {
        H - PAD - (y - self.y0) / (self.y1 - self.y0) * (H - 2.0 * PAD)
    }
}

fn span(lo: f64, hi: f64) -> (f64, f64) {
    if hi - lo > 1e-12 * (1.0 + lo.abs().max(hi.abs())) {
        let m = 0.05 * (hi - lo);
        (lo - m, hi + m)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

/// Renders the diagram; `points` are `(mu, r)` pairs.
pub fn branch_diagram(points: &[(f64, f64)], mu_star: f64, mu2: f64, title: &str) -> String {
    let (mut xl, mut xh, mut yh) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64);
    for &(m, r) in points {
        xl = xl.min(m);
        xh = xh.max(m);
        yh = yh.max(r);
    }
    if points.is_empty() {
        (xl, xh, yh) = (mu_star - 1.0, mu_star + 1.0, 1.0);
    }
    let (x0, x1) = span(xl.min(mu_star), xh.max(mu_star));
    let (y0, y1) = span(0.0, yh);
    let f = Frame { x0, x1, y0: y0.max(0.0), y1 };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{PAD}" y="{PAD}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * PAD,
        H - 2.0 * PAD
    );
    for i in 0..=4 {
        let t = i as f64 / 4.0;
        let (xv, yv) = (f.x0 + t * (f.x1 - f.x0), f.y0 + t * (f.y1 - f.y0));
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{xv:.3e}</text>"#,
            f.px(xv),
            H - PAD + 18.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{yv:.3}</text>"#,
            PAD - 6.0,
            f.py(yv) + 4.0
        );
    }
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">mu</text>"#, W / 2.0, H - 12.0);
    let _ = writeln!(s, r#"<text x="14" y="{:.2}" text-anchor="middle" transform="rotate(-90 14 {:.2})">r</text>"#, H / 2.0, H / 2.0);
    let _ = writeln!(s, r#"<text x="{:.2}" y="28" text-anchor="middle">{}</text>"#, W / 2.0, escape(title));

    // Parabola, clipped to the frame.
    let mut path = String::new();
    let steps = 200;
    for i in 0..=steps {
        let r = f.y0 + (f.y1 - f.y0) * i as f64 / steps as f64;
        let m = mu_star + mu2 * r * r;
        if m < f.x0 || m > f.x1 {
            continue;
        }
        let cmd = if path.is_empty() { 'M' } else { 'L' };
        let _ = write!(path, "{cmd}{:.2},{:.2} ", f.px(m), f.py(r));
    }
    if !path.is_empty() {
        let _ = writeln!(s, r#"<path d="{}" fill="none" stroke="magenta" stroke-width="1.5"/>"#, path.trim_end());
    }
    for &(m, r) in points {
        let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="steelblue"/>"#, f.px(m), f.py(r));
    }
    s.push_str("</svg>\n");
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn well_formed_and_deterministic() {
        let pts = [(0.0, 0.01), (0.001, 0.05), (0.004, 0.1)];
        let a = branch_diagram(&pts, 0.0, 0.4, "a < b");
        assert_eq!(a, branch_diagram(&pts, 0.0, 0.4, "a < b"));
        assert!(a.starts_with("<svg") && a.trim_end().ends_with("</svg>"));
        assert_eq!(a.matches("<circle").count(), 3);
        assert!(a.contains("stroke=\"magenta\""));
        assert!(a.contains("a &lt; b"));
    }

    #[test]
    fn degenerate_inputs_still_render() {
        let s = branch_diagram(&[], 0.0, -0.02, "");
        assert!(s.contains("</svg>"));
        let s = branch_diagram(&[(0.0, 0.0)], 0.0, 0.0, "");
        assert!(!s.contains("NaN"));
    }
}
