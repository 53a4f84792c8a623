//! Minimal SVG line plots for ladders.

use std::fmt::Write;

use carnot_qr::util::linear_fit;

#[derive(Clone, Debug)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub log_x: bool,
    pub log_y: bool,
    /// Annotate the least-squares slope in the plotted (possibly log) axes.
    pub fit: bool,
}

impl Plot {
    pub fn log_log(title: &str, x_label: &str, y_label: &str, x: Vec<f64>, y: Vec<f64>) -> Self {
        Self {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            x,
            y,
            log_x: true,
            log_y: true,
            fit: true,
        }
    }

    pub fn semi_log(title: &str, x_label: &str, y_label: &str, x: Vec<f64>, y: Vec<f64>) -> Self {
        Self {
            log_y: false,
            fit: false,
            ..Self::log_log(title, x_label, y_label, x, y)
        }
    }
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders the plot; `None` when there is no finite data point to draw.
pub fn emit_plot(plot: &Plot) -> Option<String> {
    let tx = |v: f64| if plot.log_x { v.log10() } else { v };
    let ty = |v: f64| if plot.log_y { v.log10() } else { v };
    let pts: Vec<(f64, f64)> = plot
        .x
        .iter()
        .zip(&plot.y)
        .map(|(&a, &b)| (tx(a), ty(b)))
        .filter(|(a, b)| a.is_finite() && b.is_finite())
        .collect();
    if pts.is_empty() {
        return None;
    }
    let (w, h, m) = (560.0, 400.0, 60.0);
    let bounds = |vals: &mut dyn Iterator<Item = f64>| {
        let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, u), v| (l.min(v), u.max(v)));
        if hi - lo < 1e-12 {
            (lo - 0.5, hi + 0.5)
        } else {
            let pad = 0.05 * (hi - lo);
            (lo - pad, hi + pad)
        }
    };
    let (x0, x1) = bounds(&mut pts.iter().map(|p| p.0));
    let (y0, y1) = bounds(&mut pts.iter().map(|p| p.1));
    let sx = |v: f64| m + (v - x0) / (x1 - x0) * (w - 2.0 * m);
    let sy = |v: f64| h - m - (v - y0) / (y1 - y0) * (h - 2.0 * m);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{m}" y="30" font-family="sans-serif" font-size="15">{}</text>"#, escape(&plot.title));
    let _ = writeln!(
        s,
        r#"<path d="M{m} {a} L{b} {a} M{m} {a} L{m} {m}" stroke="black" fill="none"/>"#,
        a = h - m,
        b = w - m
    );
    let axis = |label: &str, log: bool| if log { format!("log10 {label}") } else { label.to_string() };
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">{}</text>"#,
        w / 2.0,
        h - 20.0,
        escape(&axis(&plot.x_label, plot.log_x))
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{}" font-family="sans-serif" font-size="12" transform="rotate(-90 18 {})" text-anchor="middle">{}</text>"#,
        h / 2.0,
        h / 2.0,
        escape(&axis(&plot.y_label, plot.log_y))
    );
    for (v, pos) in [(x0, m), (x1, w - m)] {
        let _ = writeln!(s, r#"<text x="{pos}" y="{}" font-family="sans-serif" font-size="10" text-anchor="middle">{v:.3}</text>"#, h - m + 14.0);
    }
    for (v, pos) in [(y0, h - m), (y1, m)] {
        let _ = writeln!(s, r#"<text x="{}" y="{pos}" font-family="sans-serif" font-size="10" text-anchor="end">{v:.3}</text>"#, m - 4.0);
    }
    let mut path = String::new();
    for (i, (a, b)) in pts.iter().enumerate() {
        let _ = write!(path, "{}{:.2} {:.2} ", if i == 0 { "M" } else { "L" }, sx(*a), sy(*b));
    }
    let _ = writeln!(s, r#"<path d="{}" stroke="steelblue" stroke-width="2" fill="none"/>"#, path.trim_end());
    for (a, b) in &pts {
        let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="steelblue"/>"#, sx(*a), sy(*b));
    }
    if plot.fit && pts.len() >= 2 {
        let (xs, ys): (Vec<f64>, Vec<f64>) = pts.iter().copied().unzip();
        let (slope, icept) = linear_fit(&xs, &ys);
        let _ = writeln!(
            s,
            r#"<path d="M{:.2} {:.2} L{:.2} {:.2}" stroke="firebrick" stroke-dasharray="5 4" fill="none"/>"#,
            sx(x0),
            sy(icept + slope * x0),
            sx(x1),
            sy(icept + slope * x1)
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="13" fill="firebrick">slope = {slope:.4}</text>"#,
            w - m - 150.0,
            m + 10.0
        );
    }
    s.push_str("</svg>\n");
    Some(s)
}
