//! Self-contained SVG boxplots: box from Q1 to Q3, median line, whiskers to
//! the most extreme points within 1.5 IQR, outliers as dots.

use std::fmt::Write;

#[derive(Debug, Clone, PartialEq)]
pub struct BoxStats {
    pub lower_whisker: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub upper_whisker: f64,
    pub outliers: Vec<f64>,
}

/// Linearly interpolated quantile of sorted data.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn box_stats(values: &[f64]) -> Option<BoxStats> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let (q1, median, q3) = (quantile(&v, 0.25), quantile(&v, 0.5), quantile(&v, 0.75));
    let fence = 1.5 * (q3 - q1);
    let (lo, hi) = (q1 - fence, q3 + fence);
    let inside: Vec<f64> = v.iter().copied().filter(|&x| x >= lo && x <= hi).collect();
    Some(BoxStats {
        lower_whisker: inside[0],
        q1,
        median,
        q3,
        upper_whisker: inside[inside.len() - 1],
        outliers: v.into_iter().filter(|&x| x < lo || x > hi).collect(),
    })
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// One box per group, in the given order. `reference` draws a dashed
/// horizontal line.
pub fn boxplot_svg(
    title: &str,
    y_label: &str,
    groups: &[(String, Vec<f64>)],
    reference: Option<f64>,
) -> String {
    const LEFT: f64 = 70.0;
    const TOP: f64 = 40.0;
    const PLOT_H: f64 = 280.0;
    const SLOT: f64 = 90.0;
    let plot_w = SLOT * groups.len().max(1) as f64;
    let (width, height) = (LEFT + plot_w + 20.0, TOP + PLOT_H + 50.0);

    let stats: Vec<Option<BoxStats>> = groups.iter().map(|(_, v)| box_stats(v)).collect();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (_, v) in groups {
        for &x in v.iter().filter(|x| x.is_finite()) {
            lo = lo.min(x);
            hi = hi.max(x);
        }
    }
    if let Some(r) = reference {
        lo = lo.min(r);
        hi = hi.max(r);
    }
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        (lo, hi) = (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    let (lo, hi) = (lo - pad, hi + pad);
    let y = |v: f64| TOP + PLOT_H * (hi - v) / (hi - lo);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        s,
        r#"<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        width / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">{1}</text>"#,
        TOP + PLOT_H / 2.0,
        escape(y_label)
    );
    let _ = writeln!(
        s,
        r##"<rect x="{LEFT}" y="{TOP}" width="{plot_w}" height="{PLOT_H}" fill="none" stroke="#444"/>"##
    );
    for i in 0..=4 {
        let v = lo + (hi - lo) * f64::from(i) / 4.0;
        let yy = y(v);
        let _ = writeln!(
            s,
            r##"<line x1="{}" y1="{yy:.2}" x2="{LEFT}" y2="{yy:.2}" stroke="#444"/><text x="{}" y="{:.2}" text-anchor="end">{v:.2}</text>"##,
            LEFT - 5.0,
            LEFT - 8.0,
            yy + 4.0
        );
    }
    if let Some(r) = reference {
        let yy = y(r);
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{yy:.2}" x2="{}" y2="{yy:.2}" stroke="#b33" stroke-dasharray="5,4"/>"##,
            LEFT + plot_w
        );
    }
    for (i, ((name, _), st)) in groups.iter().zip(&stats).enumerate() {
        let cx = LEFT + SLOT * (i as f64 + 0.5);
        let _ = writeln!(
            s,
            r#"<text x="{cx}" y="{}" text-anchor="middle">{}</text>"#,
            TOP + PLOT_H + 20.0,
            escape(name)
        );
        let Some(b) = st else { continue };
        let (x0, x1) = (cx - 25.0, cx + 25.0);
        let _ = writeln!(
            s,
            r##"<line x1="{cx}" y1="{:.2}" x2="{cx}" y2="{:.2}" stroke="#222"/><line x1="{cx}" y1="{:.2}" x2="{cx}" y2="{:.2}" stroke="#222"/>"##,
            y(b.lower_whisker),
            y(b.q1),
            y(b.q3),
            y(b.upper_whisker)
        );
        for w in [b.lower_whisker, b.upper_whisker] {
            let _ = writeln!(
                s,
                r##"<line x1="{}" y1="{:.2}" x2="{}" y2="{:.2}" stroke="#222"/>"##,
                cx - 12.0,
                y(w),
                cx + 12.0,
                y(w)
            );
        }
        let _ = writeln!(
            s,
            r##"<rect x="{x0}" y="{:.2}" width="50" height="{:.2}" fill="#9cc3e6" stroke="#222"/>"##,
            y(b.q3),
            (y(b.q1) - y(b.q3)).max(0.5)
        );
        let _ = writeln!(
            s,
            r##"<line x1="{x0}" y1="{0:.2}" x2="{x1}" y2="{0:.2}" stroke="#222" stroke-width="2"/>"##,
            y(b.median)
        );
        for &o in &b.outliers {
            let _ = writeln!(
                s,
                r##"<circle cx="{cx}" cy="{:.2}" r="2.5" fill="none" stroke="#222"/>"##,
                y(o)
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn five_number_summary() {
        let b = box_stats(&[1.0, 2.0, 3.0, 4.0, 5.0, 100.0]).unwrap();
        assert_eq!(b.median, 3.5);
        assert_eq!(b.q1, 2.25);
        assert_eq!(b.q3, 4.75);
        assert_eq!(b.lower_whisker, 1.0);
        assert_eq!(b.upper_whisker, 5.0);
        assert_eq!(b.outliers, vec![100.0]);
        assert!(box_stats(&[]).is_none());
        let one = box_stats(&[2.0]).unwrap();
        assert_eq!((one.q1, one.median, one.q3), (2.0, 2.0, 2.0));
    }

    #[test]
    fn markup_is_balanced_and_escaped() {
        let svg = boxplot_svg(
            "a < b & c",
            "eff",
            &[
                ("x".into(), vec![0.5, 0.7, 0.9]),
                ("y".into(), vec![]),
                ("z".into(), vec![1.0; 4]),
            ],
            Some(0.5),
        );
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("a &lt; b &amp; c"));
        assert_eq!(svg.matches("<text").count(), svg.matches("</text>").count());
        assert!(!svg.contains("NaN") && !svg.contains("inf"));
    }
}
