//! Static SVG rendering of polygon lists.

use std::fmt::Write;

use hzsvse::geometry::Polygon;

const SIZE: f64 = 480.0;
const MARGIN: f64 = 48.0;
const PALETTE: [&str; 6] = ["#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860"];

/// One `<polygon>` per entry, coloured by `group` (e.g. connected region).
/// Each axis is scaled independently to fill the plot area.
pub fn render(polys: &[Polygon], group: &[usize], title: &str) -> String {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for v in polys.iter().flat_map(|p| &p.vertices) {
        for i in 0..2 {
            lo[i] = lo[i].min(v[i]);
            hi[i] = hi[i].max(v[i]);
        }
    }
    if !lo[0].is_finite() {
        lo = [0.0, 0.0];
        hi = [1.0, 1.0];
    }
    for i in 0..2 {
        if hi[i] - lo[i] < 1e-9 {
            lo[i] -= 0.5;
            hi[i] += 0.5;
        }
    }
    let span = SIZE - 2.0 * MARGIN;
    let sx = |x: f64| MARGIN + (x - lo[0]) / (hi[0] - lo[0]) * span;
    let sy = |y: f64| SIZE - MARGIN - (y - lo[1]) / (hi[1] - lo[1]) * span;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" font-size="14" text-anchor="middle" font-family="sans-serif">{}</text>"#,
        SIZE / 2.0,
        escape(title)
    );
    for (k, p) in polys.iter().enumerate() {
        let pts: Vec<String> = p
            .vertices
            .iter()
            .map(|v| format!("{:.3},{:.3}", sx(v[0]), sy(v[1])))
            .collect();
        let colour = PALETTE[group.get(k).copied().unwrap_or(0) % PALETTE.len()];
        let _ = writeln!(
            s,
            r#"<polygon points="{}" fill="{colour}" fill-opacity="0.45" stroke="{colour}" stroke-width="1"/>"#,
            pts.join(" ")
        );
    }
    // Frame and extreme tick labels.
    let _ = writeln!(
        s,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{span}" height="{span}" fill="none" stroke="black"/>"#
    );
    let label = |s: &mut String, x: f64, y: f64, anchor: &str, v: f64| {
        let _ = writeln!(
            s,
            r#"<text x="{x:.1}" y="{y:.1}" font-size="11" text-anchor="{anchor}" font-family="sans-serif">{v:.3}</text>"#
        );
    };
    label(&mut s, MARGIN, SIZE - MARGIN + 16.0, "start", lo[0]);
    label(&mut s, SIZE - MARGIN, SIZE - MARGIN + 16.0, "end", hi[0]);
    label(&mut s, MARGIN - 4.0, SIZE - MARGIN, "end", lo[1]);
    label(&mut s, MARGIN - 4.0, MARGIN + 10.0, "end", hi[1]);
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
    fn one_polygon_per_input() {
        let p = Polygon::rectangle([0.0, 0.0], [1.0, 2.0]);
        let s = render(&[p.clone(), p], &[0, 1], "a<b");
        assert_eq!(s.matches("<polygon").count(), 2);
        assert!(s.contains("a&lt;b"));
    }

    #[test]
    fn degenerate_extent() {
        let s = render(&[Polygon::new(vec![[1.0, 1.0]])], &[], "");
        assert!(!s.contains("NaN"));
    }
}
