//! Minimal static SVG plots: pairwise scatter matrices and scree lines.

use std::fmt::Write;

const PANEL: f64 = 120.0;
const GAP: f64 = 8.0;
const MARGIN: f64 = 30.0;

/// A point set drawn as one scatter matrix; `colors[i]` is an SVG color.
pub struct ScatterBlock<'a> {
    pub title: &'a str,
    pub points: &'a [Vec<f64>],
    pub colors: &'a [&'a str],
}

fn range(blocks: &[ScatterBlock<'_>], j: usize) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for b in blocks {
        for p in b.points {
            lo = lo.min(p[j]);
            hi = hi.max(p[j]);
        }
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let pad = 0.05 * (hi - lo).max(1e-9);
    (lo - pad, hi + pad)
}

/// Side-by-side scatter matrices sharing axis ranges. Returns `None` when
/// the dimension exceeds 6 (the matrix would be unreadable) or is below 2.
pub fn scatter_matrix(blocks: &[ScatterBlock<'_>], labels: &[String]) -> Option<String> {
    let d = labels.len();
    if !(2..=6).contains(&d) {
        return None;
    }
    let ranges: Vec<(f64, f64)> = (0..d).map(|j| range(blocks, j)).collect();
    let block_w = d as f64 * (PANEL + GAP);
    let width = MARGIN + blocks.len() as f64 * (block_w + MARGIN);
    let height = 2.0 * MARGIN + block_w;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (bi, block) in blocks.iter().enumerate() {
        let x0 = MARGIN + bi as f64 * (block_w + MARGIN);
        let _ = writeln!(s, r#"<text x="{x0:.1}" y="{:.1}" font-size="13">{}</text>"#, MARGIN - 10.0, block.title);
        for r in 0..d {
            for c in 0..d {
                let px = x0 + c as f64 * (PANEL + GAP);
                let py = MARGIN + r as f64 * (PANEL + GAP);
                let _ = writeln!(
                    s,
                    r##"<rect x="{px:.1}" y="{py:.1}" width="{PANEL}" height="{PANEL}" fill="none" stroke="#999"/>"##
                );
                if r == c {
                    let _ = writeln!(
                        s,
                        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
                        px + PANEL / 2.0,
                        py + PANEL / 2.0,
                        labels[r]
                    );
                    continue;
                }
                let (xl, xh) = ranges[c];
                let (yl, yh) = ranges[r];
                for (p, color) in block.points.iter().zip(block.colors) {
                    let cx = px + (p[c] - xl) / (xh - xl) * PANEL;
                    let cy = py + PANEL - (p[r] - yl) / (yh - yl) * PANEL;
                    let _ = writeln!(s, r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="1.6" fill="{color}"/>"#);
                }
            }
        }
    }
    s.push_str("</svg>\n");
    Some(s)
}

/// Eigenvalues against their index, as a polyline with markers.
pub fn scree_plot(values: &[(usize, f64)], title: &str) -> String {
    let (w, h) = (480.0, 320.0);
    let (left, right, top, bottom) = (60.0, 20.0, 30.0, 40.0);
    let max = values.iter().map(|v| v.1).fold(0.0f64, f64::max).max(1e-300);
    let count = values.len().max(2) as f64;
    let x = |i: usize| left + (i as f64 - 1.0) / (count - 1.0) * (w - left - right);
    let y = |v: f64| top + (1.0 - v.max(0.0) / max) * (h - top - bottom);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="11">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{left}" y="18" font-size="13">{title}</text>"#);
    let _ = writeln!(
        s,
        r#"<path d="M{left} {top} V{:.1} H{:.1}" fill="none" stroke="black"/>"#,
        h - bottom,
        w - right
    );
    let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{max:.3e}</text>"#, left - 4.0, top + 4.0);
    let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">0</text>"#, left - 4.0, h - bottom);
    let pts: Vec<String> = values.iter().map(|&(i, v)| format!("{:.2},{:.2}", x(i), y(v))).collect();
    let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="steelblue"/>"#, pts.join(" "));
    for &(i, v) in values {
        let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="steelblue"/>"#, x(i), y(v));
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.1}" text-anchor="middle">{i}</text>"#, x(i), h - bottom + 14.0);
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scatter_has_one_circle_per_point_and_panel() {
        let pts = vec![vec![0.0, 1.0, 0.5], vec![1.0, 0.0, 0.2]];
        let labels: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let block = ScatterBlock { title: "x", points: &pts, colors: &["red", "black"] };
        let svg = scatter_matrix(&[block], &labels).unwrap();
        // 6 off-diagonal panels, 2 points each
        assert_eq!(svg.matches("<circle").count(), 12);
        assert!(scatter_matrix(&[], &labels[..1]).is_none());
    }

    #[test]
    fn scree_marks_every_value() {
        let svg = scree_plot(&[(1, 0.7), (2, 0.2), (3, 0.05)], "scree");
        assert_eq!(svg.matches("<circle").count(), 3);
        assert!(svg.starts_with("<svg"));
    }
}
