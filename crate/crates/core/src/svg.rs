//! Plain SVG 1.1 rendering of planar subdivisions.

use std::fmt::Write;

use crate::polygon::{ConvexPolygon, Point};

/// Pastel colors for region cells, cycled by cell index.
pub const CELL_PALETTE: [&str; 12] = [
    "#8dd3c7", "#ffffb3", "#bebada", "#fb8072", "#80b1d3", "#fdb462", "#b3de69", "#fccde5", "#d9d9d9", "#bc80bd",
    "#ccebc5", "#ffed6f",
];

/// Saturated colors for class labels.
pub const CLASS_PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fill {
    Cell(usize),
    Class(usize),
}

impl Fill {
    fn color(self) -> &'static str {
        match self {
            Fill::Cell(i) => CELL_PALETTE[i % CELL_PALETTE.len()],
            Fill::Class(c) => CLASS_PALETTE[c % CLASS_PALETTE.len()],
        }
    }
}

/// Draws polygons within the axis-aligned `bounds`, then boundary segments
/// on top. The y axis points up in data coordinates.
pub fn render(
    polygons: &[(&ConvexPolygon<f64>, Fill)],
    bounds: (Point<f64>, Point<f64>),
    boundary: &[(Point<f64>, Point<f64>)],
    size: u32,
) -> String {
    let (lo, hi) = bounds;
    let sx = size as f64 / (hi[0] - lo[0]);
    let sy = size as f64 / (hi[1] - lo[1]);
    let map = |p: &Point<f64>| ((p[0] - lo[0]) * sx, (hi[1] - p[1]) * sy);
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{size}" height="{size}" viewBox="0 0 {size} {size}">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{size}" height="{size}" fill="white"/>"#);
    let _ = writeln!(s, r##"<g stroke="#333333" stroke-width="0.3" stroke-linejoin="round">"##);
    for (poly, fill) in polygons {
        let pts: Vec<String> = poly
            .vertices()
            .iter()
            .map(|v| {
                let (x, y) = map(v);
                format!("{x:.4},{y:.4}")
            })
            .collect();
        let _ = writeln!(s, r#"<polygon points="{}" fill="{}"/>"#, pts.join(" "), fill.color());
    }
    let _ = writeln!(s, "</g>");
    if !boundary.is_empty() {
        let _ = writeln!(s, r#"<g stroke="black" stroke-width="2" stroke-linecap="round">"#);
        for (a, b) in boundary {
            let (x1, y1) = map(a);
            let (x2, y2) = map(b);
            let _ = writeln!(s, r#"<line x1="{x1:.4}" y1="{y1:.4}" x2="{x2:.4}" y2="{y2:.4}"/>"#);
        }
        let _ = writeln!(s, "</g>");
    }
    let _ = writeln!(s, "</svg>");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_deterministically() {
        let a = ConvexPolygon::square([0.0, 0.0], 1.0);
        let polys = [(&a, Fill::Cell(0))];
        let one = render(&polys, ([-1.0, -1.0], [1.0, 1.0]), &[([0.0, -1.0], [0.0, 1.0])], 100);
        let two = render(&polys, ([-1.0, -1.0], [1.0, 1.0]), &[([0.0, -1.0], [0.0, 1.0])], 100);
        assert_eq!(one, two);
        assert!(one.contains("<polygon"));
        assert!(one.contains(r#"x1="50.0000" y1="100.0000""#));
    }
}
