//! Deterministic SVG rendering of a [`DiagramModel`].

use std::f64::consts::PI;
use std::fmt::Write;

use super::diagram::{DiagramMode, DiagramModel, Side};
use super::matrix::MatrixModel;
use super::{polar_to_xy, LayoutError};

#[derive(Clone, Debug, PartialEq)]
pub struct Palette {
    pub background: String,
    pub outline: String,
    pub node: String,
    /// Greyscale ends of the spread ring.
    pub ring_low: String,
    pub ring_high: String,
    pub first_selection: String,
    pub second_selection: String,
}

impl Default for Palette {
    fn default() -> Self {
        Self {
            background: "#ffffff".into(),
            outline: "#bdbdbd".into(),
            node: "#424242".into(),
            ring_low: "#f5f5f5".into(),
            ring_high: "#212121".into(),
            first_selection: "#d32f2f".into(),
            second_selection: "#1976d2".into(),
        }
    }
}

fn f(v: f64) -> String {
    let s = format!("{v:.3}");
    if s == "-0.000" {
        "0.000".into()
    } else {
        s
    }
}

fn arc_segment(c: f64, r0: f64, r1: f64, a0: f64, a1: f64) -> String {
    let p = |r: f64, a: f64| {
        let q = polar_to_xy(a, r);
        (f(c + q[0]), f(c + q[1]))
    };
    let large = if a1 - a0 > PI { 1 } else { 0 };
    let (x0, y0) = p(r1, a0);
    let (x1, y1) = p(r1, a1);
    let (x2, y2) = p(r0, a1);
    let (x3, y3) = p(r0, a0);
    format!(
        "M{x0} {y0} A{r1} {r1} 0 {large} 1 {x1} {y1} L{x2} {y2} A{r0} {r0} 0 {large} 0 {x3} {y3} Z",
        r1 = f(r1),
        r0 = f(r0)
    )
}

/// Renders the diagram into a `size`×`size` SVG document. Edges are drawn
/// in rank order, so stronger dependences overdraw weaker ones.
pub fn export_svg(d: &DiagramModel, size: u32, palette: &Palette) -> Result<String, LayoutError> {
    if size == 0 {
        return Err(LayoutError::ZeroViewport);
    }
    let s = size as f64;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">"#
    );
    let _ = writeln!(out, r#"<rect class="background" width="{size}" height="{size}" fill="{}"/>"#, palette.background);
    match (&d.mode, &d.matrix) {
        (DiagramMode::Matrix, Some(m)) => render_matrix(&mut out, m, s, palette),
        _ => render_chord(&mut out, d, s, palette),
    }
    out.push_str("</svg>\n");
    Ok(out)
}

fn grey(v: f64, max: f64, palette: &Palette) -> String {
    let t = if max > 0.0 { v / max } else { 0.0 };
    super::diagram::color_for(t, [0.0, 1.0], &palette.ring_low, &palette.ring_high)
}

fn render_chord(out: &mut String, d: &DiagramModel, s: f64, palette: &Palette) {
    let c = s / 2.0;
    let r = s * 0.38;
    let _ = writeln!(
        out,
        r#"<circle class="outline" cx="{}" cy="{}" r="{}" fill="none" stroke="{}"/>"#,
        f(c),
        f(c),
        f(r),
        palette.outline
    );

    // spread ring, one band per variable
    let n_vars = d.variables.len().max(1);
    let band = r * 0.06;
    let max_spread: Vec<f64> = (0..n_vars)
        .map(|v| d.nodes.iter().filter_map(|n| n.spread.get(v).copied().flatten()).fold(0.0, f64::max))
        .collect();
    let _ = writeln!(out, r#"<g class="ring">"#);
    let n_a = d.nodes.iter().filter(|n| n.side == Some(Side::A)).count();
    let n_b = d.nodes.iter().filter(|n| n.side == Some(Side::B)).count();
    for n in &d.nodes {
        let half = match n.side {
            None => PI / d.nodes.len().max(1) as f64,
            Some(Side::A) => PI / 2.0 / n_a.max(1) as f64,
            Some(Side::B) => PI / 2.0 / n_b.max(1) as f64,
        };
        for v in 0..n_vars {
            let r0 = r * 1.03 + v as f64 * band;
            let fill = match n.spread.get(v).copied().flatten() {
                Some(x) => grey(x, max_spread[v], palette),
                None => palette.background.clone(),
            };
            let _ = writeln!(
                out,
                r#"<path class="ring" data-node="{}" data-variable="{v}" d="{}" fill="{fill}" stroke="{}" stroke-width="0.5"/>"#,
                n.id,
                arc_segment(c, r0, r0 + band, n.angle - half, n.angle + half),
                palette.outline
            );
        }
    }
    let _ = writeln!(out, "</g>");

    if d.mode == DiagramMode::Focus && d.selection.is_some() {
        let ro = r * 1.03 + n_vars as f64 * band + 2.0;
        for (a0, a1, color, tip) in [
            (PI / 2.0, 1.5 * PI, &palette.first_selection, PI),
            (-PI / 2.0, PI / 2.0, &palette.second_selection, 0.0),
        ] {
            let p0 = polar_to_xy(a0, ro);
            let p1 = polar_to_xy(a1, ro);
            let _ = writeln!(
                out,
                r#"<path class="semicircle" d="M{} {} A{} {} 0 0 1 {} {}" fill="none" stroke="{color}" stroke-width="2"/>"#,
                f(c + p0[0]),
                f(c + p0[1]),
                f(ro),
                f(ro),
                f(c + p1[0]),
                f(c + p1[1])
            );
            let t = polar_to_xy(tip, ro + 4.0);
            let l = polar_to_xy(tip - 0.04, ro + 16.0);
            let rr = polar_to_xy(tip + 0.04, ro + 16.0);
            let _ = writeln!(
                out,
                r#"<polygon class="selection" points="{},{} {},{} {},{}" fill="{color}"/>"#,
                f(c + t[0]),
                f(c + t[1]),
                f(c + l[0]),
                f(c + l[1]),
                f(c + rr[0]),
                f(c + rr[1])
            );
        }
    }

    let _ = writeln!(out, r#"<g class="edges" fill="none">"#);
    for e in &d.edges {
        let mut path = String::new();
        for (i, p) in e.polyline.iter().enumerate() {
            let _ = write!(path, "{}{} {}", if i == 0 { "M" } else { " L" }, f(c + r * p[0]), f(c + r * p[1]));
        }
        let _ = writeln!(
            out,
            r#"<path class="edge" data-id="{}" d="{path}" stroke="{}" stroke-opacity="0.8" stroke-width="1.2"/>"#,
            e.id, e.color
        );
    }
    let _ = writeln!(out, "</g>");

    let _ = writeln!(out, r#"<g class="nodes">"#);
    for n in &d.nodes {
        let p = polar_to_xy(n.angle, r);
        let _ = writeln!(
            out,
            r#"<circle class="node" data-node="{}" cx="{}" cy="{}" r="{}" fill="{}"/>"#,
            n.id,
            f(c + p[0]),
            f(c + p[1]),
            f((s * 0.006).max(1.5)),
            palette.node
        );
    }
    let _ = writeln!(out, "</g>");
}

fn render_matrix(out: &mut String, m: &MatrixModel, s: f64, palette: &Palette) {
    let n = m.size().max(1) as f64;
    let margin = s * 0.06;
    let cell = (s - 2.0 * margin) / n;
    let max_top = m.margin_top.iter().flatten().fold(0.0, |a: f64, &b| a.max(b));
    let max_left = m.margin_left.iter().flatten().fold(0.0, |a: f64, &b| a.max(b));
    let _ = writeln!(out, r#"<g class="margins">"#);
    for i in 0..m.size() {
        let top = m.margin_top[i].map_or(palette.background.clone(), |v| grey(v, max_top, palette));
        let left = m.margin_left[i].map_or(palette.background.clone(), |v| grey(v, max_left, palette));
        let _ = writeln!(
            out,
            r#"<rect class="margin" data-variable="{}" x="{}" y="{}" width="{}" height="{}" fill="{top}"/>"#,
            m.column_variable,
            f(margin + i as f64 * cell),
            f(margin * 0.2),
            f(cell),
            f(margin * 0.6)
        );
        let _ = writeln!(
            out,
            r#"<rect class="margin" data-variable="{}" x="{}" y="{}" width="{}" height="{}" fill="{left}"/>"#,
            m.row_variable,
            f(margin * 0.2),
            f(margin + i as f64 * cell),
            f(margin * 0.6),
            f(cell)
        );
    }
    let _ = writeln!(out, "</g>");
    let _ = writeln!(out, r#"<g class="cells">"#);
    for (r, row) in m.cells.iter().enumerate() {
        for (c, cellv) in row.iter().enumerate() {
            let _ = writeln!(
                out,
                r#"<rect class="cell" data-row="{r}" data-col="{c}" data-status="{}" x="{}" y="{}" width="{}" height="{}" fill="{}"/>"#,
                match cellv.status {
                    super::EdgeStatus::Computed => "computed",
                    super::EdgeStatus::Pending => "pending",
                    super::EdgeStatus::Undefined => "undefined",
                },
                f(margin + c as f64 * cell),
                f(margin + r as f64 * cell),
                f(cell),
                f(cell),
                cellv.color
            );
        }
    }
    let _ = writeln!(out, "</g>");
}
