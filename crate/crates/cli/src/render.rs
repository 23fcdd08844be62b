//! Deterministic SVG rendering of sets, tilings, flows, and pieces.
//!
//! Two grid axes only, no cyclic factor; axis 0 runs right, axis 1 runs
//! down. Output is byte-stable: fixed palette, fixed element order,
//! fixed numeric formatting.

use anyhow::{bail, Result};
use equideco::{Ambient, CubeTiling, FlowMap, PieceAssignment, PointSet};

const CELL: i64 = 10;

/// Fill colors cycled by piece index.
const PALETTE: [&str; 12] = [
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948",
    "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac", "#2f4b7c", "#a05195",
];

pub enum Layer<'a> {
    Set { points: &'a PointSet, fill: &'a str },
    Tiling(&'a CubeTiling),
    Flow(&'a FlowMap),
    Pieces(&'a PieceAssignment),
}

fn check_ambient(amb: &Ambient) -> Result<()> {
    if amb.d() != 2 || amb.delta_rank() != 0 {
        bail!(
            "rendering needs exactly two grid axes and no cyclic factor, got {} and {}",
            amb.d(),
            amb.delta_rank()
        );
    }
    Ok(())
}

fn cell_rect(out: &mut String, x: i64, y: i64, fill: &str, extra: &str) {
    out.push_str(&format!(
        "  <rect x=\"{}\" y=\"{}\" width=\"{CELL}\" height=\"{CELL}\" fill=\"{fill}\"{extra}/>\n",
        x * CELL,
        y * CELL,
    ));
}

fn render_set(out: &mut String, amb: &Ambient, points: &PointSet, fill: &str) {
    for p in points.iter() {
        let pt = amb.point(p);
        cell_rect(out, pt.coords[0], pt.coords[1], fill, "");
    }
}

fn render_tiling(out: &mut String, tiling: &CubeTiling) {
    for cube in &tiling.cubes {
        out.push_str(&format!(
            "  <rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" \
             stroke=\"#333333\" stroke-width=\"1\"/>\n",
            cube.corner[0] * CELL,
            cube.corner[1] * CELL,
            (cube.extents[0] + 1) * CELL,
            (cube.extents[1] + 1) * CELL,
        ));
    }
}

fn render_flow(out: &mut String, phi: &FlowMap) {
    let amb = phi.ambient();
    let zero = num_rational::Ratio::from_integer(0);
    let sup = phi.sup_norm();
    if sup == zero {
        return;
    }
    for (base, axis) in phi.support() {
        let v = phi.get(base, axis);
        let pt = amb.point(base);
        let (x0, y0) = (
            pt.coords[0] * CELL + CELL / 2,
            pt.coords[1] * CELL + CELL / 2,
        );
        // draw in the direction the value pushes
        let (sign, magnitude) = if v < zero { (-1, -v) } else { (1, v) };
        let (dx, dy) = if axis == 0 { (sign * CELL, 0) } else { (0, sign * CELL) };
        // stroke width 1.0..=3.0 px, scaled by |value| / sup
        let tenths = ((magnitude / sup) * num_rational::Ratio::from_integer(20))
            .to_integer()
            .clamp(0, 20)
            + 10;
        out.push_str(&format!(
            "  <line x1=\"{x0}\" y1=\"{y0}\" x2=\"{}\" y2=\"{}\" stroke=\"#d62728\" \
             stroke-width=\"{}.{}\" marker-end=\"url(#arrow)\"/>\n",
            x0 + dx,
            y0 + dy,
            tenths / 10,
            tenths % 10,
        ));
    }
}

fn render_pieces(out: &mut String, amb: &Ambient, assignment: &PieceAssignment) {
    for (i, piece) in assignment.pieces.iter().enumerate() {
        let fill = PALETTE[i % PALETTE.len()];
        for p in piece.points.iter() {
            let pt = amb.point(p);
            cell_rect(
                out,
                pt.coords[0],
                pt.coords[1],
                fill,
                " stroke=\"#ffffff\" stroke-width=\"0.5\"",
            );
        }
    }
}

/// Renders layers back to front into one SVG document.
pub fn svg_document(amb: &Ambient, layers: &[Layer]) -> Result<String> {
    check_ambient(amb)?;
    let (w, h) = (amb.sides[0] * CELL, amb.sides[1] * CELL);
    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {w} {h}\" \
         width=\"{w}\" height=\"{h}\">\n",
    ));
    out.push_str(
        "  <defs><marker id=\"arrow\" viewBox=\"0 0 6 6\" refX=\"5\" refY=\"3\" \
         markerWidth=\"4\" markerHeight=\"4\" orient=\"auto\">\
         <path d=\"M 0 0 L 6 3 L 0 6 z\" fill=\"#d62728\"/></marker></defs>\n",
    );
    out.push_str(&format!(
        "  <rect x=\"0\" y=\"0\" width=\"{w}\" height=\"{h}\" fill=\"#fafafa\"/>\n",
    ));
    for layer in layers {
        match layer {
            Layer::Set { points, fill } => {
                if points.ambient() != amb {
                    bail!("set layer lives on a different ambient");
                }
                render_set(&mut out, amb, points, fill);
            }
            Layer::Tiling(tiling) => {
                if &tiling.ambient != amb {
                    bail!("tiling layer lives on a different ambient");
                }
                render_tiling(&mut out, tiling);
            }
            Layer::Flow(phi) => {
                if phi.ambient() != amb {
                    bail!("flow layer lives on a different ambient");
                }
                render_flow(&mut out, phi);
            }
            Layer::Pieces(assignment) => {
                if assignment.source.ambient() != amb {
                    bail!("pieces layer lives on a different ambient");
                }
                render_pieces(&mut out, amb, assignment);
            }
        }
    }
    out.push_str("</svg>\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use equideco::{make_ambient, tile_cubes, GridKind};

    fn plane() -> Ambient {
        make_ambient(GridKind::Window, vec![4, 4], vec![]).unwrap()
    }

    #[test]
    fn empty_layer_list_is_valid_svg() {
        let amb = plane();
        let svg = svg_document(&amb, &[]).unwrap();
        assert!(svg.starts_with("<svg "));
        assert!(svg.ends_with("</svg>\n"));
    }

    #[test]
    fn tiling_renders_one_rect_per_tile() {
        let amb = plane();
        let tiling = tile_cubes(&amb, 1).unwrap();
        let svg = svg_document(&amb, &[Layer::Tiling(&tiling)]).unwrap();
        assert_eq!(svg.matches("stroke=\"#333333\"").count(), 16);
    }

    #[test]
    fn rendering_is_deterministic() {
        let amb = plane();
        let a = PointSet::from_indices(&amb, [0, 5, 10]);
        let layers = [Layer::Set {
            points: &a,
            fill: "#4e79a7",
        }];
        let one = svg_document(&amb, &layers).unwrap();
        let two = svg_document(&amb, &layers).unwrap();
        assert_eq!(one, two);
    }

    #[test]
    fn rejects_other_dimensions() {
        let amb = make_ambient(GridKind::Torus, vec![8], vec![]).unwrap();
        assert!(svg_document(&amb, &[]).is_err());
    }
}
