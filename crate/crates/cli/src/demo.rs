//! Rasterized irrational orbits of planar shapes and the disk-to-square demo.
//!
//! A window coordinate vector `v` names the group element with translation
//! part `v`; applied to a base point of the continuous torus `[0,1)^2` it
//! lands at `base + sum_i v_i * t_i (mod 1)`. A shape is pulled back
//! through this evaluation map to a subset of the window, so shape
//! membership questions about the orbit become point-set questions here.

use std::f64::consts::PI;

use anyhow::{bail, Result};
use equideco::{
    decompose, equidistribution_report, make_ambient, Ambient, DecomposeReport,
    DiscrepancyReport, Error, GridKind, PieceAssignment, PointSet,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A subset of the unit square `[0,1)^2`.
#[derive(Clone, Debug)]
pub enum Shape {
    Disk { cx: f64, cy: f64, r: f64 },
    Rect { x0: f64, y0: f64, x1: f64, y1: f64 },
    /// Row-major grid of cells over the unit square, row 0 at `y = 0`.
    Bitmap { rows: Vec<Vec<bool>> },
}

impl Shape {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        match self {
            Shape::Disk { cx, cy, r } => {
                let (dx, dy) = (x - cx, y - cy);
                dx * dx + dy * dy <= r * r
            }
            Shape::Rect { x0, y0, x1, y1 } => *x0 <= x && x < *x1 && *y0 <= y && y < *y1,
            Shape::Bitmap { rows } => {
                if rows.is_empty() || rows[0].is_empty() {
                    return false;
                }
                let (h, w) = (rows.len(), rows[0].len());
                let row = ((y * h as f64) as usize).min(h - 1);
                let col = ((x * w as f64) as usize).min(w - 1);
                rows[row].get(col).copied().unwrap_or(false)
            }
        }
    }
}

/// Pulls `shape` back through the orbit evaluation map to the window.
pub fn rasterize_orbit(
    amb: &Ambient,
    base: [f64; 2],
    vectors: &[[f64; 2]],
    shape: &Shape,
) -> Result<PointSet> {
    if amb.delta_rank() != 0 {
        bail!("orbit rasterization needs a pure grid ambient");
    }
    if vectors.len() != amb.d() {
        bail!(
            "need one translation vector per grid axis: {} vectors for {} axes",
            vectors.len(),
            amb.d()
        );
    }
    let mut idxs = Vec::new();
    for idx in 0..amb.len() {
        let p = amb.point(idx);
        let mut x = base[0];
        let mut y = base[1];
        for (c, t) in p.coords.iter().zip(vectors) {
            x += *c as f64 * t[0];
            y += *c as f64 * t[1];
        }
        if shape.contains(x.rem_euclid(1.0), y.rem_euclid(1.0)) {
            idxs.push(idx);
        }
    }
    Ok(PointSet::from_indices(amb, idxs))
}

/// Best rational approximation `p/q` with `q <= max_q` and error below
/// `1e-9`, found by walking continued-fraction convergents.
fn near_rational(x: f64, max_q: i64) -> Option<(i64, i64)> {
    let (mut p_prev, mut q_prev) = (1i64, 0i64);
    let (mut p, mut q) = (x.floor() as i64, 1i64);
    let mut rest = x;
    for _ in 0..40 {
        if q > max_q {
            return None;
        }
        if (x - p as f64 / q as f64).abs() < 1e-9 {
            return Some((p, q));
        }
        let frac = rest - rest.floor();
        if frac < 1e-12 {
            return None;
        }
        rest = 1.0 / frac;
        let a = rest.floor() as i64;
        let (p_next, q_next) = (a * p + p_prev, a * q + q_prev);
        (p_prev, q_prev) = (p, q);
        (p, q) = (p_next, q_next);
    }
    None
}

/// Flags translation coordinates close to rationals with denominator at
/// most `max_q`: the orbit then repeats with period `q` along that axis
/// and rasterized sets stop filling the torus evenly.
pub fn rational_dependence_warnings(vectors: &[[f64; 2]], max_q: i64) -> Vec<String> {
    let mut warnings = Vec::new();
    for (i, v) in vectors.iter().enumerate() {
        for (axis, &x) in v.iter().enumerate() {
            if let Some((p, q)) = near_rational(x, max_q) {
                warnings.push(format!(
                    "translation {i} coordinate {axis} is within 1e-9 of {p}/{q}; \
                     the orbit repeats with period {q} along this axis"
                ));
            }
        }
    }
    warnings
}

/// Translation vectors built from fractional parts of `sqrt(2)`, `sqrt(3)`,
/// `sqrt(5)` and the golden ratio: no small-denominator rational relations,
/// so orbits fill the torus evenly.
pub fn default_vectors() -> [[f64; 2]; 2] {
    [
        [2f64.sqrt().fract(), 3f64.sqrt().fract()],
        [5f64.sqrt().fract(), (1.0 + 5f64.sqrt()) / 2.0 - 1.0],
    ]
}

pub struct DemoConfig {
    /// Window side; the ambient is `side x side` without wrapping.
    pub side: i64,
    /// Transport distance handed to the decomposition.
    pub k: usize,
    /// Largest window extent in the measured discrepancy reports.
    pub n_max: i64,
    pub seed: u64,
}

pub enum DemoOutcome {
    Decomposed {
        assignment: PieceAssignment,
        report: DecomposeReport,
    },
    /// The rasterized instance fails the distance-`k` condition; the error
    /// carries the witness side and deficit.
    Obstructed { error: Error },
}

pub struct DemoResult {
    pub ambient: Ambient,
    pub base: [f64; 2],
    pub vectors: [[f64; 2]; 2],
    pub warnings: Vec<String>,
    pub disk: PointSet,
    pub square: PointSet,
    /// Counts before trimming to a common size.
    pub raw_counts: (usize, usize),
    /// Points dropped from (disk, square) to equalize counts.
    pub dropped: (usize, usize),
    pub disk_discrepancy: DiscrepancyReport,
    pub square_discrepancy: DiscrepancyReport,
    pub outcome: DemoOutcome,
}

/// Drops evenly spaced points from the larger set until the counts match,
/// keeping the drop imbalance spread thin instead of pooled in one corner.
fn trim_to_equal(a: PointSet, b: PointSet, amb: &Ambient) -> (PointSet, PointSet, usize, usize) {
    let thin = |set: PointSet, keep: usize| -> PointSet {
        let len = set.len();
        let drop = len - keep;
        if drop == 0 {
            return set;
        }
        let doomed = |pos: usize| (pos * drop / len) != ((pos + 1) * drop / len);
        PointSet::from_indices(
            amb,
            set.iter()
                .enumerate()
                .filter(|&(pos, _)| !doomed(pos))
                .map(|(_, idx)| idx),
        )
    };
    let (na, nb) = (a.len(), b.len());
    let keep = na.min(nb);
    (thin(a, keep), thin(b, keep), na - keep, nb - keep)
}

/// Rasterizes an equal-area disk and square through a seeded irrational
/// orbit, trims them to matched counts, and runs the full decomposition.
pub fn circle_square_demo(cfg: &DemoConfig) -> Result<DemoResult> {
    if cfg.side < 2 {
        bail!("window side must be at least 2");
    }
    let amb = make_ambient(GridKind::Window, vec![cfg.side, cfg.side], vec![])?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let base = [rng.gen::<f64>(), rng.gen::<f64>()];
    let vectors = default_vectors();
    let warnings = rational_dependence_warnings(&vectors, cfg.side);
    // disk and square of area 1/4 each, both centered
    let disk_shape = Shape::Disk {
        cx: 0.5,
        cy: 0.5,
        r: 0.5 / PI.sqrt(),
    };
    let square_shape = Shape::Rect {
        x0: 0.25,
        y0: 0.25,
        x1: 0.75,
        y1: 0.75,
    };
    let raw_disk = rasterize_orbit(&amb, base, &vectors, &disk_shape)?;
    let raw_square = rasterize_orbit(&amb, base, &vectors, &square_shape)?;
    let raw_counts = (raw_disk.len(), raw_square.len());
    let (disk, square, dropped_disk, dropped_square) = trim_to_equal(raw_disk, raw_square, &amb);
    let disk_discrepancy = equidistribution_report(&disk, cfg.n_max)?;
    let square_discrepancy = equidistribution_report(&square, cfg.n_max)?;
    let outcome = match decompose(&disk, &square, cfg.k, None) {
        Ok((assignment, report)) => DemoOutcome::Decomposed { assignment, report },
        Err(error @ Error::HallViolation { .. }) => DemoOutcome::Obstructed { error },
        Err(e) => return Err(e.into()),
    };
    Ok(DemoResult {
        ambient: amb,
        base,
        vectors,
        warnings,
        disk,
        square,
        raw_counts,
        dropped: (dropped_disk, dropped_square),
        disk_discrepancy,
        square_discrepancy,
        outcome,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disk_membership_is_euclidean() {
        let disk = Shape::Disk {
            cx: 0.5,
            cy: 0.5,
            r: 0.25,
        };
        assert!(disk.contains(0.5, 0.5));
        assert!(disk.contains(0.5, 0.74));
        assert!(!disk.contains(0.5, 0.76));
        assert!(!disk.contains(0.1, 0.1));
    }

    #[test]
    fn bitmap_maps_unit_square_to_cells() {
        let shape = Shape::Bitmap {
            rows: vec![vec![true, false], vec![false, true]],
        };
        assert!(shape.contains(0.1, 0.1));
        assert!(!shape.contains(0.9, 0.1));
        assert!(!shape.contains(0.1, 0.9));
        assert!(shape.contains(0.9, 0.9));
    }

    #[test]
    fn rational_coordinates_are_flagged() {
        let warnings = rational_dependence_warnings(&[[0.5, 2f64.sqrt().fract()]], 64);
        assert_eq!(warnings.len(), 1);
        assert!(warnings[0].contains("1/2"));
    }

    #[test]
    fn default_vectors_raise_no_warnings() {
        assert!(rational_dependence_warnings(&default_vectors(), 64).is_empty());
    }

    #[test]
    fn rational_vector_rasterizes_periodically() {
        let amb = make_ambient(GridKind::Window, vec![8, 8], vec![]).unwrap();
        let shape = Shape::Rect {
            x0: 0.0,
            y0: 0.0,
            x1: 0.5,
            y1: 1.0,
        };
        let set = rasterize_orbit(&amb, [0.0, 0.0], &[[0.5, 0.0], [0.0, 0.5]], &shape).unwrap();
        // x-coordinate alternates 0.0, 0.5 with the first window axis
        for idx in set.iter() {
            assert_eq!(amb.point(idx).coords[0] % 2, 0);
        }
        assert_eq!(set.len(), 32);
    }

    #[test]
    fn equal_area_shapes_rasterize_to_near_equal_counts() {
        let cfg = DemoConfig {
            side: 32,
            k: 3,
            n_max: 8,
            seed: 0,
        };
        let demo = circle_square_demo(&cfg).unwrap();
        assert_eq!(demo.disk.len(), demo.square.len());
        let n = demo.ambient.len() as f64;
        let density = demo.disk.len() as f64 / n;
        assert!((density - 0.25).abs() < 0.05, "density {density}");
        assert!(demo.warnings.is_empty());
    }
}
