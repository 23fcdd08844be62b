//! Cube tilings, the meet of cube families, nested families, and
//! almost-invariant tile cores.
//!
//! A tiling cuts every axis into segments of length `n` or `n + 1` and takes
//! products, so each tile is a cube and the tiles partition the grid part of
//! the ambient exactly (cyclic fibers ride along wholesale). Nested families
//! stack several tilings with fast-growing sides; cutting each stage by
//! interiors of all later stages forces the key geometric property used by
//! the rounding cascade: two cubes from any stages are either far apart
//! (disjoint neighborhoods) or one sits strictly inside the other.

use num_rational::Ratio;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::lattice::{Ambient, CubeSpec, GridKind, PointSet};
use crate::Error;

/// Partition of the grid part into cubes with sides `n` or `n + 1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CubeTiling {
    pub ambient: Ambient,
    pub n: i64,
    /// Tiles in row-major segment order; [`CubeTiling::tile_of`] indexes
    /// into this.
    pub cubes: Vec<CubeSpec>,
    /// Per-axis segments as (start, length), in tiling order.
    pub axis_segments: Vec<Vec<(i64, i64)>>,
    /// Per-axis shift applied before segmenting.
    pub offsets: Vec<i64>,
}

/// Greedy decomposition of `total` into parts `n` and `n + 1`, preferring
/// as many `n`-parts as possible, `n`-parts first.
fn segment_lengths(total: i64, n: i64) -> Result<Vec<i64>, Error> {
    let b = total.rem_euclid(n);
    if b * (n + 1) > total {
        return Err(Error::Infeasible(format!(
            "{total} is not a sum of parts {n} and {}",
            n + 1
        )));
    }
    let a = (total - b * (n + 1)) / n;
    let mut parts = vec![n; a as usize];
    parts.extend(std::iter::repeat(n + 1).take(b as usize));
    Ok(parts)
}

pub(crate) fn tile_cubes_with_offsets(
    ambient: &Ambient,
    n: i64,
    offsets: &[i64],
) -> Result<CubeTiling, Error> {
    if n < 1 {
        return Err(Error::InvalidArgument("tile side must be at least 1".into()));
    }
    if ambient.d() == 0 {
        return Err(Error::InvalidArgument(
            "tiling needs at least one grid axis".into(),
        ));
    }
    if offsets.len() != ambient.d() {
        return Err(Error::InvalidArgument("offset dimension mismatch".into()));
    }
    if ambient.kind == GridKind::Window && offsets.iter().any(|&o| o != 0) {
        return Err(Error::InvalidArgument(
            "window ambients cannot shift tilings".into(),
        ));
    }
    let mut axis_segments = Vec::with_capacity(ambient.d());
    for (axis, &side) in ambient.sides.iter().enumerate() {
        let mut start = offsets[axis].rem_euclid(side.max(1));
        let mut segs = Vec::new();
        for len in segment_lengths(side, n)? {
            segs.push((start, len));
            start = (start + len).rem_euclid(side);
        }
        axis_segments.push(segs);
    }
    // product of per-axis segments, odometer order
    let mut cubes = Vec::new();
    let mut choice = vec![0usize; ambient.d()];
    loop {
        let corner: Vec<i64> = (0..ambient.d())
            .map(|a| axis_segments[a][choice[a]].0)
            .collect();
        let extents: Vec<i64> = (0..ambient.d())
            .map(|a| axis_segments[a][choice[a]].1 - 1)
            .collect();
        cubes.push(CubeSpec { corner, extents });
        let mut axis = ambient.d();
        let mut done = false;
        loop {
            if axis == 0 {
                done = true;
                break;
            }
            axis -= 1;
            if choice[axis] + 1 < axis_segments[axis].len() {
                choice[axis] += 1;
                break;
            }
            choice[axis] = 0;
        }
        if done {
            break;
        }
    }
    Ok(CubeTiling {
        ambient: ambient.clone(),
        n,
        cubes,
        axis_segments,
        offsets: offsets.to_vec(),
    })
}

/// Tiles the grid part by cubes with sides `n` or `n + 1` (greedy segment
/// decomposition per axis, `n`-segments first).
pub fn tile_cubes(ambient: &Ambient, n: i64) -> Result<CubeTiling, Error> {
    tile_cubes_with_offsets(ambient, n, &vec![0; ambient.d()])
}

impl CubeTiling {
    /// Index of the tile containing grid coordinate vector `coords`.
    pub fn tile_of(&self, coords: &[i64]) -> usize {
        let mut idx = 0usize;
        for axis in 0..self.ambient.d() {
            idx = idx * self.axis_segments[axis].len() + self.segment_of(axis, coords[axis]);
        }
        idx
    }

    fn segment_of(&self, axis: usize, coord: i64) -> usize {
        let side = self.ambient.sides[axis];
        let rel = (coord - self.offsets[axis]).rem_euclid(side);
        // segments partition [0, side) in the offset frame
        let mut cum = 0i64;
        for (i, &(_, len)) in self.axis_segments[axis].iter().enumerate() {
            cum += len;
            if rel < cum {
                return i;
            }
        }
        unreachable!("segments cover the axis");
    }

    /// Per-axis segment indices whose segments can meet an interval of the
    /// given extent starting at `corner`.
    fn segments_covering(&self, axis: usize, corner: i64, extent: i64) -> Vec<usize> {
        let count = self.axis_segments[axis].len();
        let first = self.segment_of(axis, corner);
        let mut out = vec![first];
        let mut covered = {
            let (s, len) = self.axis_segments[axis][first];
            let side = self.ambient.sides[axis];
            len - (corner - s).rem_euclid(side)
        };
        let mut cur = first;
        while covered <= extent && out.len() < count {
            cur = (cur + 1) % count;
            out.push(cur);
            covered += self.axis_segments[axis][cur].1;
        }
        out
    }

    /// Tile indices whose tiles can meet `cube`.
    pub fn tiles_overlapping(&self, cube: &CubeSpec) -> Vec<usize> {
        let d = self.ambient.d();
        let per_axis: Vec<Vec<usize>> = (0..d)
            .map(|a| self.segments_covering(a, cube.corner[a], cube.extents[a]))
            .collect();
        let mut out = vec![0usize];
        for axis in 0..d {
            let stride = self.axis_segments[axis].len();
            let mut next = Vec::with_capacity(out.len() * per_axis[axis].len());
            for &stem in &out {
                for &seg in &per_axis[axis] {
                    next.push(stem * stride + seg);
                }
            }
            out = next;
        }
        out
    }
}

/// Shrinks every cube by one layer per face, `k` times; cubes that empty
/// out are dropped.
pub fn interior_iterate(ambient: &Ambient, cubes: &[CubeSpec], k: usize) -> Vec<CubeSpec> {
    let mut out: Vec<CubeSpec> = cubes.to_vec();
    for _ in 0..k {
        out = out
            .into_iter()
            .filter_map(|c| c.interior_cube(ambient))
            .collect();
    }
    out
}

/// All nonempty pairwise intersections of two cube families.
pub fn meet(ambient: &Ambient, s: &[CubeSpec], t: &[CubeSpec]) -> Vec<CubeSpec> {
    let mut out = Vec::new();
    for c in s {
        for c2 in t {
            out.extend(c.intersect(ambient, c2));
        }
    }
    out.sort();
    out
}

/// One stage of a [`NestedFamily`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NestedStage {
    /// Stage index `n`; tiles of the underlying tiling have sides
    /// `schedule(n)` or `schedule(n) + 1`.
    pub n: i64,
    pub cubes: Vec<CubeSpec>,
    /// For each cube, the tiling cubes it was cut from, one per family
    /// from stage `n` up to the last stage.
    pub chains: Vec<Vec<CubeSpec>>,
    /// Fraction of the ambient covered by this stage.
    pub coverage: Ratio<i64>,
    /// Provable lower bound for `coverage` under this schedule.
    pub coverage_bound: Ratio<i64>,
}

/// Identifying data of one underlying tiling.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FamilyMeta {
    pub m: i64,
    pub side: i64,
    pub offsets: Vec<i64>,
}

/// Stages of disjoint cubes, pairwise nested across stages.
#[derive(Clone, Debug, PartialEq)]
pub struct NestedFamily {
    pub stages: Vec<NestedStage>,
    pub families: Vec<FamilyMeta>,
    /// Fraction of the ambient covered by the union of all stages.
    pub union_coverage: Ratio<i64>,
    /// Series-form bound `1 - d * sum 3/k^2` over the built range; can be
    /// negative (vacuous) for small starting indices.
    pub series_bound: f64,
}

/// Builds a nested family over stages `n0 ..= n0 + stage_count - 1`.
///
/// Stage `n` takes the tiling with sides `schedule(n)`/`schedule(n) + 1`
/// and keeps the parts of its tile interiors that survive cutting by the
/// `(m - n + 1)`-fold interiors of every later stage `m`. Ending every
/// chain at the same final stage is what makes cross-stage nestedness hold
/// after truncation. Tilings are shifted by seeded per-axis offsets on a
/// torus (windows admit no shift).
pub fn nested_family(
    ambient: &Ambient,
    n0: i64,
    stage_count: usize,
    schedule: impl Fn(i64) -> i64,
    seed: u64,
) -> Result<NestedFamily, Error> {
    if stage_count < 1 {
        return Err(Error::InvalidArgument("need at least one stage".into()));
    }
    if n0 < 1 {
        return Err(Error::InvalidArgument("stages must start at 1 or later".into()));
    }
    let d = ambient.d();
    let last = n0 + stage_count as i64 - 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tilings = Vec::with_capacity(stage_count);
    let mut metas = Vec::with_capacity(stage_count);
    for m in n0..=last {
        let side = schedule(m);
        if side < 1 {
            return Err(Error::InvalidArgument(format!(
                "schedule({m}) = {side} is not a usable tile side"
            )));
        }
        if ambient.kind == GridKind::Torus {
            // keep every cube at most half the torus so that cube
            // intersections are single cubes
            if let Some(&min_side) = ambient.sides.iter().min() {
                if 2 * (side + 1) > min_side {
                    return Err(Error::Infeasible(format!(
                        "tile side {side} exceeds half the torus ({min_side})"
                    )));
                }
            }
        }
        let offsets: Vec<i64> = match ambient.kind {
            GridKind::Torus => ambient.sides.iter().map(|&s| rng.gen_range(0..s)).collect(),
            GridKind::Window => vec![0; d],
        };
        let tiling = tile_cubes_with_offsets(ambient, side, &offsets)?;
        metas.push(FamilyMeta {
            m,
            side,
            offsets,
        });
        tilings.push(tiling);
    }

    let ambient_size = ambient.len() as i64;
    let mut stages = Vec::with_capacity(stage_count);
    let mut union = PointSet::empty(ambient);
    for (si, n) in (n0..=last).enumerate() {
        let base = &tilings[si];
        let mut cur: Vec<(CubeSpec, Vec<CubeSpec>)> = base
            .cubes
            .iter()
            .filter_map(|c| c.interior_cube(ambient).map(|i| (i, vec![c.clone()])))
            .collect();
        for (mj, m) in (n + 1..=last).enumerate() {
            let family = &tilings[si + 1 + mj];
            let power = (m - n + 1) as usize;
            let shrunk: Vec<Option<CubeSpec>> = family
                .cubes
                .iter()
                .map(|c| {
                    let mut cube = Some(c.clone());
                    for _ in 0..power {
                        cube = cube.and_then(|x| x.interior_cube(ambient));
                    }
                    cube
                })
                .collect();
            let mut next = Vec::with_capacity(cur.len());
            for (cube, chain) in cur {
                for t_idx in family.tiles_overlapping(&cube) {
                    let Some(target) = &shrunk[t_idx] else {
                        continue;
                    };
                    let pieces = cube.intersect(ambient, target);
                    if pieces.len() > 1 {
                        return Err(Error::Internal(
                            "cube intersection split across the torus seam".into(),
                        ));
                    }
                    let Some(piece) = pieces.into_iter().next() else {
                        continue;
                    };
                    let mut chain2 = chain.clone();
                    chain2.push(family.cubes[t_idx].clone());
                    next.push((piece, chain2));
                }
            }
            cur = next;
        }
        let mut paired = cur;
        paired.sort_by(|a, b| a.0.cmp(&b.0));
        let mut covered: i64 = 0;
        for (cube, _) in &paired {
            covered += cube.volume(ambient);
            for idx in cube.indices(ambient) {
                union.insert(idx);
            }
        }
        let coverage = Ratio::new(covered, ambient_size);
        let mut bound = Ratio::from_integer(1);
        for m in n..=last {
            let p = m - n + 1;
            bound -= Ratio::new(2 * p, schedule(m)) * Ratio::from_integer(d as i64);
        }
        if coverage < bound {
            return Err(Error::Internal(format!(
                "stage {n} coverage {coverage} fell below its bound {bound}"
            )));
        }
        let (cubes, chains) = paired.into_iter().unzip();
        stages.push(NestedStage {
            n,
            cubes,
            chains,
            coverage,
            coverage_bound: bound,
        });
    }
    let union_coverage = Ratio::new(union.len() as i64, ambient_size);
    let series_bound = 1.0
        - d as f64
            * (n0..=last)
                .map(|k| 3.0 / (k as f64 * k as f64))
                .sum::<f64>();
    Ok(NestedFamily {
        stages,
        families: metas,
        union_coverage,
        series_bound,
    })
}

/// All cube pairs (across and within stages) violating nestedness: two
/// distinct cubes must have disjoint neighborhoods, or one neighborhood
/// must sit inside the other cube.
pub fn nestedness_violations(
    ambient: &Ambient,
    family: &NestedFamily,
) -> Vec<(CubeSpec, CubeSpec)> {
    let all: Vec<&CubeSpec> = family.stages.iter().flat_map(|s| s.cubes.iter()).collect();
    let nbhds: Vec<CubeSpec> = all.iter().map(|c| c.nbhd_cube(ambient)).collect();
    let mut bad = Vec::new();
    for i in 0..all.len() {
        for j in i + 1..all.len() {
            let ok = nbhds[i].is_disjoint(ambient, &nbhds[j])
                || all[j].contains_cube(ambient, &nbhds[i])
                || all[i].contains_cube(ambient, &nbhds[j]);
            if !ok {
                bad.push((all[i].clone(), all[j].clone()));
            }
        }
    }
    bad
}

/// A tile with its distance-`k` invariant core.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TileCore {
    pub tile: PointSet,
    /// Points whose whole radius-`k` ball stays inside the tile.
    pub core: PointSet,
    pub k: usize,
    /// Least invariance defect: `|ball_k(F) \ F| / |F|`.
    pub delta_star: Ratio<i64>,
}

/// Computes the distance-`k` core of a tile along with its invariance
/// defect.
pub fn invariant_core(tile: &PointSet, k: usize) -> Result<TileCore, Error> {
    if tile.is_empty() {
        return Err(Error::InvalidArgument("core of an empty tile".into()));
    }
    let amb = tile.ambient().clone();
    let complement = PointSet::full(&amb).difference(tile)?;
    let core = tile.difference(&complement.ball_k(k))?;
    let grown = tile.ball_k(k);
    let delta_star = Ratio::new(
        (grown.len() - tile.len()) as i64,
        tile.len() as i64,
    );
    Ok(TileCore {
        tile: tile.clone(),
        core,
        k,
        delta_star,
    })
}

/// Invariance defect of a set: `|ball_k(A) \ A| / |A|`.
pub fn invariance_defect(a: &PointSet, k: usize) -> Result<Ratio<i64>, Error> {
    if a.is_empty() {
        return Err(Error::InvalidArgument("defect of an empty set".into()));
    }
    Ok(Ratio::new(
        (a.ball_k(k).len() - a.len()) as i64,
        a.len() as i64,
    ))
}
