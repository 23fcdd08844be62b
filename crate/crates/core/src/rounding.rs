//! Conversion of real-valued flows into integer-valued flows.
//!
//! The machinery works in three layers. Theta cycles push mass around a
//! unit square without changing any divergence. Slab sweeps chain theta
//! cycles along an axis of a two-layer slab, making prescribed vertical
//! edges integer while the fractional debt drifts to one final column
//! (`round_slab_axis`), then to one final corner (`round_slab`). Cube
//! rounding (`round_cube`) sweeps a cube layer by layer, rounding each
//! layer's horizontal edges with theta cycles and obtaining the vertical
//! edges for free from integer divergences, with designated inner cubes
//! left untouched; `make_integer_flow` cascades this over a nested cube
//! family and finishes by canceling leftover fractional cycles.
//!
//! All sweeps track their own accounting: per-edge change strictly below
//! `2d` per stage, at most three stages touching one edge, total change
//! strictly below `6d` per cube and `12d` across the cascade.

use std::collections::HashMap;

use num_rational::Ratio;
use num_traits::Signed;

use crate::conditions::SiteFunction;
use crate::lattice::{Ambient, CubeSpec, Point, PointSet};
use crate::real_flow::FlowMap;
use crate::tiling::NestedFamily;
use crate::Error;

/// Four consecutive corners of a unit square plus the amount pushed
/// around it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ThetaCycle {
    pub ambient: Ambient,
    pub corners: [usize; 4],
    pub amount: Ratio<i64>,
}

fn step_between(amb: &Ambient, from: usize, to: usize) -> Option<(usize, i64)> {
    for axis in 0..amb.axes() {
        for dir in [1i64, -1] {
            if amb.step(from, axis, dir) == Some(to) {
                return Some((axis, dir));
            }
        }
    }
    None
}

impl ThetaCycle {
    pub fn new(ambient: &Ambient, corners: [usize; 4], amount: Ratio<i64>) -> Result<Self, Error> {
        let mut steps = Vec::with_capacity(4);
        for i in 0..4 {
            let from = corners[i];
            let to = corners[(i + 1) % 4];
            match step_between(ambient, from, to) {
                Some(s) => steps.push(s),
                None => {
                    return Err(Error::InvalidArgument(format!(
                        "corners {from} and {to} are not adjacent"
                    )))
                }
            }
        }
        let ok = steps[0].0 != steps[1].0
            && steps[2] == (steps[0].0, -steps[0].1)
            && steps[3] == (steps[1].0, -steps[1].1);
        if !ok {
            return Err(Error::InvalidArgument(
                "corners do not trace a unit square".into(),
            ));
        }
        Ok(ThetaCycle {
            ambient: ambient.clone(),
            corners,
            amount,
        })
    }
}

fn add_directed(flow: &mut FlowMap, amb: &Ambient, from: usize, axis: usize, dir: i64, v: Ratio<i64>) {
    if dir > 0 {
        flow.add(from, axis, v);
    } else {
        let base = amb
            .step(from, axis, -1)
            .expect("reverse step exists for a traversed edge");
        flow.add(base, axis, -v);
    }
}

/// The 0-flow sending `amount` units around the square
/// `x1 -> x2 -> x3 -> x4 -> x1`.
pub fn theta_flow(cycle: &ThetaCycle) -> FlowMap {
    let amb = &cycle.ambient;
    let mut flow = FlowMap::zero(amb);
    for i in 0..4 {
        let from = cycle.corners[i];
        let to = cycle.corners[(i + 1) % 4];
        let (axis, dir) = step_between(amb, from, to).expect("validated square");
        add_directed(&mut flow, amb, from, axis, dir, cycle.amount);
    }
    flow
}

/// Change accounting for the sweeps: per-edge value at the start of the
/// run and of the current stage, and how many stages changed each edge.
struct Tracker {
    baseline: HashMap<(usize, usize), Ratio<i64>>,
    stage_start: HashMap<(usize, usize), Ratio<i64>>,
    stage_hits: HashMap<(usize, usize), u32>,
}

impl Tracker {
    fn new() -> Self {
        Tracker {
            baseline: HashMap::new(),
            stage_start: HashMap::new(),
            stage_hits: HashMap::new(),
        }
    }

    fn record(&mut self, edge: (usize, usize), current: Ratio<i64>) {
        self.baseline.entry(edge).or_insert(current);
        self.stage_start.entry(edge).or_insert(current);
    }

    fn end_stage(&mut self, flow: &FlowMap, cap: Ratio<i64>, stage: &'static str) -> Result<(), Error> {
        for (edge, start) in std::mem::take(&mut self.stage_start) {
            let diff = (flow.get(edge.0, edge.1) - start).abs();
            if diff == Ratio::from_integer(0) {
                continue;
            }
            if diff >= cap {
                return Err(Error::Internal(format!(
                    "stage {stage} changed an edge by {diff}, not below {cap}"
                )));
            }
            *self.stage_hits.entry(edge).or_insert(0) += 1;
        }
        Ok(())
    }

    fn changed_edges(&self, flow: &FlowMap) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> = self
            .baseline
            .iter()
            .filter(|(e, base)| flow.get(e.0, e.1) != **base)
            .map(|(e, _)| *e)
            .collect();
        out.sort_unstable();
        out
    }

    fn max_change(&self, flow: &FlowMap) -> Ratio<i64> {
        self.baseline
            .iter()
            .map(|(e, base)| (flow.get(e.0, e.1) - base).abs())
            .max()
            .unwrap_or_else(|| Ratio::from_integer(0))
    }

    fn max_hits(&self) -> u32 {
        self.stage_hits.values().copied().max().unwrap_or(0)
    }
}

/// Coordinate frame of a cube's 1-neighborhood. The cube occupies
/// relative coordinates `1..=len[i]` per axis, its neighborhood
/// `0..=len[i]+1`; relative coordinates are unique because the
/// neighborhood fits in the ambient without self-overlap.
struct Frame {
    amb: Ambient,
    corner: Vec<i64>,
    len: Vec<i64>,
    /// Inner cubes as relative (corner, extents).
    inner: Vec<(Vec<i64>, Vec<i64>)>,
}

impl Frame {
    fn new(amb: &Ambient, cube: &CubeSpec) -> Result<Self, Error> {
        if amb.delta_rank() != 0 {
            return Err(Error::InvalidArgument(
                "rounding operates on pure grid ambients".into(),
            ));
        }
        let d = amb.d();
        if cube.corner.len() != d {
            return Err(Error::InvalidArgument("cube dimension mismatch".into()));
        }
        let mut corner = Vec::with_capacity(d);
        for axis in 0..d {
            let side = amb.sides[axis];
            let need = cube.extents[axis] + 3;
            if amb.axis_wraps(axis) {
                if need > side {
                    return Err(Error::InvalidArgument(format!(
                        "cube neighborhood wraps onto itself on axis {axis}"
                    )));
                }
                corner.push((cube.corner[axis] - 1).rem_euclid(side));
            } else {
                if cube.corner[axis] < 1 || cube.corner[axis] + cube.extents[axis] + 1 >= side {
                    return Err(Error::InvalidArgument(format!(
                        "cube neighborhood leaves the ambient on axis {axis}"
                    )));
                }
                corner.push(cube.corner[axis] - 1);
            }
        }
        Ok(Frame {
            amb: amb.clone(),
            corner,
            len: cube.extents.iter().map(|&e| e + 1).collect(),
            inner: Vec::new(),
        })
    }

    fn set_inner(&mut self, inner: &[CubeSpec]) -> Result<(), Error> {
        for c in inner {
            let mut rel = Vec::with_capacity(self.len.len());
            for axis in 0..self.len.len() {
                let side = self.amb.sides[axis];
                let r = if self.amb.axis_wraps(axis) {
                    (c.corner[axis] - self.corner[axis]).rem_euclid(side)
                } else {
                    c.corner[axis] - self.corner[axis]
                };
                // nbhd(inner) must fit inside the cube proper
                if r < 2 || r + c.extents[axis] > self.len[axis] - 1 {
                    return Err(Error::InvalidArgument(
                        "inner cube neighborhood is not contained in the cube".into(),
                    ));
                }
                rel.push(r);
            }
            self.inner.push((rel, c.extents.clone()));
        }
        for i in 0..self.inner.len() {
            for j in 0..i {
                let disjoint = (0..self.len.len()).any(|axis| {
                    let (a, ae) = (&self.inner[i].0, &self.inner[i].1);
                    let (b, be) = (&self.inner[j].0, &self.inner[j].1);
                    a[axis] + ae[axis] + 1 < b[axis] - 1 || b[axis] + be[axis] + 1 < a[axis] - 1
                });
                if !disjoint {
                    return Err(Error::InvalidArgument(
                        "inner cube neighborhoods overlap".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    fn idx(&self, rel: &[i64]) -> usize {
        let coords = rel
            .iter()
            .zip(&self.corner)
            .map(|(&r, &c)| c + r)
            .collect();
        self.amb
            .index(&Point {
                coords,
                delta: vec![],
            })
            .expect("frame coordinates stay inside the ambient")
    }

    fn in_cube(&self, rel: &[i64]) -> bool {
        rel.iter()
            .zip(&self.len)
            .all(|(&r, &l)| (1..=l).contains(&r))
    }

    fn in_inner_nbhd(&self, j: usize, rel: &[i64]) -> bool {
        let (rc, ext) = &self.inner[j];
        (0..rel.len()).all(|a| rel[a] >= rc[a] - 1 && rel[a] <= rc[a] + ext[a] + 1)
    }

    fn in_any_inner_nbhd(&self, rel: &[i64]) -> bool {
        (0..self.inner.len()).any(|j| self.in_inner_nbhd(j, rel))
    }

    /// Membership in `E`: the edge touches the cube and does not lie
    /// inside any inner cube's neighborhood.
    fn edge_in_e(&self, rel: &[i64], axis: usize) -> bool {
        let mut head = rel.to_vec();
        head[axis] += 1;
        if head[axis] > self.len[axis] + 1 {
            return false;
        }
        if !self.in_cube(rel) && !self.in_cube(&head) {
            return false;
        }
        !(0..self.inner.len())
            .any(|j| self.in_inner_nbhd(j, rel) && self.in_inner_nbhd(j, &head))
    }
}

fn for_each_box(lo: &[i64], hi: &[i64], mut visit: impl FnMut(&[i64])) {
    if lo.iter().zip(hi).any(|(a, b)| a > b) {
        return;
    }
    let mut cur = lo.to_vec();
    loop {
        visit(&cur);
        let mut axis = lo.len();
        loop {
            if axis == 0 {
                return;
            }
            axis -= 1;
            if cur[axis] < hi[axis] {
                cur[axis] += 1;
                break;
            }
            cur[axis] = lo[axis];
        }
    }
}

/// Adds `s` around the square `x -> x+e_a -> x+e_a+e_b -> x+e_b -> x`
/// given in frame coordinates, recording old values in the tracker.
fn apply_theta(
    flow: &mut FlowMap,
    tr: &mut Tracker,
    frame: &Frame,
    rel: &[i64],
    axis_a: usize,
    axis_b: usize,
    s: Ratio<i64>,
) {
    if s == Ratio::from_integer(0) {
        return;
    }
    let mut ra = rel.to_vec();
    ra[axis_a] += 1;
    let mut rb = rel.to_vec();
    rb[axis_b] += 1;
    let x = frame.idx(rel);
    let xa = frame.idx(&ra);
    let xb = frame.idx(&rb);
    for (base, axis, v) in [(x, axis_a, s), (xa, axis_b, s), (xb, axis_a, -s), (x, axis_b, -s)] {
        tr.record((base, axis), flow.get(base, axis));
        flow.add(base, axis, v);
    }
}

/// One slab sweep: walking columns of `axis` from `lo[axis]` to
/// `hi[axis]-1`, round the vertical edge under every bottom-layer point
/// of the column, pushing fractional debt one column over.
fn sweep_slab(
    flow: &mut FlowMap,
    tr: &mut Tracker,
    frame: &Frame,
    lo: &[i64],
    hi: &[i64],
    axis: usize,
) {
    let v = lo.len() - 1;
    debug_assert_eq!(hi[v], lo[v] + 1);
    for col in lo[axis]..hi[axis] {
        let mut clo = lo.to_vec();
        let mut chi = hi.to_vec();
        clo[axis] = col;
        chi[axis] = col;
        chi[v] = lo[v];
        for_each_box(&clo, &chi, |rel| {
            let val = flow.get(frame.idx(rel), v);
            let s = val - val.floor();
            apply_theta(flow, tr, frame, rel, axis, v, s);
        });
    }
}

fn slab_frame(amb: &Ambient, slab: &CubeSpec) -> Result<Frame, Error> {
    if amb.delta_rank() != 0 {
        return Err(Error::InvalidArgument(
            "rounding operates on pure grid ambients".into(),
        ));
    }
    let d = amb.d();
    if d < 1 || slab.corner.len() != d {
        return Err(Error::InvalidArgument("slab dimension mismatch".into()));
    }
    if slab.extents[d - 1] != 1 {
        return Err(Error::InvalidArgument(
            "slab must have extent 1 on the last axis".into(),
        ));
    }
    CubeSpec::new(amb, slab.corner.clone(), slab.extents.clone())?;
    // the frame is only used for coordinate bookkeeping here; expose the
    // slab itself at relative coordinates starting from 0
    Ok(Frame {
        amb: amb.clone(),
        corner: slab.corner.clone(),
        len: slab.extents.iter().map(|&e| e + 1).collect(),
        inner: Vec::new(),
    })
}

fn snapshot_exact(flow: &FlowMap, f: &SiteFunction, sites: &[usize]) -> Vec<usize> {
    sites
        .iter()
        .copied()
        .filter(|&x| flow.divergence(x) == Ratio::from_integer(f.value(x)))
        .collect()
}

/// Lemma-style slab rounding along one axis: after the sweep the
/// vertical edge under every bottom-layer point with
/// `corner[axis] <= x_axis < corner[axis] + extents[axis]` is integer;
/// only slab edges change, each by strictly less than 2.
pub fn round_slab_axis(
    flow: &FlowMap,
    f: &SiteFunction,
    slab: &CubeSpec,
    axis: usize,
) -> Result<FlowMap, Error> {
    let amb = flow.ambient().clone();
    if f.ambient() != &amb {
        return Err(Error::AmbientMismatch);
    }
    let frame = slab_frame(&amb, slab)?;
    let d = amb.d();
    if axis + 1 >= d {
        return Err(Error::InvalidArgument(format!(
            "sweep axis {axis} must be a non-vertical axis"
        )));
    }
    let sites = slab.indices(&amb);
    let exact_before = snapshot_exact(flow, f, &sites);
    let mut out = flow.clone();
    let mut tr = Tracker::new();
    let lo = vec![0; d];
    let hi: Vec<i64> = slab.extents.clone();
    sweep_slab(&mut out, &mut tr, &frame, &lo, &hi, axis);
    tr.end_stage(&out, Ratio::from_integer(2), "slab axis sweep")?;
    for rel_col in 0..slab.extents[axis] {
        let mut clo = lo.clone();
        let mut chi: Vec<i64> = hi.clone();
        clo[axis] = rel_col;
        chi[axis] = rel_col;
        chi[d - 1] = 0;
        for_each_box(&clo, &chi, |rel| {
            debug_assert!(out.get(frame.idx(rel), d - 1).is_integer());
        });
    }
    let exact_after = snapshot_exact(&out, f, &sites);
    if exact_before != exact_after {
        return Err(Error::Internal(
            "slab sweep disturbed a divergence".into(),
        ));
    }
    Ok(out)
}

/// Rounds all vertical edges under a two-layer slab except the one at
/// the far corner, via successive axis sweeps over shrinking prefixes.
/// Total change strictly below `2d`.
pub fn round_slab(flow: &FlowMap, f: &SiteFunction, slab: &CubeSpec) -> Result<FlowMap, Error> {
    let amb = flow.ambient().clone();
    if f.ambient() != &amb {
        return Err(Error::AmbientMismatch);
    }
    let frame = slab_frame(&amb, slab)?;
    let d = amb.d();
    let mut out = flow.clone();
    let mut tr = Tracker::new();
    for axis in 0..d - 1 {
        let mut lo = vec![0i64; d];
        for (prev, v) in lo.iter_mut().enumerate().take(axis) {
            *v = slab.extents[prev];
        }
        let hi = slab.extents.clone();
        sweep_slab(&mut out, &mut tr, &frame, &lo, &hi, axis);
    }
    tr.end_stage(&out, Ratio::from_integer(2 * d as i64), "slab prefix sweeps")?;
    if tr.max_change(&out) >= Ratio::from_integer(2 * d as i64) {
        return Err(Error::Internal("slab rounding exceeded its bound".into()));
    }
    Ok(out)
}

/// Accounting of one cube-rounding run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RoundingTrace {
    pub stages: usize,
    /// Edges whose value differs from the input.
    pub changed: Vec<(usize, usize)>,
    /// Largest number of stages that changed a single edge.
    pub max_edge_stages: u32,
    /// Largest per-edge total change.
    pub max_change: Ratio<i64>,
}

/// Makes the flow integer on all edges touching `cube` except those
/// inside the neighborhoods of the `inner` cubes, changing only edges
/// inside `nbhd(cube)`, never touching an edge incident to an inner
/// cube, each edge by strictly less than `6d`.
///
/// Requires the flow to have divergence exactly `f` on `nbhd(cube)`.
pub fn round_cube(
    flow: &FlowMap,
    f: &SiteFunction,
    cube: &CubeSpec,
    inner: &[CubeSpec],
) -> Result<(FlowMap, RoundingTrace), Error> {
    let amb = flow.ambient().clone();
    if f.ambient() != &amb {
        return Err(Error::AmbientMismatch);
    }
    let d = amb.d();
    if d < 2 {
        return Err(Error::InvalidArgument(
            "cube rounding needs at least two grid axes".into(),
        ));
    }
    let mut frame = Frame::new(&amb, cube)?;
    frame.set_inner(inner)?;
    let v = d - 1;
    let cap = Ratio::from_integer(2 * d as i64);

    // exactness over the whole neighborhood is what makes the
    // divergence-forcing steps sound
    let nbhd_sites = cube.nbhd_cube(&amb).indices(&amb);
    let inexact = nbhd_sites
        .iter()
        .filter(|&&x| flow.divergence(x) != Ratio::from_integer(f.value(x)))
        .count();
    if inexact > 0 {
        return Err(Error::InvalidArgument(format!(
            "flow divergence differs from f at {inexact} neighborhood sites"
        )));
    }

    let mut out = flow.clone();
    let mut tr = Tracker::new();
    let mut stages = 0usize;

    // bottom boundary verticals: sweep the two lowest layers, with the
    // first axis extended one column past the cube so the leftover
    // fractional column exits the target edge set
    {
        let mut lo = vec![1i64; d];
        lo[v] = 0;
        let mut hi: Vec<i64> = frame.len.clone();
        hi[0] += 1;
        hi[v] = 1;
        sweep_slab(&mut out, &mut tr, &frame, &lo, &hi, 0);
        tr.end_stage(&out, cap, "bottom layer")?;
        stages += 1;
    }

    for m in 1..=frame.len[v] {
        // horizontal edges of layer m, one theta square standing on each
        for axis in 0..d - 1 {
            let mut lo = vec![1i64; d];
            let mut hi = frame.len.clone();
            lo[axis] = 0;
            lo[v] = m;
            hi[v] = m;
            for_each_box(&lo, &hi, |rel| {
                if !frame.edge_in_e(rel, axis) {
                    return;
                }
                let val = out.get(frame.idx(rel), axis);
                if !val.is_integer() {
                    apply_theta(&mut out, &mut tr, &frame, rel, axis, v, val.floor() - val);
                }
            });
        }
        tr.end_stage(&out, cap, "layer horizontals")?;
        stages += 1;

        // vertical edges out of layer m: slабs over inner-cube
        // neighborhood tops, divergence forcing everywhere else
        for j in 0..frame.inner.len() {
            let (rc, ext) = frame.inner[j].clone();
            if rc[v] + ext[v] + 1 != m {
                continue;
            }
            let lo_full: Vec<i64> = (0..d)
                .map(|a| if a == v { m } else { rc[a] - 1 })
                .collect();
            let hi_full: Vec<i64> = (0..d)
                .map(|a| if a == v { m + 1 } else { rc[a] + ext[a] + 1 })
                .collect();
            for axis in 0..d - 1 {
                let mut lo = lo_full.clone();
                for prev in 0..axis {
                    lo[prev] = hi_full[prev];
                }
                sweep_slab(&mut out, &mut tr, &frame, &lo, &hi_full, axis);
            }
            let mut corner = hi_full.clone();
            corner[v] = m;
            if !out.get(frame.idx(&corner), v).is_integer() {
                return Err(Error::Internal(
                    "corner edge above an inner cube is not integer".into(),
                ));
            }
        }
        {
            let mut lo = vec![1i64; d];
            let mut hi = frame.len.clone();
            lo[v] = m;
            hi[v] = m;
            let mut bad = 0usize;
            for_each_box(&lo, &hi, |rel| {
                if frame.edge_in_e(rel, v)
                    && !frame.in_any_inner_nbhd(rel)
                    && !out.get(frame.idx(rel), v).is_integer()
                {
                    bad += 1;
                }
            });
            if bad > 0 {
                return Err(Error::Internal(format!(
                    "{bad} vertical edges missed by divergence forcing on layer {m}"
                )));
            }
        }
        tr.end_stage(&out, cap, "layer verticals")?;
        stages += 1;
    }

    // final guarantees
    {
        let lo = vec![0i64; d];
        let hi: Vec<i64> = frame.len.iter().map(|&l| l + 1).collect();
        let mut fractional = 0usize;
        for_each_box(&lo, &hi, |rel| {
            for axis in 0..d {
                if rel[axis] <= frame.len[axis]
                    && frame.edge_in_e(rel, axis)
                    && !out.get(frame.idx(rel), axis).is_integer()
                {
                    fractional += 1;
                }
            }
        });
        if fractional > 0 {
            return Err(Error::Internal(format!(
                "{fractional} target edges remain fractional after the sweep"
            )));
        }
    }
    let changed = tr.changed_edges(&out);
    for &(base, axis) in &changed {
        let head = amb
            .step(base, axis, 1)
            .expect("changed edges exist in the ambient");
        for c in inner {
            if c.contains_idx(&amb, base) || c.contains_idx(&amb, head) {
                return Err(Error::Internal(
                    "sweep touched an edge incident to an inner cube".into(),
                ));
            }
        }
    }
    let max_change = tr.max_change(&out);
    if max_change >= Ratio::from_integer(6 * d as i64) {
        return Err(Error::Internal(format!(
            "cube rounding changed an edge by {max_change}, not below 6d"
        )));
    }
    let max_edge_stages = tr.max_hits();
    if max_edge_stages > 3 {
        return Err(Error::Internal(format!(
            "an edge was changed in {max_edge_stages} stages, more than three"
        )));
    }
    for &x in &nbhd_sites {
        if out.divergence(x) != Ratio::from_integer(f.value(x)) {
            return Err(Error::Internal("cube rounding disturbed a divergence".into()));
        }
    }
    Ok((
        out,
        RoundingTrace {
            stages,
            changed,
            max_edge_stages,
            max_change,
        },
    ))
}

/// Replaces the fractional edges among `edges(sites)` by integers
/// without changing any divergence, by pushing fractional cycles to
/// their nearest integer. Requires the restricted divergence at every
/// site to be integer; the result stays within `ceil(sup)` and `bound`.
pub fn boundary_correction(
    flow: &FlowMap,
    sites: &PointSet,
    bound: i64,
) -> Result<FlowMap, Error> {
    let amb = flow.ambient().clone();
    if sites.ambient() != &amb {
        return Err(Error::AmbientMismatch);
    }
    let mut inner_edges: Vec<(usize, usize)> = Vec::new();
    for e in crate::lattice::edges(sites) {
        let base = amb.index(&e.base)?;
        inner_edges.push((base, e.axis));
    }
    let mut sup = Ratio::from_integer(0);
    let mut div: HashMap<usize, Ratio<i64>> = HashMap::new();
    for &(base, axis) in &inner_edges {
        let val = flow.get(base, axis);
        sup = sup.max(val.abs());
        let head = amb.step(base, axis, 1).expect("edge head exists");
        *div.entry(base).or_insert_with(|| Ratio::from_integer(0)) += val;
        *div.entry(head).or_insert_with(|| Ratio::from_integer(0)) -= val;
    }
    if sup.ceil() > Ratio::from_integer(bound) {
        return Err(Error::InvalidArgument(format!(
            "flow magnitude {sup} does not fit the bound {bound}"
        )));
    }
    let bad = div.values().filter(|v| !v.is_integer()).count();
    if bad > 0 {
        return Err(Error::InvalidArgument(format!(
            "non-integer restricted divergence at {bad} sites"
        )));
    }

    let mut out = flow.clone();
    // adjacency over fractional edges only; every endpoint has
    // fractional degree >= 2 because restricted divergences are integer
    let mut frac: Vec<(usize, usize)> = inner_edges
        .iter()
        .copied()
        .filter(|&(b, a)| !out.get(b, a).is_integer())
        .collect();
    frac.sort_unstable();
    while let Some(&start_edge) = frac.first() {
        let adj: HashMap<usize, Vec<(usize, usize)>> = {
            let mut m: HashMap<usize, Vec<(usize, usize)>> = HashMap::new();
            for &(b, a) in &frac {
                let h = amb.step(b, a, 1).expect("edge head exists");
                m.entry(b).or_default().push((b, a));
                m.entry(h).or_default().push((b, a));
            }
            for v in m.values_mut() {
                v.sort_unstable();
            }
            m
        };
        // walk fractional edges, never doubling straight back, until a
        // vertex repeats; the suffix is a cycle
        let mut path: Vec<(usize, (usize, usize))> = Vec::new();
        let mut seen: HashMap<usize, usize> = HashMap::new();
        let mut cur = start_edge.0;
        let mut last: Option<(usize, usize)> = None;
        let cycle = loop {
            if let Some(&pos) = seen.get(&cur) {
                break path[pos..].to_vec();
            }
            seen.insert(cur, path.len());
            let next_edge = adj[&cur]
                .iter()
                .copied()
                .find(|&e| Some(e) != last)
                .expect("fractional degree is at least two");
            let head = amb.step(next_edge.0, next_edge.1, 1).expect("edge head exists");
            let nxt = if next_edge.0 == cur { head } else { next_edge.0 };
            path.push((cur, next_edge));
            last = Some(next_edge);
            cur = nxt;
        };
        // push along the cycle until some edge reaches an integer
        let mut t = Ratio::from_integer(i64::MAX);
        for &(from, (b, a)) in &cycle {
            let val = out.get(b, a);
            let headroom = if from == b {
                val.ceil() - val
            } else {
                val - val.floor()
            };
            t = t.min(headroom);
        }
        for &(from, (b, a)) in &cycle {
            let delta = if from == b { t } else { -t };
            out.add(b, a, delta);
        }
        frac.retain(|&(b, a)| !out.get(b, a).is_integer());
    }
    for (site, before) in div {
        let mut after = Ratio::from_integer(0);
        for &(base, axis) in &inner_edges {
            let val = out.get(base, axis);
            if base == site {
                after += val;
            }
            if amb.step(base, axis, 1) == Some(site) {
                after -= val;
            }
        }
        if after != before {
            return Err(Error::Internal(
                "cycle canceling disturbed a restricted divergence".into(),
            ));
        }
    }
    Ok(out)
}

/// Summary of a full real-to-integer conversion.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RoundingReport {
    /// Whether the single-axis floor path was taken.
    pub floor_only: bool,
    pub stages: usize,
    pub cubes_rounded: usize,
    pub corrected_components: usize,
    /// Sites left with fractional incident edges or wrong divergence.
    pub uncorrected_sites: PointSet,
    /// Largest number of cube roundings that changed a single edge.
    pub max_cascade_touches: u32,
    pub max_change: Ratio<i64>,
    pub sup_in: Ratio<i64>,
    pub sup_out: Ratio<i64>,
    /// The guarantee: sup_out <= sup_in + 12d.
    pub change_bound: i64,
    /// Whether the result is integer on every edge.
    pub integral: bool,
}

fn union_root(parent: &mut Vec<usize>, mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Converts a real-valued `f`-flow into an integer-valued one along a
/// nested cube family: per-edge floor on a single axis, otherwise the
/// cube-rounding cascade over the family stages followed by fractional
/// cycle canceling on the leftover boundary components.
pub fn make_integer_flow(
    flow: &FlowMap,
    f: &SiteFunction,
    family: &NestedFamily,
) -> Result<(FlowMap, RoundingReport), Error> {
    let amb = flow.ambient().clone();
    if f.ambient() != &amb {
        return Err(Error::AmbientMismatch);
    }
    if amb.delta_rank() != 0 {
        return Err(Error::InvalidArgument(
            "rounding operates on pure grid ambients".into(),
        ));
    }
    let d = amb.d();
    let sup_in = flow.sup_norm();
    let change_bound = 12 * d as i64;

    if d <= 1 {
        let mut out = FlowMap::zero(&amb);
        let mut max_change = Ratio::from_integer(0);
        for (base, axis) in all_edges(&amb) {
            let v = flow.get(base, axis);
            out.set(base, axis, v.floor());
            max_change = max_change.max(v - v.floor());
        }
        let mut uncorrected = PointSet::empty(&amb);
        for x in 0..amb.len() {
            if out.divergence(x) != Ratio::from_integer(f.value(x)) {
                uncorrected.insert(x);
            }
        }
        let sup_out = out.sup_norm();
        let integral = out.is_integral();
        return Ok((
            out,
            RoundingReport {
                floor_only: true,
                stages: 0,
                cubes_rounded: 0,
                corrected_components: 0,
                uncorrected_sites: uncorrected,
                max_cascade_touches: 0,
                max_change,
                sup_in,
                sup_out,
                change_bound,
                integral,
            },
        ));
    }

    // exactness on every cube neighborhood, checked up front
    let mut inexact = 0usize;
    for stage in &family.stages {
        for cube in &stage.cubes {
            for x in cube.nbhd_cube(&amb).indices(&amb) {
                if flow.divergence(x) != Ratio::from_integer(f.value(x)) {
                    inexact += 1;
                }
            }
        }
    }
    if inexact > 0 {
        return Err(Error::InvalidArgument(format!(
            "flow is not an exact f-flow on {inexact} covered sites"
        )));
    }

    let mut out = flow.clone();
    let mut cascade: HashMap<(usize, usize), u32> = HashMap::new();
    let mut cubes_rounded = 0usize;
    let mut stages = 0usize;
    for (n, stage) in family.stages.iter().enumerate() {
        for cube in &stage.cubes {
            let mut candidates: Vec<&CubeSpec> = Vec::new();
            for earlier in &family.stages[..n] {
                for c in &earlier.cubes {
                    if !c.is_disjoint(&amb, cube) {
                        candidates.push(c);
                    }
                }
            }
            let inner: Vec<CubeSpec> = candidates
                .iter()
                .filter(|c| {
                    !candidates
                        .iter()
                        .any(|o| *o != **c && o.contains_cube(&amb, c))
                })
                .map(|c| (*c).clone())
                .collect();
            let (next, trace) = round_cube(&out, f, cube, &inner)?;
            out = next;
            cubes_rounded += 1;
            for e in trace.changed {
                let hits = cascade.entry(e).or_insert(0);
                *hits += 1;
                if *hits > 2 {
                    return Err(Error::Internal(
                        "an edge was changed by more than two cube roundings".into(),
                    ));
                }
            }
        }
        stages += 1;
    }
    let max_cascade_touches = cascade.values().copied().max().unwrap_or(0);

    // leftover fractional edges sit on boundary shells and the
    // uncovered region; cancel them component by component
    let mut parent: Vec<usize> = (0..amb.len()).collect();
    let mut frac_edges: Vec<(usize, usize)> = Vec::new();
    for (base, axis) in all_edges(&amb) {
        if !out.get(base, axis).is_integer() {
            let head = amb.step(base, axis, 1).expect("edge head exists");
            let (a, b) = (union_root(&mut parent, base), union_root(&mut parent, head));
            parent[a] = b;
            frac_edges.push((base, axis));
        }
    }
    let mut components: HashMap<usize, Vec<usize>> = HashMap::new();
    for &(base, axis) in &frac_edges {
        let head = amb.step(base, axis, 1).expect("edge head exists");
        for site in [base, head] {
            let root = union_root(&mut parent, site);
            let entry = components.entry(root).or_default();
            if !entry.contains(&site) {
                entry.push(site);
            }
        }
    }
    let mut roots: Vec<usize> = components.keys().copied().collect();
    roots.sort_unstable();
    let mut corrected_components = 0usize;
    let mut uncorrected_sites = PointSet::empty(&amb);
    let correction_bound = sup_in.ceil().to_integer() + change_bound;
    for root in roots {
        let member_sites = &components[&root];
        let sites = PointSet::from_indices(&amb, member_sites.iter().copied());
        let ok = member_sites.iter().all(|&x| {
            let mut partial = Ratio::from_integer(0);
            for axis in 0..amb.axes() {
                if let Some(h) = amb.step(x, axis, 1) {
                    if sites.contains(h) {
                        partial += out.get(x, axis);
                    }
                }
                if let Some(p) = amb.step(x, axis, -1) {
                    if sites.contains(p) {
                        partial -= out.get(p, axis);
                    }
                }
            }
            partial.is_integer()
        });
        if ok {
            out = boundary_correction(&out, &sites, correction_bound)?;
            corrected_components += 1;
        } else {
            for &x in member_sites {
                uncorrected_sites.insert(x);
            }
        }
    }

    // every fractional edge must now touch an uncorrected site
    let mut max_change = Ratio::from_integer(0);
    let mut integral = true;
    for (base, axis) in all_edges(&amb) {
        let diff = (out.get(base, axis) - flow.get(base, axis)).abs();
        max_change = max_change.max(diff);
        if !out.get(base, axis).is_integer() {
            integral = false;
            let head = amb.step(base, axis, 1).expect("edge head exists");
            if !uncorrected_sites.contains(base) && !uncorrected_sites.contains(head) {
                return Err(Error::Internal(
                    "a fractional edge survived outside the reported residual".into(),
                ));
            }
        }
    }
    for x in 0..amb.len() {
        if out.divergence(x) != Ratio::from_integer(f.value(x)) && !uncorrected_sites.contains(x) {
            return Err(Error::Internal(
                "cascade disturbed a divergence outside the reported residual".into(),
            ));
        }
    }
    let sup_out = out.sup_norm();
    if sup_out > sup_in + Ratio::from_integer(change_bound) {
        return Err(Error::Internal(format!(
            "integer flow magnitude {sup_out} exceeds input plus 12d"
        )));
    }
    Ok((
        out,
        RoundingReport {
            floor_only: false,
            stages,
            cubes_rounded,
            corrected_components,
            uncorrected_sites,
            max_cascade_touches,
            max_change,
            sup_in,
            sup_out,
            change_bound,
            integral,
        },
    ))
}

fn all_edges(amb: &Ambient) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for base in 0..amb.len() {
        for axis in 0..amb.axes() {
            if amb.step(base, axis, 1).is_some() {
                out.push((base, axis));
            }
        }
    }
    out
}
