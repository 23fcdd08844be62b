//! Bounded real-valued flows with prescribed divergence.
//!
//! Given a bounded integer function `f` satisfying the distance-`k` Hall
//! condition, the construction lifts `f` to unit masses (`f(x)` split into
//! `|f(x)|` unit copies at `x`), tiles the ambient by cubes whose invariance
//! defect beats a caller-chosen `delta`, matches source units sitting in
//! tile cores to sink units within distance `k`, and routes one unit of
//! flow along the lexicographically least shortest path for every matched
//! pair. The sum of these unit flows has divergence exactly `f` outside a
//! small residual set whose (lifted) measure stays below `3 * delta * |K|`,
//! and its sup-norm is bounded by `l * d^k`.

use num_rational::Ratio;

use crate::conditions::{check_k_hall, SiteFunction};
use crate::lattice::{Ambient, CubeSpec, PointSet};
use crate::tiling::{invariant_core, tile_cubes, TileCore};
use crate::Error;

/// Antisymmetric edge function, stored on positively oriented edges
/// `(base, axis)` as exact rationals.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlowMap {
    ambient: Ambient,
    /// Dense storage at `base * axes + axis`; absent edges stay zero.
    values: Vec<Ratio<i64>>,
}

impl FlowMap {
    pub fn zero(ambient: &Ambient) -> Self {
        FlowMap {
            ambient: ambient.clone(),
            values: vec![Ratio::from_integer(0); ambient.len() * ambient.axes()],
        }
    }

    pub fn ambient(&self) -> &Ambient {
        &self.ambient
    }

    /// Value on the positively oriented edge `base -> base + e_axis`.
    pub fn get(&self, base: usize, axis: usize) -> Ratio<i64> {
        self.values[base * self.ambient.axes() + axis]
    }

    pub fn set(&mut self, base: usize, axis: usize, v: Ratio<i64>) {
        debug_assert!(self.ambient.step(base, axis, 1).is_some() || v == Ratio::from_integer(0));
        self.values[base * self.ambient.axes() + axis] = v;
    }

    pub fn add(&mut self, base: usize, axis: usize, v: Ratio<i64>) {
        debug_assert!(self.ambient.step(base, axis, 1).is_some());
        self.values[base * self.ambient.axes() + axis] += v;
    }

    /// Net outflow at `x`: sum over outgoing positive orientations minus
    /// incoming ones.
    pub fn divergence(&self, x: usize) -> Ratio<i64> {
        let mut div = Ratio::from_integer(0);
        for axis in 0..self.ambient.axes() {
            if self.ambient.step(x, axis, 1).is_some() {
                div += self.get(x, axis);
            }
            if let Some(y) = self.ambient.step(x, axis, -1) {
                div -= self.get(y, axis);
            }
        }
        div
    }

    pub fn sup_norm(&self) -> Ratio<i64> {
        let mut m = Ratio::from_integer(0);
        for v in &self.values {
            let a = if *v < Ratio::from_integer(0) { -*v } else { *v };
            if a > m {
                m = a;
            }
        }
        m
    }

    /// Nonzero edges as `(base, axis)`, ascending.
    pub fn support(&self) -> Vec<(usize, usize)> {
        let axes = self.ambient.axes();
        self.values
            .iter()
            .enumerate()
            .filter(|&(_, v)| *v != Ratio::from_integer(0))
            .map(|(i, _)| (i / axes, i % axes))
            .collect()
    }

    pub fn is_integral(&self) -> bool {
        self.values.iter().all(|v| v.is_integer())
    }

    /// Whether `divergence == f.value` at every site.
    pub fn is_flow_for(&self, f: &SiteFunction) -> bool {
        (0..self.ambient.len())
            .all(|x| self.divergence(x) == Ratio::from_integer(f.value(x)))
    }
}

/// The lifted space `X x l` with complete fibers: `(x, i)` and `(x, j)` are
/// adjacent for `i != j`, and `(x, i)`, `(y, j)` are adjacent whenever `x`
/// and `y` are. Lifted points are indexed as `x * levels + i`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LiftedSpace {
    pub base: Ambient,
    pub levels: i64,
}

impl LiftedSpace {
    pub fn len(&self) -> usize {
        self.base.len() * self.levels as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Graph distance in the lifted space: fiber hops are single edges that
    /// can be folded into any base step.
    pub fn distance(&self, p: usize, q: usize) -> i64 {
        let (x, i) = (p / self.levels as usize, p % self.levels as usize);
        let (y, j) = (q / self.levels as usize, q % self.levels as usize);
        if x == y {
            if i == j {
                0
            } else {
                1
            }
        } else {
            self.base.distance(x, y)
        }
    }
}

/// A bounded function split into unit masses on the lifted space.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lift {
    pub space: LiftedSpace,
    /// Lifted indices carrying one unit of positive mass each.
    pub a: Vec<usize>,
    /// Lifted indices carrying one unit of negative mass each.
    pub b: Vec<usize>,
}

/// Splits `f` into indicator sets on the lifted space `X x l`,
/// `l = max(1, sup |f|)`, filling fiber levels from 0 upward.
pub fn lift_function(f: &SiteFunction) -> Lift {
    let l = f.bound().max(1);
    let space = LiftedSpace {
        base: f.ambient().clone(),
        levels: l,
    };
    let mut a = Vec::new();
    let mut b = Vec::new();
    for x in 0..f.ambient().len() {
        let v = f.value(x);
        for i in 0..v.abs() {
            let lifted = x * l as usize + i as usize;
            if v > 0 {
                a.push(lifted);
            } else {
                b.push(lifted);
            }
        }
    }
    Lift { space, a, b }
}

/// Injection from source sites to sink sites, each pair within distance
/// `k`. Sites can repeat when they carry several units of mass.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartialMatching {
    pub ambient: Ambient,
    pub k: usize,
    /// Matched pairs `(from, to)` by site index, in deterministic order.
    pub pairs: Vec<(usize, usize)>,
}

/// Maximum bipartite matching between multisets of units, by augmenting
/// paths in deterministic site order.
struct UnitMatcher {
    a_sites: Vec<usize>,
    a_mult: Vec<i64>,
    b_sites: Vec<usize>,
    b_cap: Vec<i64>,
    /// Candidate sink positions per source position.
    adj: Vec<Vec<u32>>,
    /// Slots taken at each sink position: (source position, copy).
    owners: Vec<Vec<(u32, u32)>>,
    /// Sink position matched to each (source position, copy).
    assign: Vec<Vec<Option<u32>>>,
}

impl UnitMatcher {
    fn new(amb: &Ambient, a: &[(usize, i64)], b: &[(usize, i64)], k: usize) -> Self {
        let a_sites: Vec<usize> = a.iter().map(|&(x, _)| x).collect();
        let a_mult: Vec<i64> = a.iter().map(|&(_, m)| m).collect();
        let b_sites: Vec<usize> = b.iter().map(|&(x, _)| x).collect();
        let b_cap: Vec<i64> = b.iter().map(|&(_, m)| m).collect();
        let adj = a_sites
            .iter()
            .map(|&x| {
                b_sites
                    .iter()
                    .enumerate()
                    .filter(|&(_, &y)| amb.distance(x, y) <= k as i64)
                    .map(|(j, _)| j as u32)
                    .collect()
            })
            .collect();
        let assign = a_mult.iter().map(|&m| vec![None; m as usize]).collect();
        UnitMatcher {
            owners: vec![Vec::new(); b_sites.len()],
            a_sites,
            a_mult,
            b_sites,
            b_cap,
            adj,
            assign,
        }
    }

    fn try_assign(&mut self, ai: u32, copy: u32, visited: &mut [bool]) -> bool {
        for ji in 0..self.adj[ai as usize].len() {
            let j = self.adj[ai as usize][ji] as usize;
            if visited[j] {
                continue;
            }
            visited[j] = true;
            if (self.owners[j].len() as i64) < self.b_cap[j] {
                self.owners[j].push((ai, copy));
                self.assign[ai as usize][copy as usize] = Some(j as u32);
                return true;
            }
            for oi in 0..self.owners[j].len() {
                let (oa, ocopy) = self.owners[j][oi];
                if self.try_assign(oa, ocopy, visited) {
                    self.owners[j][oi] = (ai, copy);
                    self.assign[ai as usize][copy as usize] = Some(j as u32);
                    return true;
                }
            }
        }
        false
    }

    /// Runs the augmenting search for every unit; returns matched count.
    fn solve(&mut self) -> i64 {
        let mut matched = 0;
        for ai in 0..self.a_sites.len() {
            for copy in 0..self.a_mult[ai] {
                let mut visited = vec![false; self.b_sites.len()];
                if self.try_assign(ai as u32, copy as u32, &mut visited) {
                    matched += 1;
                }
            }
        }
        matched
    }

    /// Matched `(from, to)` site pairs in source order.
    fn pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (ai, copies) in self.assign.iter().enumerate() {
            for slot in copies {
                if let Some(j) = slot {
                    out.push((self.a_sites[ai], self.b_sites[*j as usize]));
                }
            }
        }
        out
    }

    fn unmatched_per_sink(&self) -> Vec<i64> {
        (0..self.b_sites.len())
            .map(|j| self.b_cap[j] - self.owners[j].len() as i64)
            .collect()
    }
}

/// Maximum matching between `a`-points lying in one of the given tile
/// cores and `b`-points within distance `k`. The distance-`k` Hall
/// condition for `1_a - 1_b` guarantees saturation of every core point of
/// `a`; an unsaturated result is therefore reported as an error.
pub fn tile_matching(
    cores: &[TileCore],
    a: &PointSet,
    b: &PointSet,
    k: usize,
) -> Result<PartialMatching, Error> {
    if a.ambient() != b.ambient() {
        return Err(Error::AmbientMismatch);
    }
    let amb = a.ambient();
    let mut in_core = PointSet::empty(amb);
    for tc in cores {
        in_core = in_core.union(&tc.core)?;
    }
    let sources: Vec<(usize, i64)> = a
        .iter()
        .filter(|&x| in_core.contains(x))
        .map(|x| (x, 1))
        .collect();
    let sinks: Vec<(usize, i64)> = b.iter().map(|x| (x, 1)).collect();
    let total: i64 = sources.len() as i64;
    let mut m = UnitMatcher::new(amb, &sources, &sinks, k);
    let matched = m.solve();
    if matched < total {
        return Err(Error::Stage {
            stage: "tile matching",
            message: format!(
                "only {matched} of {total} core points matched; the Hall \
                 precondition does not hold"
            ),
        });
    }
    Ok(PartialMatching {
        ambient: amb.clone(),
        k,
        pairs: m.pairs(),
    })
}

/// Steps of the lexicographically least shortest path between two points:
/// per-axis legs in generator order `+e_1 < -e_1 < +e_2 < ...`, cyclic
/// axes after grid axes, wrapped displacements taking the shorter side
/// (ties resolved forward).
pub(crate) fn lex_path_steps(amb: &Ambient, from: usize, to: usize) -> Vec<(usize, usize, i64)> {
    let mut steps = Vec::new();
    let mut cur = from;
    for axis in 0..amb.axes() {
        let n = amb.axis_len(axis);
        let mut diff = amb.coord(to, axis) - amb.coord(cur, axis);
        if amb.axis_wraps(axis) {
            diff = diff.rem_euclid(n);
            if 2 * diff > n {
                diff -= n;
            }
        }
        let dir = if diff >= 0 { 1 } else { -1 };
        for _ in 0..diff.abs() {
            let next = amb
                .step(cur, axis, dir)
                .expect("monotone staircase stays inside the ambient");
            steps.push((if dir > 0 { cur } else { next }, axis, dir));
            cur = next;
        }
    }
    debug_assert_eq!(cur, to);
    steps
}

/// Superposition of unit flows along the lexicographically least shortest
/// path of every matched pair.
pub fn path_flow(matching: &PartialMatching) -> Result<FlowMap, Error> {
    let amb = &matching.ambient;
    let mut flow = FlowMap::zero(amb);
    for &(from, to) in &matching.pairs {
        if amb.distance(from, to) > matching.k as i64 {
            return Err(Error::InvalidArgument(format!(
                "matched pair at distance {} exceeds k = {}",
                amb.distance(from, to),
                matching.k
            )));
        }
        for (base, axis, dir) in lex_path_steps(amb, from, to) {
            flow.add(base, axis, Ratio::from_integer(dir));
        }
    }
    Ok(flow)
}

/// Diagnostics of a [`build_real_flow`] run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RealFlowReport {
    pub k: usize,
    pub delta: Ratio<i64>,
    /// Unit levels `l = max(1, sup |f|)`.
    pub levels: i64,
    /// Chosen cube side; `None` means the whole grid served as one tile.
    pub tile_side: Option<i64>,
    pub tile_count: usize,
    /// `|K|`: size of the radius-`k` ball of the acting group.
    pub ball_size: i64,
    /// Largest invariance defect among the tiles used.
    pub worst_tile_defect: Ratio<i64>,
    pub matched_pairs: usize,
    /// Sites where the flow's divergence equals `f` exactly.
    pub exact_sites: PointSet,
    /// Residual fraction in the lifted measure (non-core sites at full
    /// weight plus unmatched sink units inside cores).
    pub residual_fraction: Ratio<i64>,
    /// The guarantee `3 * delta * |K|` the residual must stay below.
    pub residual_bound: Ratio<i64>,
    pub sup_norm: Ratio<i64>,
    /// Sup-norm guarantee for this ambient: `l * d^k` with `d` the number
    /// of generator axes (`l * k` on a single-axis ambient, where the
    /// path-counting bound is linear).
    pub sup_bound: i64,
}

fn sup_bound_for(amb: &Ambient, l: i64, k: usize) -> i64 {
    let d = amb.axes() as i64;
    if d <= 1 {
        l * k as i64
    } else {
        l * d.pow(k as u32)
    }
}

/// Full-grid cube (single tile covering the whole grid part).
fn full_grid_cube(amb: &Ambient) -> CubeSpec {
    CubeSpec {
        corner: vec![0; amb.d()],
        extents: amb.sides.iter().map(|&s| s - 1).collect(),
    }
}

/// Picks tiles for the given `delta`: the least cube side above `2k`
/// (so cores are nonempty and matching edges stay within one tile
/// neighborhood) whose tiles all have invariance defect strictly below
/// `delta`, falling back to one full-grid tile (defect 0).
fn choose_tiles(
    amb: &Ambient,
    k: usize,
    delta: Ratio<i64>,
) -> Result<(Option<i64>, Vec<PointSet>, Ratio<i64>), Error> {
    let min_side = amb.sides.iter().min().copied().unwrap_or(0);
    for side in (2 * k as i64 + 1)..=min_side {
        let Ok(tiling) = tile_cubes(amb, side) else {
            continue;
        };
        let tiles: Vec<PointSet> = tiling.cubes.iter().map(|c| c.point_set(amb)).collect();
        let worst = tiles
            .iter()
            .map(|t| {
                let grown = t.ball_k(k);
                Ratio::new((grown.len() - t.len()) as i64, t.len() as i64)
            })
            .max()
            .unwrap_or_else(|| Ratio::from_integer(0));
        if worst < delta {
            return Ok((Some(side), tiles, worst));
        }
    }
    let tile = full_grid_cube(amb).point_set(amb);
    let grown = tile.ball_k(k);
    let worst = Ratio::new((grown.len() - tile.len()) as i64, tile.len() as i64);
    if worst >= delta {
        return Err(Error::Infeasible(format!(
            "no tiling beats delta = {delta}; even one full tile has defect {worst}"
        )));
    }
    Ok((None, vec![tile], worst))
}

/// Builds a real-valued flow with divergence `f` on most of the ambient.
///
/// Requires `f` to satisfy the distance-`k` Hall condition. The returned
/// report records where the divergence is exact and bounds the residual.
pub fn build_real_flow(
    f: &SiteFunction,
    k: usize,
    delta: Ratio<i64>,
) -> Result<(FlowMap, RealFlowReport), Error> {
    if delta <= Ratio::from_integer(0) {
        return Err(Error::InvalidArgument("delta must be positive".into()));
    }
    build_real_flow_with(f, k, delta, false)
}

/// Variant of [`build_real_flow`] forcing a single full-grid tile, so the
/// core covers every site and the flow's divergence is exact everywhere
/// (it additionally needs the total mass of `f` to vanish).
pub fn build_exact_flow(f: &SiteFunction, k: usize) -> Result<(FlowMap, RealFlowReport), Error> {
    if f.total() != 0 {
        return Err(Error::InvalidArgument(format!(
            "exact flow needs balanced mass, got total {}",
            f.total()
        )));
    }
    let (flow, report) = build_real_flow_with(f, k, Ratio::from_integer(1), true)?;
    if report.exact_sites.len() != f.ambient().len() {
        return Err(Error::Internal(
            "exact flow left residual sites despite a global matching".into(),
        ));
    }
    Ok((flow, report))
}

fn build_real_flow_with(
    f: &SiteFunction,
    k: usize,
    delta: Ratio<i64>,
    force_single_tile: bool,
) -> Result<(FlowMap, RealFlowReport), Error> {
    let amb = f.ambient().clone();
    let verdict = check_k_hall(f, k)?;
    if let Some(w) = verdict.witness {
        return Err(Error::HallViolation {
            k,
            side: w.side,
            deficit: w.deficit,
            witness_size: w.points.len(),
        });
    }
    let l = f.bound().max(1);
    let ball_size = amb.group_ball_size(k);
    let (tile_side, tiles, worst) = if force_single_tile || amb.d() == 0 {
        let tile = if amb.d() == 0 {
            PointSet::full(&amb)
        } else {
            full_grid_cube(&amb).point_set(&amb)
        };
        let grown = tile.ball_k(k);
        let defect = Ratio::new((grown.len() - tile.len()) as i64, tile.len() as i64);
        (None, vec![tile], defect)
    } else {
        choose_tiles(&amb, k, delta)?
    };

    let cores: Vec<TileCore> = tiles
        .iter()
        .map(|t| invariant_core(t, k))
        .collect::<Result<_, _>>()?;
    let mut in_core = PointSet::empty(&amb);
    for tc in &cores {
        in_core = in_core.union(&tc.core)?;
    }

    let sources: Vec<(usize, i64)> = (0..amb.len())
        .filter(|&x| f.value(x) > 0 && in_core.contains(x))
        .map(|x| (x, f.value(x)))
        .collect();
    let sinks: Vec<(usize, i64)> = (0..amb.len())
        .filter(|&x| f.value(x) < 0)
        .map(|x| (x, -f.value(x)))
        .collect();
    let total_sources: i64 = sources.iter().map(|&(_, m)| m).sum();
    let mut matcher = UnitMatcher::new(&amb, &sources, &sinks, k);
    let matched = matcher.solve();
    if matched < total_sources {
        return Err(Error::Internal(format!(
            "matched {matched} of {total_sources} core units although the \
             Hall condition holds"
        )));
    }
    let pairs = matcher.pairs();
    let matching = PartialMatching {
        ambient: amb.clone(),
        k,
        pairs,
    };
    let flow = path_flow(&matching)?;

    // residual accounting in the lifted measure
    let slack = matcher.unmatched_per_sink();
    let mut unmatched_core_units = 0i64;
    for (j, &(site, _)) in sinks.iter().enumerate() {
        if in_core.contains(site) {
            unmatched_core_units += slack[j];
        }
    }
    let non_core = (amb.len() - in_core.len()) as i64;
    let residual_fraction = Ratio::new(
        l * non_core + unmatched_core_units,
        l * amb.len() as i64,
    );
    let residual_bound = Ratio::from_integer(3) * delta * Ratio::from_integer(ball_size);
    if !force_single_tile && residual_fraction >= residual_bound {
        return Err(Error::Internal(format!(
            "residual {residual_fraction} is not below its bound {residual_bound}"
        )));
    }

    let mut exact_sites = PointSet::empty(&amb);
    for x in 0..amb.len() {
        if flow.divergence(x) == Ratio::from_integer(f.value(x)) {
            exact_sites.insert(x);
        }
    }
    // every core site without unmatched sink units must be exact
    let mut covered = in_core.clone();
    for (j, &(site, _)) in sinks.iter().enumerate() {
        if slack[j] > 0 {
            covered.remove(site);
        }
    }
    if !covered.is_subset(&exact_sites) {
        return Err(Error::Internal(
            "a covered core site has inexact divergence".into(),
        ));
    }

    let sup_norm = flow.sup_norm();
    let sup_bound = sup_bound_for(&amb, l, k);
    if sup_norm > Ratio::from_integer(sup_bound) {
        return Err(Error::Internal(format!(
            "flow sup-norm {sup_norm} exceeds the bound {sup_bound}"
        )));
    }

    let report = RealFlowReport {
        k,
        delta,
        levels: l,
        tile_side,
        tile_count: tiles.len(),
        ball_size,
        worst_tile_defect: worst,
        matched_pairs: matching.pairs.len(),
        exact_sites,
        residual_fraction,
        residual_bound,
        sup_norm,
        sup_bound,
    };
    Ok((flow, report))
}
