//! Finite ambient spaces for grid-by-cyclic group actions.
//!
//! An [`Ambient`] is a finite stand-in for the Schreier graph of `Z^d x Delta`
//! acting freely: either a d-torus (every axis wraps) or a d-window (axes
//! clip at the boundary), optionally crossed with cyclic factors
//! `Delta = Z/m_1 x ... x Z/m_r`. Points are enumerated lexicographically
//! with the cyclic coordinates last; that single ordering drives iteration,
//! serialization, and every deterministic tie-break downstream.
//!
//! Generators are one step along a single axis. Grid axes come first
//! (`0..d`), cyclic axes after (`d..d+r`). A positively oriented edge is a
//! `(base, axis)` pair and stands for the move `base -> base + e_axis`.

use serde::{Deserialize, Serialize};

use crate::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridKind {
    Torus,
    Window,
}

/// Finite ambient: grid shape, wrap behavior, and cyclic factors.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Ambient {
    pub kind: GridKind,
    pub sides: Vec<i64>,
    #[serde(default)]
    pub delta_orders: Vec<i64>,
}

/// A single point, grid coordinates then cyclic coordinates.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Point {
    pub coords: Vec<i64>,
    pub delta: Vec<i64>,
}

/// Positively oriented edge `base -> base + e_axis`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OrientedEdge {
    pub base: Point,
    pub axis: usize,
}

/// Validating constructor for [`Ambient`].
///
/// Torus sides and cyclic orders must be at least 2 (a wrap of length 1 is a
/// self-loop and breaks edge antisymmetry); window sides must be at least 1.
pub fn make_ambient(
    kind: GridKind,
    sides: Vec<i64>,
    delta_orders: Vec<i64>,
) -> Result<Ambient, Error> {
    for &s in &sides {
        let min = match kind {
            GridKind::Torus => 2,
            GridKind::Window => 1,
        };
        if s < min {
            return Err(Error::InvalidAmbient(format!(
                "side {s} too small for {kind:?}"
            )));
        }
    }
    for &m in &delta_orders {
        if m < 2 {
            return Err(Error::InvalidAmbient(format!("cyclic order {m} < 2")));
        }
    }
    let mut total: i64 = 1;
    for &n in sides.iter().chain(delta_orders.iter()) {
        total = total.saturating_mul(n);
        if total > (1 << 31) {
            return Err(Error::InvalidAmbient("ambient too large".into()));
        }
    }
    Ok(Ambient {
        kind,
        sides,
        delta_orders,
    })
}

impl Ambient {
    /// Grid dimension `d`.
    pub fn d(&self) -> usize {
        self.sides.len()
    }

    /// Number of cyclic factors.
    pub fn delta_rank(&self) -> usize {
        self.delta_orders.len()
    }

    /// Total number of generator axes (`d + r`).
    pub fn axes(&self) -> usize {
        self.d() + self.delta_rank()
    }

    /// Range of axis `axis` (grid side or cyclic order).
    pub fn axis_len(&self, axis: usize) -> i64 {
        if axis < self.d() {
            self.sides[axis]
        } else {
            self.delta_orders[axis - self.d()]
        }
    }

    /// Whether stepping along `axis` wraps around.
    pub fn axis_wraps(&self, axis: usize) -> bool {
        axis >= self.d() || self.kind == GridKind::Torus
    }

    /// Total point count.
    pub fn len(&self) -> usize {
        let mut n: usize = 1;
        for a in 0..self.axes() {
            n *= self.axis_len(a) as usize;
        }
        n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Point count of the grid part alone.
    pub fn grid_len(&self) -> usize {
        self.sides.iter().map(|&s| s as usize).product()
    }

    /// Point count of the cyclic part alone (1 when there is none).
    pub fn delta_len(&self) -> usize {
        self.delta_orders.iter().map(|&m| m as usize).product()
    }

    fn stride(&self, axis: usize) -> usize {
        let mut s: usize = 1;
        for a in (axis + 1)..self.axes() {
            s *= self.axis_len(a) as usize;
        }
        s
    }

    /// Coordinate of `idx` along `axis`.
    pub fn coord(&self, idx: usize, axis: usize) -> i64 {
        ((idx / self.stride(axis)) % self.axis_len(axis) as usize) as i64
    }

    /// Lexicographic index of a point; coordinates are reduced on wrapping
    /// axes and must lie in range on clipping ones.
    pub fn index(&self, p: &Point) -> Result<usize, Error> {
        if p.coords.len() != self.d() || p.delta.len() != self.delta_rank() {
            return Err(Error::InvalidArgument(
                "point dimension does not match ambient".into(),
            ));
        }
        let mut idx: usize = 0;
        for a in 0..self.axes() {
            let raw = if a < self.d() {
                p.coords[a]
            } else {
                p.delta[a - self.d()]
            };
            let n = self.axis_len(a);
            let c = if self.axis_wraps(a) {
                raw.rem_euclid(n)
            } else if (0..n).contains(&raw) {
                raw
            } else {
                return Err(Error::InvalidArgument(format!(
                    "coordinate {raw} outside window axis of length {n}"
                )));
            };
            idx = idx * n as usize + c as usize;
        }
        Ok(idx)
    }

    /// Point at lexicographic index `idx`.
    pub fn point(&self, idx: usize) -> Point {
        let mut rem = idx;
        let mut all = vec![0i64; self.axes()];
        for a in (0..self.axes()).rev() {
            let n = self.axis_len(a) as usize;
            all[a] = (rem % n) as i64;
            rem /= n;
        }
        let delta = all.split_off(self.d());
        Point { coords: all, delta }
    }

    /// One step along `axis` in direction `dir` (+1 or -1); `None` when the
    /// move leaves a window.
    pub fn step(&self, idx: usize, axis: usize, dir: i64) -> Option<usize> {
        let n = self.axis_len(axis);
        let stride = self.stride(axis);
        let c = self.coord(idx, axis);
        let c2 = c + dir;
        if self.axis_wraps(axis) {
            let w = c2.rem_euclid(n);
            Some((idx as i64 + (w - c) * stride as i64) as usize)
        } else if (0..n).contains(&c2) {
            Some((idx as i64 + dir * stride as i64) as usize)
        } else {
            None
        }
    }

    /// Word metric between two points (sum of per-axis distances).
    pub fn distance(&self, p: usize, q: usize) -> i64 {
        let mut total = 0;
        for a in 0..self.axes() {
            let n = self.axis_len(a);
            let diff = (self.coord(p, a) - self.coord(q, a)).abs();
            total += if self.axis_wraps(a) {
                diff.min(n - diff)
            } else {
                diff
            };
        }
        total
    }

    /// Size of the radius-`k` ball of the acting group (wrap-aware per axis,
    /// no window clipping: the group itself does not see the boundary).
    pub fn group_ball_size(&self, k: usize) -> i64 {
        // counts[c] = number of displacements of cost exactly c, convolved
        // over the axes
        let mut counts = vec![0i64; k + 1];
        counts[0] = 1;
        for a in 0..self.axes() {
            let n = self.axis_len(a);
            let mut profile = vec![0i64; k + 1];
            for (c, slot) in profile.iter_mut().enumerate() {
                let c = c as i64;
                *slot = if c == 0 {
                    1
                } else {
                    axis_displacements(self, a, n, c)
                };
            }
            let mut next = vec![0i64; k + 1];
            for (c1, &v1) in counts.iter().enumerate() {
                if v1 == 0 {
                    continue;
                }
                for (c2, &v2) in profile.iter().enumerate() {
                    if c1 + c2 <= k {
                        next[c1 + c2] += v1 * v2;
                    }
                }
            }
            counts = next;
        }
        counts.iter().sum()
    }

    /// Largest possible word distance between two points.
    pub fn diameter(&self) -> i64 {
        let mut total = 0;
        for a in 0..self.axes() {
            let n = self.axis_len(a);
            total += if self.axis_wraps(a) { n / 2 } else { n - 1 };
        }
        total
    }
}

fn axis_displacements(amb: &Ambient, axis: usize, n: i64, cost: i64) -> i64 {
    if amb.axis_wraps(axis) {
        // on Z/n a displacement of cost c exists for c <= n/2, twice when
        // the two directions differ
        if 2 * cost < n {
            2
        } else if 2 * cost == n {
            1
        } else {
            0
        }
    } else {
        2
    }
}

/// Subset of an ambient, stored as a bitset over lexicographic indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PointSet {
    ambient: Ambient,
    bits: Vec<u64>,
    len: usize,
}

impl PointSet {
    pub fn empty(ambient: &Ambient) -> Self {
        let words = ambient.len().div_ceil(64);
        PointSet {
            ambient: ambient.clone(),
            bits: vec![0; words],
            len: 0,
        }
    }

    pub fn full(ambient: &Ambient) -> Self {
        let mut s = Self::empty(ambient);
        for i in 0..ambient.len() {
            s.insert(i);
        }
        s
    }

    pub fn from_indices(ambient: &Ambient, idxs: impl IntoIterator<Item = usize>) -> Self {
        let mut s = Self::empty(ambient);
        for i in idxs {
            s.insert(i);
        }
        s
    }

    pub fn from_points(ambient: &Ambient, pts: &[Point]) -> Result<Self, Error> {
        let mut s = Self::empty(ambient);
        for p in pts {
            s.insert(ambient.index(p)?);
        }
        Ok(s)
    }

    pub fn ambient(&self) -> &Ambient {
        &self.ambient
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn contains(&self, idx: usize) -> bool {
        self.bits[idx / 64] >> (idx % 64) & 1 == 1
    }

    pub fn insert(&mut self, idx: usize) {
        debug_assert!(idx < self.ambient.len());
        let w = &mut self.bits[idx / 64];
        let m = 1u64 << (idx % 64);
        if *w & m == 0 {
            *w |= m;
            self.len += 1;
        }
    }

    pub fn remove(&mut self, idx: usize) {
        let w = &mut self.bits[idx / 64];
        let m = 1u64 << (idx % 64);
        if *w & m != 0 {
            *w &= !m;
            self.len -= 1;
        }
    }

    /// Ascending index iterator; this is the canonical ordering.
    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter().enumerate().flat_map(|(w, &bits)| {
            let mut rest = bits;
            std::iter::from_fn(move || {
                if rest == 0 {
                    None
                } else {
                    let b = rest.trailing_zeros() as usize;
                    rest &= rest - 1;
                    Some(w * 64 + b)
                }
            })
        })
    }

    pub fn points(&self) -> Vec<Point> {
        self.iter().map(|i| self.ambient.point(i)).collect()
    }

    fn check_same(&self, other: &PointSet) -> Result<(), Error> {
        if self.ambient != other.ambient {
            return Err(Error::AmbientMismatch);
        }
        Ok(())
    }

    pub fn union(&self, other: &PointSet) -> Result<PointSet, Error> {
        self.check_same(other)?;
        let mut out = self.clone();
        for (w, &bits) in other.bits.iter().enumerate() {
            out.bits[w] |= bits;
        }
        out.len = out.bits.iter().map(|w| w.count_ones() as usize).sum();
        Ok(out)
    }

    pub fn intersection(&self, other: &PointSet) -> Result<PointSet, Error> {
        self.check_same(other)?;
        let mut out = self.clone();
        for (w, &bits) in other.bits.iter().enumerate() {
            out.bits[w] &= bits;
        }
        out.len = out.bits.iter().map(|w| w.count_ones() as usize).sum();
        Ok(out)
    }

    pub fn difference(&self, other: &PointSet) -> Result<PointSet, Error> {
        self.check_same(other)?;
        let mut out = self.clone();
        for (w, &bits) in other.bits.iter().enumerate() {
            out.bits[w] &= !bits;
        }
        out.len = out.bits.iter().map(|w| w.count_ones() as usize).sum();
        Ok(out)
    }

    pub fn is_subset(&self, other: &PointSet) -> bool {
        self.bits
            .iter()
            .zip(other.bits.iter())
            .all(|(a, b)| a & !b == 0)
    }

    pub fn is_disjoint(&self, other: &PointSet) -> bool {
        self.bits
            .iter()
            .zip(other.bits.iter())
            .all(|(a, b)| a & b == 0)
    }

    /// Radius-`k` ball in the Schreier graph: `k` rounds of one-step
    /// dilation along every axis (grid and cyclic).
    pub fn ball_k(&self, k: usize) -> PointSet {
        let mut cur = self.clone();
        for _ in 0..k {
            let mut next = cur.clone();
            for x in cur.iter() {
                for a in 0..self.ambient.axes() {
                    for dir in [1, -1] {
                        if let Some(y) = self.ambient.step(x, a, dir) {
                            next.insert(y);
                        }
                    }
                }
            }
            if next.len == cur.len {
                break;
            }
            cur = next;
        }
        cur
    }

    /// Sup-norm 1-neighborhood in the grid directions only: every point
    /// reachable by at most one step along each grid axis. Cyclic
    /// coordinates are left untouched.
    pub fn nbhd(&self) -> PointSet {
        let mut cur = self.clone();
        for a in 0..self.ambient.d() {
            let mut next = cur.clone();
            for x in cur.iter() {
                for dir in [1, -1] {
                    if let Some(y) = self.ambient.step(x, a, dir) {
                        next.insert(y);
                    }
                }
            }
            cur = next;
        }
        cur
    }

    /// One round of erosion: points of `self` all of whose Schreier
    /// neighbors stay in `self`.
    pub fn erode(&self) -> PointSet {
        let mut out = PointSet::empty(&self.ambient);
        'point: for x in self.iter() {
            for a in 0..self.ambient.axes() {
                for dir in [1, -1] {
                    match self.ambient.step(x, a, dir) {
                        Some(y) if self.contains(y) => {}
                        Some(_) => continue 'point,
                        // a missing window neighbor does not leave the set
                        None => {}
                    }
                }
            }
            out.insert(x);
        }
        out
    }
}

/// Positively oriented edges with both endpoints in `a` (grid axes only).
pub fn edges(a: &PointSet) -> Vec<OrientedEdge> {
    let amb = a.ambient();
    let mut out = Vec::new();
    for x in a.iter() {
        for axis in 0..amb.d() {
            if let Some(y) = amb.step(x, axis, 1) {
                if a.contains(y) {
                    out.push(OrientedEdge {
                        base: amb.point(x),
                        axis,
                    });
                }
            }
        }
    }
    out
}

/// Positively oriented edges with at least one endpoint in `a` (grid axes
/// only), sorted by base then axis.
pub fn edges_plus(a: &PointSet) -> Vec<OrientedEdge> {
    let amb = a.ambient();
    let mut seen = std::collections::BTreeSet::new();
    for x in a.iter() {
        for axis in 0..amb.d() {
            if amb.step(x, axis, 1).is_some() {
                seen.insert((x, axis));
            }
            if let Some(y) = amb.step(x, axis, -1) {
                seen.insert((y, axis));
            }
        }
    }
    seen.into_iter()
        .map(|(x, axis)| OrientedEdge {
            base: amb.point(x),
            axis,
        })
        .collect()
}

/// Axis-aligned grid box: `corner + [0, extents]` per grid axis, times all
/// cyclic fibers. Boxes never wrap onto themselves (`extent + 1 <= side`)
/// but on a torus they may straddle the coordinate seam.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CubeSpec {
    pub corner: Vec<i64>,
    pub extents: Vec<i64>,
}

impl CubeSpec {
    pub fn new(amb: &Ambient, corner: Vec<i64>, extents: Vec<i64>) -> Result<Self, Error> {
        if corner.len() != amb.d() || extents.len() != amb.d() {
            return Err(Error::InvalidArgument("cube dimension mismatch".into()));
        }
        for a in 0..amb.d() {
            let n = amb.sides[a];
            if extents[a] < 0 || extents[a] + 1 > n {
                return Err(Error::InvalidArgument(format!(
                    "cube extent {} does not fit axis of length {n}",
                    extents[a]
                )));
            }
            if amb.kind == GridKind::Window && !(0..n - extents[a]).contains(&corner[a]) {
                return Err(Error::InvalidArgument(
                    "cube leaves the window".into(),
                ));
            }
        }
        Ok(CubeSpec { corner, extents }.canonical(amb))
    }

    /// Corner reduced into `[0, side)` on wrapping axes.
    pub fn canonical(mut self, amb: &Ambient) -> Self {
        for a in 0..amb.d() {
            if amb.kind == GridKind::Torus {
                self.corner[a] = self.corner[a].rem_euclid(amb.sides[a]);
            }
        }
        self
    }

    /// Number of points covered (cyclic fibers included).
    pub fn volume(&self, amb: &Ambient) -> i64 {
        let grid: i64 = self.extents.iter().map(|&e| e + 1).product();
        grid * amb.delta_len() as i64
    }

    pub fn axis_contains(&self, amb: &Ambient, axis: usize, x: i64) -> bool {
        let n = amb.sides[axis];
        let rel = (x - self.corner[axis]).rem_euclid(n);
        rel <= self.extents[axis]
    }

    pub fn contains_idx(&self, amb: &Ambient, idx: usize) -> bool {
        (0..amb.d()).all(|a| self.axis_contains(amb, a, amb.coord(idx, a)))
    }

    /// All covered indices, ascending.
    pub fn indices(&self, amb: &Ambient) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.volume(amb) as usize);
        let mut offsets = vec![0i64; amb.d()];
        loop {
            // base grid point for this offset tuple
            let p = Point {
                coords: (0..amb.d())
                    .map(|a| self.corner[a] + offsets[a])
                    .collect(),
                delta: vec![0; amb.delta_rank()],
            };
            let base = amb.index(&p).expect("cube point inside ambient");
            for f in 0..amb.delta_len() {
                out.push(base + f);
            }
            // odometer over extents
            let mut a = amb.d();
            loop {
                if a == 0 {
                    out.sort_unstable();
                    return out;
                }
                a -= 1;
                if offsets[a] < self.extents[a] {
                    offsets[a] += 1;
                    break;
                }
                offsets[a] = 0;
            }
        }
    }

    pub fn point_set(&self, amb: &Ambient) -> PointSet {
        PointSet::from_indices(amb, self.indices(amb))
    }

    /// Sup-norm 1-neighborhood as a box: one step out per face, clipped at
    /// window boundaries and capped at a full axis on tori.
    pub fn nbhd_cube(&self, amb: &Ambient) -> CubeSpec {
        let mut corner = self.corner.clone();
        let mut extents = self.extents.clone();
        for a in 0..amb.d() {
            let n = amb.sides[a];
            match amb.kind {
                GridKind::Torus => {
                    if extents[a] + 2 >= n {
                        corner[a] = 0;
                        extents[a] = n - 1;
                    } else {
                        corner[a] = (corner[a] - 1).rem_euclid(n);
                        extents[a] += 2;
                    }
                }
                GridKind::Window => {
                    let lo = (corner[a] - 1).max(0);
                    let hi = (corner[a] + extents[a] + 1).min(n - 1);
                    corner[a] = lo;
                    extents[a] = hi - lo;
                }
            }
        }
        CubeSpec { corner, extents }
    }

    /// Shrink one layer per face; `None` once any axis empties out.
    pub fn interior_cube(&self, amb: &Ambient) -> Option<CubeSpec> {
        let mut corner = self.corner.clone();
        let mut extents = self.extents.clone();
        for a in 0..amb.d() {
            if extents[a] < 2 {
                return None;
            }
            corner[a] += 1;
            if amb.kind == GridKind::Torus {
                corner[a] = corner[a].rem_euclid(amb.sides[a]);
            }
            extents[a] -= 2;
        }
        Some(CubeSpec { corner, extents })
    }

    /// Intersection as a list of boxes. On a torus two wrapped intervals can
    /// overlap in two arcs, so the result may hold up to `2^d` disjoint
    /// boxes; on a window it is at most one.
    pub fn intersect(&self, amb: &Ambient, other: &CubeSpec) -> Vec<CubeSpec> {
        let mut per_axis: Vec<Vec<(i64, i64)>> = Vec::with_capacity(amb.d());
        for a in 0..amb.d() {
            let n = amb.sides[a];
            let (s1, l1) = (self.corner[a], self.extents[a] + 1);
            let (s2, l2) = (other.corner[a], other.extents[a] + 1);
            let mut arcs = Vec::new();
            if amb.kind == GridKind::Window {
                let lo = s1.max(s2);
                let hi = (s1 + l1 - 1).min(s2 + l2 - 1);
                if lo <= hi {
                    arcs.push((lo, hi - lo));
                }
            } else if l1 == n {
                arcs.push((s2, l2 - 1));
            } else if l2 == n {
                arcs.push((s1, l1 - 1));
            } else {
                let rel = (s2 - s1).rem_euclid(n);
                for shift in [rel, rel - n] {
                    let lo = shift.max(0);
                    let hi = (shift + l2 - 1).min(l1 - 1);
                    if lo <= hi {
                        arcs.push(((s1 + lo).rem_euclid(n), hi - lo));
                    }
                }
            }
            if arcs.is_empty() {
                return Vec::new();
            }
            per_axis.push(arcs);
        }
        let mut out = vec![CubeSpec {
            corner: Vec::new(),
            extents: Vec::new(),
        }];
        for arcs in per_axis {
            let mut next = Vec::new();
            for stem in &out {
                for &(start, ext) in &arcs {
                    let mut c = stem.clone();
                    c.corner.push(start);
                    c.extents.push(ext);
                    next.push(c);
                }
            }
            out = next;
        }
        out
    }

    pub fn is_disjoint(&self, amb: &Ambient, other: &CubeSpec) -> bool {
        self.intersect(amb, other).is_empty()
    }

    /// Whether `other` is contained in `self`, axis by axis.
    pub fn contains_cube(&self, amb: &Ambient, other: &CubeSpec) -> bool {
        (0..amb.d()).all(|a| {
            let n = amb.sides[a];
            if self.extents[a] + 1 == n {
                return true;
            }
            let rel = (other.corner[a] - self.corner[a]).rem_euclid(n);
            if amb.kind == GridKind::Window {
                other.corner[a] >= self.corner[a]
                    && other.corner[a] + other.extents[a] <= self.corner[a] + self.extents[a]
            } else {
                rel + other.extents[a] <= self.extents[a]
            }
        })
    }
}

/// Splits a cube into its interior (points with all grid neighbors inside)
/// and its boundary layer.
pub fn interior_boundary(amb: &Ambient, c: &CubeSpec) -> (PointSet, PointSet) {
    let all = c.point_set(amb);
    let interior = match c.interior_cube(amb) {
        Some(i) => i.point_set(amb),
        None => PointSet::empty(amb),
    };
    let boundary = all.difference(&interior).expect("same ambient");
    (interior, boundary)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn torus(sides: &[i64]) -> Ambient {
        make_ambient(GridKind::Torus, sides.to_vec(), vec![]).unwrap()
    }

    fn pt(coords: &[i64]) -> Point {
        Point {
            coords: coords.to_vec(),
            delta: vec![],
        }
    }

    #[test]
    fn make_ambient_torus_with_delta() {
        let a = make_ambient(GridKind::Torus, vec![8, 8], vec![2]).unwrap();
        assert_eq!(a.len(), 128);
        assert_eq!(a.axes(), 3);
        assert_eq!(a.d(), 2);
    }

    #[test]
    fn make_ambient_rejects_bad_sides() {
        assert!(make_ambient(GridKind::Torus, vec![1, 4], vec![]).is_err());
        assert!(make_ambient(GridKind::Torus, vec![4], vec![1]).is_err());
        assert!(make_ambient(GridKind::Window, vec![0], vec![]).is_err());
    }

    #[test]
    fn index_roundtrip_lexicographic() {
        let a = make_ambient(GridKind::Torus, vec![3, 4], vec![2]).unwrap();
        let mut last = None;
        for i in 0..a.len() {
            let p = a.point(i);
            assert_eq!(a.index(&p).unwrap(), i);
            let key = (p.coords.clone(), p.delta.clone());
            if let Some(prev) = last {
                assert!(prev < key, "enumeration must be lexicographic");
            }
            last = Some(key);
        }
    }

    #[test]
    fn step_wraps_on_torus_and_clips_on_window() {
        let t = torus(&[4]);
        let x = t.index(&pt(&[3])).unwrap();
        assert_eq!(t.step(x, 0, 1), Some(t.index(&pt(&[0])).unwrap()));
        let w = make_ambient(GridKind::Window, vec![4], vec![]).unwrap();
        let y = w.index(&pt(&[3])).unwrap();
        assert_eq!(w.step(y, 0, 1), None);
        assert_eq!(w.step(y, 0, -1), Some(w.index(&pt(&[2])).unwrap()));
    }

    #[test]
    fn edges_of_two_by_two_block() {
        let a = torus(&[8, 8]);
        let block = PointSet::from_points(
            &a,
            &[pt(&[0, 0]), pt(&[0, 1]), pt(&[1, 0]), pt(&[1, 1])],
        )
        .unwrap();
        assert_eq!(edges(&block).len(), 4);
        // every inside edge plus the boundary ones
        let plus = edges_plus(&block);
        assert_eq!(plus.len(), 12);
        for e in edges(&block) {
            assert!(plus.contains(&e));
        }
    }

    #[test]
    fn ball_and_nbhd_counts_on_plane() {
        let a = torus(&[9, 9]);
        let center = PointSet::from_points(&a, &[pt(&[4, 4])]).unwrap();
        assert_eq!(center.ball_k(1).len(), 5);
        assert_eq!(center.ball_k(2).len(), 13);
        assert_eq!(center.nbhd().len(), 9);
    }

    #[test]
    fn ball_k_matches_distance_filter() {
        let a = make_ambient(GridKind::Torus, vec![6, 5], vec![3]).unwrap();
        let x = a.index(&Point {
            coords: vec![2, 3],
            delta: vec![1],
        })
        .unwrap();
        let ball = PointSet::from_indices(&a, [x]).ball_k(3);
        for i in 0..a.len() {
            assert_eq!(ball.contains(i), a.distance(x, i) <= 3, "point {i}");
        }
    }

    #[test]
    fn group_ball_size_matches_bfs() {
        for amb in [
            torus(&[9, 9]),
            make_ambient(GridKind::Torus, vec![6, 6], vec![2]).unwrap(),
            torus(&[4, 4]),
        ] {
            for k in 0..4usize {
                let origin = PointSet::from_indices(&amb, [0]);
                assert_eq!(
                    amb.group_ball_size(k),
                    origin.ball_k(k).len() as i64,
                    "k={k} amb={amb:?}"
                );
            }
        }
    }

    #[test]
    fn cube_volume_and_membership() {
        let a = make_ambient(GridKind::Torus, vec![8, 8], vec![2]).unwrap();
        let c = CubeSpec::new(&a, vec![6, 6], vec![3, 3]).unwrap();
        assert_eq!(c.volume(&a), 32);
        // wraps through the seam
        let inside = a
            .index(&Point {
                coords: vec![1, 0],
                delta: vec![1],
            })
            .unwrap();
        assert!(c.contains_idx(&a, inside));
        assert_eq!(c.point_set(&a).len(), 32);
    }

    #[test]
    fn interior_boundary_partitions_cube() {
        let a = torus(&[10, 10]);
        let c = CubeSpec::new(&a, vec![2, 2], vec![4, 4]).unwrap();
        let (int, bd) = interior_boundary(&a, &c);
        assert_eq!(int.len(), 9);
        assert_eq!(bd.len(), 16);
        assert!(int.is_disjoint(&bd));
        assert!(int.nbhd().is_subset(&c.point_set(&a)));
        // single row has empty interior
        let thin = CubeSpec::new(&a, vec![0, 0], vec![0, 4]).unwrap();
        let (int2, bd2) = interior_boundary(&a, &thin);
        assert!(int2.is_empty());
        assert_eq!(bd2.len(), 5);
    }

    #[test]
    fn cube_intersection_wrapped() {
        let a = torus(&[10]);
        let c1 = CubeSpec::new(&a, vec![7], vec![4]).unwrap(); // {7,8,9,0,1}
        let c2 = CubeSpec::new(&a, vec![9], vec![3]).unwrap(); // {9,0,1,2}
        let meet = c1.intersect(&a, &c2);
        assert_eq!(meet.len(), 1);
        assert_eq!(meet[0].volume(&a), 3); // {9,0,1}
        // large arcs can meet in two pieces
        let c3 = CubeSpec::new(&a, vec![8], vec![6]).unwrap(); // {8..4}
        let c4 = CubeSpec::new(&a, vec![1], vec![8]).unwrap(); // {1..9}
        let meet2 = c3.intersect(&a, &c4);
        let total: i64 = meet2.iter().map(|c| c.volume(&a)).sum();
        assert_eq!(total, 6); // {8,9} and {1,2,3,4}
        assert_eq!(meet2.len(), 2);
    }

    #[test]
    fn cube_containment_and_interior() {
        let a = torus(&[12, 12]);
        let c = CubeSpec::new(&a, vec![10, 10], vec![5, 5]).unwrap();
        let i = c.interior_cube(&a).unwrap();
        assert_eq!(i.corner, vec![11, 11]);
        assert_eq!(i.extents, vec![3, 3]);
        assert!(c.contains_cube(&a, &i));
        assert!(c.contains_cube(&a, &c));
        assert!(!i.contains_cube(&a, &c));
        assert!(c.nbhd_cube(&a).contains_cube(&a, &c));
    }
}
