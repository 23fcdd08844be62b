//! Independent reference deciders.
//!
//! Everything here is deliberately separate from the production code paths:
//! a generic augmenting-path max-flow over an explicitly materialized
//! capacity graph, plus brute-force subset enumeration for tiny ambients.
//! The test suites pit the fast implementations against these slower but
//! simpler routes, so this module must not share machinery with them.

use crate::lattice::{Ambient, PointSet};
use crate::{Error, HallSide};

const INF: i64 = i64::MAX / 4;

/// Directed capacity graph solved by breadth-first augmenting paths.
pub struct CapGraph {
    adj: Vec<Vec<usize>>,
    /// Paired storage: edges `2i` and `2i + 1` are mutual reverses.
    caps: Vec<i64>,
    heads: Vec<usize>,
}

impl CapGraph {
    pub fn new(nodes: usize) -> Self {
        CapGraph {
            adj: vec![Vec::new(); nodes],
            caps: Vec::new(),
            heads: Vec::new(),
        }
    }

    pub fn add_node(&mut self) -> usize {
        self.adj.push(Vec::new());
        self.adj.len() - 1
    }

    pub fn add_edge(&mut self, from: usize, to: usize, cap: i64) {
        debug_assert!(cap >= 0);
        let id = self.caps.len();
        self.caps.push(cap);
        self.heads.push(to);
        self.adj[from].push(id);
        self.caps.push(0);
        self.heads.push(from);
        self.adj[to].push(id + 1);
    }

    /// Maximum flow from `s` to `t`; mutates residual capacities.
    pub fn max_flow(&mut self, s: usize, t: usize) -> i64 {
        let mut total = 0i64;
        loop {
            // BFS for a shortest augmenting path
            let mut parent_edge = vec![usize::MAX; self.adj.len()];
            let mut queue = std::collections::VecDeque::new();
            queue.push_back(s);
            parent_edge[s] = usize::MAX - 1;
            while let Some(u) = queue.pop_front() {
                if u == t {
                    break;
                }
                for &e in &self.adj[u] {
                    let v = self.heads[e];
                    if self.caps[e] > 0 && parent_edge[v] == usize::MAX {
                        parent_edge[v] = e;
                        queue.push_back(v);
                    }
                }
            }
            if parent_edge[t] == usize::MAX {
                return total;
            }
            let mut bottleneck = INF;
            let mut v = t;
            while v != s {
                let e = parent_edge[v];
                bottleneck = bottleneck.min(self.caps[e]);
                v = self.heads[e ^ 1];
            }
            let mut v = t;
            while v != s {
                let e = parent_edge[v];
                self.caps[e] -= bottleneck;
                self.caps[e ^ 1] += bottleneck;
                v = self.heads[e ^ 1];
            }
            total += bottleneck;
        }
    }

    /// Source side of a minimum cut; call after [`CapGraph::max_flow`].
    pub fn min_cut_side(&self, s: usize) -> Vec<bool> {
        let mut seen = vec![false; self.adj.len()];
        let mut queue = std::collections::VecDeque::new();
        seen[s] = true;
        queue.push_back(s);
        while let Some(u) = queue.pop_front() {
            for &e in &self.adj[u] {
                let v = self.heads[e];
                if self.caps[e] > 0 && !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        seen
    }
}

/// Verdict of [`hall_feasible_oracle`], one flag per transport direction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HallOracleVerdict {
    /// Positive mass can all be routed to negative mass within distance `k`.
    pub positive: bool,
    /// Negative mass can all be routed to positive mass within distance `k`.
    pub negative: bool,
}

impl HallOracleVerdict {
    pub fn satisfied(&self) -> bool {
        self.positive && self.negative
    }
}

fn check_weights(amb: &Ambient, f: &[i64]) -> Result<(), Error> {
    if f.len() != amb.len() {
        return Err(Error::InvalidArgument(format!(
            "weight vector has {} entries for an ambient of {} points",
            f.len(),
            amb.len()
        )));
    }
    Ok(())
}

fn routable(amb: &Ambient, supply: &[(usize, i64)], demand: &[(usize, i64)], k: usize) -> bool {
    let total: i64 = supply.iter().map(|&(_, m)| m).sum();
    if total == 0 {
        return true;
    }
    let mut g = CapGraph::new(2 + supply.len() + demand.len());
    let (s, t) = (0, 1);
    for (i, &(_, m)) in supply.iter().enumerate() {
        g.add_edge(s, 2 + i, m);
    }
    for (j, &(_, m)) in demand.iter().enumerate() {
        g.add_edge(2 + supply.len() + j, t, m);
    }
    for (i, &(x, _)) in supply.iter().enumerate() {
        for (j, &(y, _)) in demand.iter().enumerate() {
            if amb.distance(x, y) <= k as i64 {
                g.add_edge(2 + i, 2 + supply.len() + j, INF);
            }
        }
    }
    g.max_flow(s, t) == total
}

/// Decides both directions of the distance-`k` mass transport condition by
/// materializing the full bipartite graph and running max-flow.
pub fn hall_feasible_oracle(
    amb: &Ambient,
    f: &[i64],
    k: usize,
) -> Result<HallOracleVerdict, Error> {
    check_weights(amb, f)?;
    let pos: Vec<(usize, i64)> = f
        .iter()
        .enumerate()
        .filter(|&(_, &v)| v > 0)
        .map(|(x, &v)| (x, v))
        .collect();
    let neg: Vec<(usize, i64)> = f
        .iter()
        .enumerate()
        .filter(|&(_, &v)| v < 0)
        .map(|(x, &v)| (x, -v))
        .collect();
    Ok(HallOracleVerdict {
        positive: routable(amb, &pos, &neg, k),
        negative: routable(amb, &neg, &pos, k),
    })
}

/// Whether a perfect matching between `a` and `b` exists in which every
/// matched pair is at distance at most `budget`.
pub fn equidecomposable_oracle(
    a: &PointSet,
    b: &PointSet,
    budget: i64,
) -> Result<bool, Error> {
    if a.ambient() != b.ambient() {
        return Err(Error::AmbientMismatch);
    }
    if a.len() != b.len() {
        return Ok(false);
    }
    if a.is_empty() {
        return Ok(true);
    }
    let amb = a.ambient();
    let xs: Vec<usize> = a.iter().collect();
    let ys: Vec<usize> = b.iter().collect();
    let mut g = CapGraph::new(2 + xs.len() + ys.len());
    let (s, t) = (0, 1);
    for i in 0..xs.len() {
        g.add_edge(s, 2 + i, 1);
    }
    for j in 0..ys.len() {
        g.add_edge(2 + xs.len() + j, t, 1);
    }
    for (i, &x) in xs.iter().enumerate() {
        for (j, &y) in ys.iter().enumerate() {
            if amb.distance(x, y) <= budget {
                g.add_edge(2 + i, 2 + xs.len() + j, 1);
            }
        }
    }
    Ok(g.max_flow(s, t) == xs.len() as i64)
}

/// Whether some flow with divergence `f` and every edge value in
/// `[-cap, cap]` exists, decided as a capacitated b-flow problem over the
/// materialized edge graph.
pub fn flow_feasibility_oracle(amb: &Ambient, f: &[i64], cap: i64) -> Result<bool, Error> {
    check_weights(amb, f)?;
    let total_pos: i64 = f.iter().filter(|&&v| v > 0).sum();
    let total_neg: i64 = -f.iter().filter(|&&v| v < 0).sum::<i64>();
    if total_pos != total_neg {
        return Ok(false);
    }
    if total_pos == 0 && cap >= 0 {
        return Ok(true);
    }
    let n = amb.len();
    let mut g = CapGraph::new(2 + n);
    let (s, t) = (0, 1);
    for (x, &v) in f.iter().enumerate() {
        if v > 0 {
            g.add_edge(s, 2 + x, v);
        } else if v < 0 {
            g.add_edge(2 + x, t, -v);
        }
    }
    for x in 0..n {
        for axis in 0..amb.axes() {
            if let Some(y) = amb.step(x, axis, 1) {
                if y != x {
                    g.add_edge(2 + x, 2 + y, cap);
                    g.add_edge(2 + y, 2 + x, cap);
                }
            }
        }
    }
    Ok(g.max_flow(s, t) == total_pos)
}

/// Brute-force check of the distance-`k` transport condition by enumerating
/// every subset of the ambient. Only usable on ambients of at most 20
/// points. Returns the first violating subset found, or `None` when the
/// condition holds.
pub fn exhaustive_hall_check(
    amb: &Ambient,
    f: &[i64],
    k: usize,
) -> Result<Option<(HallSide, Vec<usize>)>, Error> {
    check_weights(amb, f)?;
    let n = amb.len();
    if n > 20 {
        return Err(Error::InvalidArgument(format!(
            "exhaustive enumeration over {n} points is not tractable"
        )));
    }
    // reach[x] = bitmask of the radius-k ball around x
    let mut reach = vec![0u64; n];
    for (x, slot) in reach.iter_mut().enumerate() {
        let ball = PointSet::from_indices(amb, [x]).ball_k(k);
        for y in ball.iter() {
            *slot |= 1 << y;
        }
    }
    for mask in 1u64..(1 << n) {
        let mut ball = 0u64;
        let mut pos_mass = 0i64;
        let mut neg_mass = 0i64;
        let mut m = mask;
        while m != 0 {
            let x = m.trailing_zeros() as usize;
            m &= m - 1;
            ball |= reach[x];
            if f[x] > 0 {
                pos_mass += f[x];
            } else if f[x] < 0 {
                neg_mass += -f[x];
            }
        }
        let mut pos_reach = 0i64;
        let mut neg_reach = 0i64;
        let mut b = ball;
        while b != 0 {
            let y = b.trailing_zeros() as usize;
            b &= b - 1;
            if f[y] > 0 {
                pos_reach += f[y];
            } else if f[y] < 0 {
                neg_reach += -f[y];
            }
        }
        let members = || (0..n).filter(|&x| mask >> x & 1 == 1).collect::<Vec<_>>();
        if pos_mass > neg_reach {
            return Ok(Some((HallSide::Positive, members())));
        }
        if neg_mass > pos_reach {
            return Ok(Some((HallSide::Negative, members())));
        }
    }
    Ok(None)
}
