//! Immutable weighted graphs with the graph metric, balls, spheres, and
//! volume profiles.
//!
//! A weighted graph carries a symmetric positive edge weight `mu_xy` on each
//! undirected edge (loops allowed, stored once) and the derived vertex weight
//! `mu(x) = sum_{y ~ x} mu_xy`. All other modules treat graph values as
//! immutable: queries are pure and safe to run concurrently.

use std::collections::{HashSet, VecDeque};
use std::fmt;

use crate::error::{Error, Result};

/// Dense vertex index, stable for the lifetime of the owning graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VertexId(pub u32);

impl VertexId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Finite connected graph with symmetric positive edge weights.
///
/// Adjacency is stored in CSR form with both directions of every edge
/// materialized; a loop `x ~ x` appears once and contributes once to `mu(x)`.
#[derive(Debug, Clone)]
pub struct WeightedGraph {
    offsets: Vec<usize>,
    neighbors: Vec<u32>,
    weights: Vec<f64>,
    vertex_weights: Vec<f64>,
}

impl WeightedGraph {
    #[inline]
    pub fn vertex_count(&self) -> usize {
        self.vertex_weights.len()
    }

    pub fn vertices(&self) -> impl Iterator<Item = VertexId> + '_ {
        (0..self.vertex_count() as u32).map(VertexId)
    }

    /// Neighbors of `x` with edge weights, loops included once.
    #[inline]
    pub fn neighbors(&self, x: VertexId) -> impl Iterator<Item = (VertexId, f64)> + '_ {
        let lo = self.offsets[x.index()];
        let hi = self.offsets[x.index() + 1];
        self.neighbors[lo..hi]
            .iter()
            .zip(&self.weights[lo..hi])
            .map(|(&n, &w)| (VertexId(n), w))
    }

    #[inline]
    pub fn degree(&self, x: VertexId) -> usize {
        self.offsets[x.index() + 1] - self.offsets[x.index()]
    }

    /// Vertex weight `mu(x)`.
    #[inline]
    pub fn mu(&self, x: VertexId) -> f64 {
        self.vertex_weights[x.index()]
    }

    pub fn vertex_weights(&self) -> &[f64] {
        &self.vertex_weights
    }

    /// Total measure `mu(V)`.
    pub fn total_measure(&self) -> f64 {
        self.vertex_weights.iter().sum()
    }

    /// Edge weight `mu_xy`, or 0 when `x` and `y` are not adjacent.
    pub fn edge_weight(&self, x: VertexId, y: VertexId) -> f64 {
        self.neighbors(x)
            .find(|&(n, _)| n == y)
            .map_or(0.0, |(_, w)| w)
    }

    /// Undirected edges `(u, v, w)` with `u <= v`, each reported once.
    pub fn undirected_edges(&self) -> Vec<(u32, u32, f64)> {
        let mut out = Vec::new();
        for x in self.vertices() {
            for (y, w) in self.neighbors(x) {
                if x.0 <= y.0 {
                    out.push((x.0, y.0, w));
                }
            }
        }
        out
    }

    /// Serializes to the edge-list text format: one `u v w` line per
    /// undirected edge, loops as `u u w`.
    pub fn to_edge_list(&self) -> String {
        let mut s = String::new();
        for (u, v, w) in self.undirected_edges() {
            s.push_str(&format!("{} {} {}\n", u, v, w));
        }
        s
    }

    /// Parses the edge-list text format. Blank lines and `#` comments are
    /// ignored; everything else must be `u v w`.
    pub fn from_edge_list(text: &str) -> Result<WeightedGraph> {
        let mut edges = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            let parse = |tok: Option<&str>, what: &str| -> Result<String> {
                tok.map(str::to_owned).ok_or_else(|| Error::ParseError {
                    line: i + 1,
                    msg: format!("missing {what}"),
                })
            };
            let u: u32 = parse(it.next(), "source vertex")?
                .parse()
                .map_err(|e| Error::ParseError {
                    line: i + 1,
                    msg: format!("bad vertex: {e}"),
                })?;
            let v: u32 = parse(it.next(), "target vertex")?
                .parse()
                .map_err(|e| Error::ParseError {
                    line: i + 1,
                    msg: format!("bad vertex: {e}"),
                })?;
            let w: f64 = parse(it.next(), "weight")?
                .parse()
                .map_err(|e| Error::ParseError {
                    line: i + 1,
                    msg: format!("bad weight: {e}"),
                })?;
            if let Some(extra) = it.next() {
                return Err(Error::ParseError {
                    line: i + 1,
                    msg: format!("unexpected trailing token {extra:?}"),
                });
            }
            edges.push((u, v, w));
        }
        build_graph(&edges)
    }
}

/// Builds a graph from undirected weighted edges.
///
/// Rejects non-positive weights, duplicate undirected edges, and
/// disconnected inputs. A single vertex with a loop is accepted.
pub fn build_graph(edges: &[(u32, u32, f64)]) -> Result<WeightedGraph> {
    if edges.is_empty() {
        return Err(Error::InvalidParameter("at least one edge required".into()));
    }
    let mut n = 0usize;
    let mut seen = HashSet::new();
    for &(u, v, w) in edges {
        if !(w > 0.0) || !w.is_finite() {
            return Err(Error::NonPositiveWeight { u, v, w });
        }
        let key = (u.min(v), u.max(v));
        if !seen.insert(key) {
            return Err(Error::DuplicateEdge { u, v });
        }
        n = n.max(u as usize + 1).max(v as usize + 1);
    }

    let mut deg = vec![0usize; n];
    for &(u, v, _) in edges {
        deg[u as usize] += 1;
        if u != v {
            deg[v as usize] += 1;
        }
    }
    let mut offsets = vec![0usize; n + 1];
    for i in 0..n {
        offsets[i + 1] = offsets[i] + deg[i];
    }
    let mut neighbors = vec![0u32; offsets[n]];
    let mut weights = vec![0f64; offsets[n]];
    let mut cursor = offsets.clone();
    for &(u, v, w) in edges {
        neighbors[cursor[u as usize]] = v;
        weights[cursor[u as usize]] = w;
        cursor[u as usize] += 1;
        if u != v {
            neighbors[cursor[v as usize]] = u;
            weights[cursor[v as usize]] = w;
            cursor[v as usize] += 1;
        }
    }

    let vertex_weights: Vec<f64> = (0..n)
        .map(|i| weights[offsets[i]..offsets[i + 1]].iter().sum())
        .collect();

    let g = WeightedGraph {
        offsets,
        neighbors,
        weights,
        vertex_weights,
    };

    // Isolated vertices have mu = 0 and also break connectivity.
    if g.vertex_weights.iter().any(|&m| !(m > 0.0)) {
        return Err(Error::Disconnected);
    }
    let dist = bfs_distances(&g, VertexId(0));
    if dist.iter().any(|&d| d == u32::MAX) {
        return Err(Error::Disconnected);
    }
    Ok(g)
}

/// BFS distances from `source`; unreachable vertices get `u32::MAX`.
pub fn bfs_distances(g: &WeightedGraph, source: VertexId) -> Vec<u32> {
    let mut dist = vec![u32::MAX; g.vertex_count()];
    dist[source.index()] = 0;
    let mut queue = VecDeque::new();
    queue.push_back(source);
    while let Some(x) = queue.pop_front() {
        let dx = dist[x.index()];
        for (y, _) in g.neighbors(x) {
            if dist[y.index()] == u32::MAX {
                dist[y.index()] = dx + 1;
                queue.push_back(y);
            }
        }
    }
    dist
}

/// Graph distance: minimal number of edges among paths from `x` to `y`.
pub fn distance(g: &WeightedGraph, x: VertexId, y: VertexId) -> usize {
    if x == y {
        return 0;
    }
    bfs_distances(g, x)[y.index()] as usize
}

/// Ordered vertex subset with O(1) membership test and deterministic
/// iteration order.
#[derive(Debug, Clone)]
pub struct VertexSet {
    members: Vec<VertexId>,
    mask: Vec<bool>,
}

impl VertexSet {
    /// Collects `members` into a set over a host with `host_size` vertices.
    /// Duplicates are dropped; the first occurrence fixes the order.
    pub fn new(host_size: usize, members: impl IntoIterator<Item = VertexId>) -> VertexSet {
        let mut mask = vec![false; host_size];
        let mut list = Vec::new();
        for v in members {
            assert!(v.index() < host_size, "vertex {v} outside host");
            if !mask[v.index()] {
                mask[v.index()] = true;
                list.push(v);
            }
        }
        VertexSet {
            members: list,
            mask,
        }
    }

    pub fn full(host_size: usize) -> VertexSet {
        VertexSet::new(host_size, (0..host_size as u32).map(VertexId))
    }

    /// Ball `B(o, r)` of the host graph as a vertex set.
    pub fn ball(g: &WeightedGraph, center: VertexId, radius: usize) -> VertexSet {
        let dist = bfs_distances(g, center);
        VertexSet::new(
            g.vertex_count(),
            (0..g.vertex_count() as u32)
                .map(VertexId)
                .filter(|v| (dist[v.index()] as usize) <= radius),
        )
    }

    #[inline]
    pub fn contains(&self, v: VertexId) -> bool {
        self.mask[v.index()]
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn host_size(&self) -> usize {
        self.mask.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.members.iter().copied()
    }

    pub fn members(&self) -> &[VertexId] {
        &self.members
    }

    pub fn is_subset_of(&self, other: &VertexSet) -> bool {
        self.iter().all(|v| other.contains(v))
    }
}

/// Exact ball/sphere measures around a center, radius by radius.
#[derive(Debug, Clone)]
pub struct BallProfile {
    pub center: VertexId,
    /// `V(o, n) = mu(B(o, n))` for `n = 0..=rmax`.
    pub ball_measure: Vec<f64>,
    /// `|S(o, n)|` vertex counts per sphere.
    pub sphere_count: Vec<usize>,
    /// `mu(S(o, n))` per sphere.
    pub sphere_measure: Vec<f64>,
}

impl BallProfile {
    pub fn rmax(&self) -> usize {
        self.ball_measure.len() - 1
    }
}

/// Exact BFS layer measures around `o` up to radius `rmax`.
///
/// Radii beyond the eccentricity of `o` repeat the total measure with empty
/// spheres.
pub fn volume_profile(g: &WeightedGraph, o: VertexId, rmax: usize) -> BallProfile {
    let dist = bfs_distances(g, o);
    let mut sphere_count = vec![0usize; rmax + 1];
    let mut sphere_measure = vec![0f64; rmax + 1];
    for v in g.vertices() {
        let d = dist[v.index()] as usize;
        if d <= rmax {
            sphere_count[d] += 1;
            sphere_measure[d] += g.mu(v);
        }
    }
    let mut ball_measure = vec![0f64; rmax + 1];
    let mut acc = 0.0;
    for n in 0..=rmax {
        acc += sphere_measure[n];
        ball_measure[n] = acc;
    }
    BallProfile {
        center: o,
        ball_measure,
        sphere_count,
        sphere_measure,
    }
}

/// Abstract volume data consumed by series diagnostics: either a measured
/// [`BallProfile`] or a closed-form profile that extends past any buildable
/// host.
pub trait VolumeProfile {
    /// `V(o, n)`; must be positive for every covered `n`.
    fn volume(&self, n: usize) -> f64;
    /// `mu(S(o, n))`.
    fn sphere_measure(&self, n: usize) -> f64;
    /// Largest covered radius, or `None` for closed forms.
    fn rmax(&self) -> Option<usize>;
}

impl VolumeProfile for BallProfile {
    fn volume(&self, n: usize) -> f64 {
        self.ball_measure[n.min(self.ball_measure.len() - 1)]
    }
    fn sphere_measure(&self, n: usize) -> f64 {
        if n < self.sphere_measure.len() {
            self.sphere_measure[n]
        } else {
            0.0
        }
    }
    fn rmax(&self) -> Option<usize> {
        Some(self.rmax())
    }
}

/// The uniform one-step constant: `alpha = min over directed edges of
/// mu_xy / mu(x)`. Callers compare it against their own threshold.
///
/// Every valid graph has at least one edge, so this returns `Some` in
/// practice; `None` only guards the degenerate empty case.
pub fn p0_constant(g: &WeightedGraph) -> Option<f64> {
    let mut alpha = f64::INFINITY;
    for x in g.vertices() {
        let mx = g.mu(x);
        for (_, w) in g.neighbors(x) {
            alpha = alpha.min(w / mx);
        }
    }
    if alpha.is_finite() {
        Some(alpha)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p4() -> WeightedGraph {
        build_graph(&[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0)]).unwrap()
    }

    #[test]
    fn k2_construction() {
        let g = build_graph(&[(0, 1, 1.0)]).unwrap();
        assert_eq!(g.vertex_count(), 2);
        assert_eq!(g.mu(VertexId(0)), 1.0);
        assert_eq!(g.mu(VertexId(1)), 1.0);
    }

    #[test]
    fn single_vertex_loop_accepted() {
        let g = build_graph(&[(0, 0, 1.0)]).unwrap();
        assert_eq!(g.vertex_count(), 1);
        // a loop contributes once
        assert_eq!(g.mu(VertexId(0)), 1.0);
    }

    #[test]
    fn disconnected_rejected() {
        assert!(matches!(
            build_graph(&[(0, 1, 1.0), (2, 3, 1.0)]),
            Err(Error::Disconnected)
        ));
    }

    #[test]
    fn duplicate_edge_rejected() {
        assert!(matches!(
            build_graph(&[(0, 1, 1.0), (1, 0, 2.0)]),
            Err(Error::DuplicateEdge { .. })
        ));
    }

    #[test]
    fn nonpositive_weight_rejected() {
        assert!(matches!(
            build_graph(&[(0, 1, 0.0)]),
            Err(Error::NonPositiveWeight { .. })
        ));
        assert!(matches!(
            build_graph(&[(0, 1, -2.0)]),
            Err(Error::NonPositiveWeight { .. })
        ));
    }

    #[test]
    fn p4_distance() {
        let g = p4();
        assert_eq!(distance(&g, VertexId(0), VertexId(3)), 3);
        assert_eq!(distance(&g, VertexId(2), VertexId(2)), 0);
        assert_eq!(
            distance(&g, VertexId(0), VertexId(3)),
            distance(&g, VertexId(3), VertexId(0))
        );
    }

    #[test]
    fn reversibility_identity() {
        // mu(x) P(x,y) = mu_xy = mu(y) P(y,x) holds by construction; check a
        // weighted host explicitly.
        let g = build_graph(&[(0, 1, 0.5), (1, 2, 2.5), (0, 2, 1.25)]).unwrap();
        for x in g.vertices() {
            for (y, w) in g.neighbors(x) {
                let lhs = g.mu(x) * (w / g.mu(x));
                let rhs = g.mu(y) * (g.edge_weight(y, x) / g.mu(y));
                assert!((lhs - rhs).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn k2_profile() {
        let g = build_graph(&[(0, 1, 1.0)]).unwrap();
        let prof = volume_profile(&g, VertexId(0), 1);
        assert_eq!(prof.ball_measure, vec![1.0, 2.0]);
        assert_eq!(prof.sphere_count, vec![1, 1]);
    }

    #[test]
    fn p4_profile_hand_count() {
        // mu = (1, 2, 2, 1); B(1,0) = {1}, B(1,1) = {0,1,2}, B(1,2) = all.
        let g = p4();
        let prof = volume_profile(&g, VertexId(1), 2);
        assert_eq!(prof.ball_measure, vec![2.0, 5.0, 6.0]);
    }

    #[test]
    fn sphere_measures_sum_to_total() {
        let g = p4();
        let prof = volume_profile(&g, VertexId(0), 3);
        let total: f64 = prof.sphere_measure.iter().sum();
        assert!((total - g.total_measure()).abs() < 1e-12);
    }

    #[test]
    fn p0_values() {
        let k2 = build_graph(&[(0, 1, 1.0)]).unwrap();
        assert_eq!(p0_constant(&k2), Some(1.0));
        // P4: minimum over its 6 directed edge ratios is 1/2.
        assert_eq!(p0_constant(&p4()), Some(0.5));
    }

    #[test]
    fn edge_list_round_trip() {
        let g = build_graph(&[(0, 1, 1.5), (1, 2, 0.25), (2, 2, 3.0)]).unwrap();
        let text = g.to_edge_list();
        let h = WeightedGraph::from_edge_list(&text).unwrap();
        assert_eq!(g.vertex_count(), h.vertex_count());
        for x in g.vertices() {
            assert!((g.mu(x) - h.mu(x)).abs() < 1e-15);
        }
    }

    #[test]
    fn edge_list_comments_and_errors() {
        let ok = "# a comment\n0 1 1.0\n\n1 2 2.0 # trailing\n";
        assert!(WeightedGraph::from_edge_list(ok).is_ok());
        assert!(matches!(
            WeightedGraph::from_edge_list("0 1\n"),
            Err(Error::ParseError { line: 1, .. })
        ));
        assert!(matches!(
            WeightedGraph::from_edge_list("0 1 1.0 junk\n"),
            Err(Error::ParseError { line: 1, .. })
        ));
    }

    #[test]
    fn vertex_set_ball() {
        let g = p4();
        let b = VertexSet::ball(&g, VertexId(1), 1);
        assert_eq!(b.len(), 3);
        assert!(b.contains(VertexId(0)) && b.contains(VertexId(1)) && b.contains(VertexId(2)));
        assert!(!b.contains(VertexId(3)));
    }
}
