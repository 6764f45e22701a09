//! Builders for truncated hosts of the standard infinite examples: integer
//! lattices, the discrete Heisenberg group, and general Cayley balls.
//!
//! A [`TruncatedGraph`] is a finite ball of an infinite graph together with
//! the radius up to which its metric data can be trusted. BFS enumeration is
//! single-threaded so vertex numbering is deterministic.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::graph::{
    bfs_distances, build_graph, VertexId, VertexSet, VolumeProfile, WeightedGraph,
};

/// Hard cap on enumerated vertices for every builder.
pub const SIZE_LIMIT: usize = 5_000_000;

/// A finite ball standing in for an infinite graph.
///
/// Every vertex at distance `< trust_radius` from the center has all of its
/// infinite-graph neighbors present, so balls, spheres, and heat kernels are
/// exact up to that radius.
#[derive(Debug, Clone)]
pub struct TruncatedGraph {
    pub graph: WeightedGraph,
    pub center: VertexId,
    pub trust_radius: usize,
    pub boundary: VertexSet,
}

impl TruncatedGraph {
    fn from_graph(graph: WeightedGraph, center: VertexId, trust_radius: usize) -> TruncatedGraph {
        let dist = bfs_distances(&graph, center);
        let boundary = VertexSet::new(
            graph.vertex_count(),
            graph
                .vertices()
                .filter(|v| dist[v.index()] as usize >= trust_radius),
        );
        TruncatedGraph {
            graph,
            center,
            trust_radius,
            boundary,
        }
    }

    /// Interior = host minus boundary.
    pub fn interior(&self) -> VertexSet {
        VertexSet::new(
            self.graph.vertex_count(),
            self.graph
                .vertices()
                .filter(|&v| !self.boundary.contains(v)),
        )
    }
}

/// Increasing sequence of vertex sets inside a truncated host.
#[derive(Debug, Clone)]
pub struct Exhaustion {
    pub sets: Vec<VertexSet>,
    pub radii: Vec<usize>,
}

/// Nested balls `B(center, radii[i])`; radii must be strictly increasing and
/// stay below the trust radius.
pub fn exhaustion_of(t: &TruncatedGraph, radii: &[usize]) -> Result<Exhaustion> {
    if radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::NotStrictlyIncreasing);
    }
    if let Some(&r) = radii.iter().find(|&&r| r >= t.trust_radius) {
        return Err(Error::RadiusExceedsTrust {
            radius: r,
            trust: t.trust_radius,
        });
    }
    let dist = bfs_distances(&t.graph, t.center);
    let sets = radii
        .iter()
        .map(|&r| {
            VertexSet::new(
                t.graph.vertex_count(),
                t.graph
                    .vertices()
                    .filter(|v| dist[v.index()] as usize <= r),
            )
        })
        .collect();
    Ok(Exhaustion {
        sets,
        radii: radii.to_vec(),
    })
}

/// Group element encoded as a fixed-size integer tuple. Lattices use the
/// leading `d` coordinates, the Heisenberg group uses three.
pub type GroupElem = [i64; 8];

fn checked(a: i64, b: i64) -> i64 {
    a.checked_add(b).expect("group coordinate overflow")
}

/// Heisenberg multiplication on `(a, b, c)` triples: upper-triangular
/// unipotent 3x3 integer matrices with `a` above the diagonal in row 2,
/// `b` in row 1, `c` in the corner.
pub fn heisenberg_mul(x: GroupElem, y: GroupElem) -> GroupElem {
    let mut z = [0i64; 8];
    z[0] = checked(x[0], y[0]);
    z[1] = checked(x[1], y[1]);
    z[2] = checked(
        checked(x[2], y[2]),
        x[1].checked_mul(y[0]).expect("group coordinate overflow"),
    );
    z
}

/// Inverse of a Heisenberg triple.
pub fn heisenberg_inv(x: GroupElem) -> GroupElem {
    let mut z = [0i64; 8];
    z[0] = -x[0];
    z[1] = -x[1];
    z[2] = x[0] * x[1] - x[2];
    z
}

/// Componentwise addition; the free abelian groups.
pub fn lattice_mul(x: GroupElem, y: GroupElem) -> GroupElem {
    let mut z = [0i64; 8];
    for i in 0..8 {
        z[i] = checked(x[i], y[i]);
    }
    z
}

struct BallEnumeration {
    elems: Vec<GroupElem>,
    index: HashMap<GroupElem, u32>,
}

/// Breadth-first enumeration of the ball of radius `r` around `identity`.
fn enumerate_ball(
    mult: &dyn Fn(GroupElem, GroupElem) -> GroupElem,
    identity: GroupElem,
    gens: &[GroupElem],
    r: usize,
) -> Result<BallEnumeration> {
    let mut elems = vec![identity];
    let mut index = HashMap::new();
    index.insert(identity, 0u32);
    let mut dist = vec![0usize];
    let mut head = 0usize;
    while head < elems.len() {
        let x = elems[head];
        let dx = dist[head];
        head += 1;
        if dx == r {
            continue;
        }
        for &s in gens {
            let y = mult(x, s);
            if !index.contains_key(&y) {
                if elems.len() >= SIZE_LIMIT {
                    return Err(Error::SizeLimit {
                        got: elems.len() + 1,
                        limit: SIZE_LIMIT,
                    });
                }
                index.insert(y, elems.len() as u32);
                elems.push(y);
                dist.push(dx + 1);
            }
        }
    }
    Ok(BallEnumeration { elems, index })
}

fn edges_of_ball(
    mult: &dyn Fn(GroupElem, GroupElem) -> GroupElem,
    ball: &BallEnumeration,
    gens: &[GroupElem],
    weight: f64,
) -> Vec<(u32, u32, f64)> {
    let mut edges = Vec::new();
    for (i, &x) in ball.elems.iter().enumerate() {
        for &s in gens {
            let y = mult(x, s);
            if let Some(&j) = ball.index.get(&y) {
                if (i as u32) <= j {
                    edges.push((i as u32, j, weight));
                }
            }
        }
    }
    edges
}

/// Truncation of `Z^d` to the l1 ball of radius `r`, unit edge weights.
/// Interior vertices have `mu(x) = 2d`.
pub fn lattice(d: usize, r: usize) -> Result<TruncatedGraph> {
    if d == 0 || d > 8 {
        return Err(Error::InvalidParameter(format!(
            "lattice dimension must be in 1..=8, got {d}"
        )));
    }
    if r == 0 {
        return Err(Error::InvalidParameter("radius must be >= 1".into()));
    }
    if let Some(count) = lattice_ball_count(d, r) {
        if count > SIZE_LIMIT as u128 {
            return Err(Error::SizeLimit {
                got: count as usize,
                limit: SIZE_LIMIT,
            });
        }
    }
    let mut gens = Vec::with_capacity(2 * d);
    for i in 0..d {
        let mut plus = [0i64; 8];
        plus[i] = 1;
        let mut minus = [0i64; 8];
        minus[i] = -1;
        gens.push(plus);
        gens.push(minus);
    }
    let ball = enumerate_ball(&lattice_mul, [0i64; 8], &gens, r)?;
    let edges = edges_of_ball(&lattice_mul, &ball, &gens, 1.0);
    let graph = build_graph(&edges)?;
    Ok(TruncatedGraph::from_graph(graph, VertexId(0), r))
}

/// Truncation of the discrete Heisenberg group with the standard symmetric
/// generating set `{a, a^-1, b, b^-1}`, unit edge weights.
pub fn heisenberg(r: usize) -> Result<TruncatedGraph> {
    if r == 0 {
        return Err(Error::InvalidParameter("radius must be >= 1".into()));
    }
    let mut a = [0i64; 8];
    a[0] = 1;
    let mut a_inv = [0i64; 8];
    a_inv[0] = -1;
    let mut b = [0i64; 8];
    b[1] = 1;
    let mut b_inv = [0i64; 8];
    b_inv[1] = -1;
    let gens = [a, a_inv, b, b_inv];
    let ball = enumerate_ball(&heisenberg_mul, [0i64; 8], &gens, r)?;
    let edges = edges_of_ball(&heisenberg_mul, &ball, &gens, 1.0);
    let graph = build_graph(&edges)?;
    Ok(TruncatedGraph::from_graph(graph, VertexId(0), r))
}

/// Triples enumerated by [`heisenberg`], in vertex order.
pub fn heisenberg_elements(r: usize) -> Result<Vec<(i64, i64, i64)>> {
    let mut a = [0i64; 8];
    a[0] = 1;
    let mut a_inv = [0i64; 8];
    a_inv[0] = -1;
    let mut b = [0i64; 8];
    b[1] = 1;
    let mut b_inv = [0i64; 8];
    b_inv[1] = -1;
    let ball = enumerate_ball(&heisenberg_mul, [0i64; 8], &[a, a_inv, b, b_inv], r)?;
    Ok(ball.elems.iter().map(|e| (e[0], e[1], e[2])).collect())
}

/// Cayley ball of radius `r` for an arbitrary group multiplication oracle.
///
/// Edges follow `x ~ y` iff `x^-1 y` is a generator, with `mu_xy = 1/|S|`,
/// so every vertex has `mu(x) = 1`. If the identity is a generator every
/// vertex carries a loop. The generator list must be closed under inversion,
/// and the oracle is spot-checked for associativity on generator triples.
pub fn cayley_ball(
    mult: impl Fn(GroupElem, GroupElem) -> GroupElem,
    identity: GroupElem,
    gens: &[GroupElem],
    r: usize,
) -> Result<TruncatedGraph> {
    if gens.is_empty() {
        return Err(Error::InvalidParameter("empty generator set".into()));
    }
    if r == 0 {
        return Err(Error::InvalidParameter("radius must be >= 1".into()));
    }
    for &s in gens {
        let has_inverse = gens.iter().any(|&t| mult(s, t) == identity);
        if !has_inverse {
            return Err(Error::AsymmetricGenerators);
        }
    }
    for &a in gens.iter().take(4) {
        for &b in gens.iter().take(4) {
            for &c in gens.iter().take(4) {
                if mult(mult(a, b), c) != mult(a, mult(b, c)) {
                    return Err(Error::InvalidParameter(
                        "multiplication oracle is not associative".into(),
                    ));
                }
            }
        }
    }
    let weight = 1.0 / gens.len() as f64;
    let ball = enumerate_ball(&mult, identity, gens, r)?;
    let edges = edges_of_ball(&mult, &ball, gens, weight);
    let graph = build_graph(&edges)?;
    Ok(TruncatedGraph::from_graph(graph, VertexId(0), r))
}

/// Exact number of integer points in the l1 ball of radius `n` in `Z^d`:
/// `sum_k 2^k C(d,k) C(n,k)`. `None` on overflow.
pub fn lattice_ball_count(d: usize, n: usize) -> Option<u128> {
    let mut total: u128 = 0;
    for k in 0..=d.min(n) {
        let term = (1u128 << k)
            .checked_mul(binomial(d as u128, k as u128)?)?
            .checked_mul(binomial(n as u128, k as u128)?)?;
        total = total.checked_add(term)?;
    }
    Some(total)
}

fn binomial(n: u128, k: u128) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut num: u128 = 1;
    for i in 0..k {
        num = num.checked_mul(n - i)?;
        num /= i + 1;
    }
    Some(num)
}

/// Deterministic random connected weighted host for batteries: a random
/// spanning tree plus `extra_edge_factor * n` extra edges, weights uniform
/// in `[0.5, 2.0]`. Same seed, same graph.
pub fn random_host(seed: u64, n: usize, extra_edge_factor: f64) -> WeightedGraph {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut edges: Vec<(u32, u32, f64)> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for v in 1..n as u32 {
        let u = rng.gen_range(0..v);
        let w = rng.gen_range(0.5..2.0);
        edges.push((u, v, w));
        seen.insert((u, v));
    }
    let extras = (extra_edge_factor * n as f64) as usize;
    let mut attempts = 0;
    let mut added = 0;
    while added < extras && attempts < 20 * extras + 100 {
        attempts += 1;
        let a = rng.gen_range(0..n as u32);
        let b = rng.gen_range(0..n as u32);
        let key = (a.min(b), a.max(b));
        if a == b || seen.contains(&key) {
            continue;
        }
        seen.insert(key);
        edges.push((key.0, key.1, rng.gen_range(0.5..2.0)));
        added += 1;
    }
    build_graph(&edges).expect("random host construction is connected by design")
}

/// Closed-form volume profile of `Z^d` under the Cayley normalization
/// `mu(x) = 1`, so `V(o, n)` is the l1 ball vertex count. Extends series
/// diagnostics far beyond any buildable host.
#[derive(Debug, Clone, Copy)]
pub struct LatticeProfile {
    pub d: usize,
}

impl VolumeProfile for LatticeProfile {
    fn volume(&self, n: usize) -> f64 {
        lattice_ball_count(self.d, n).map_or(f64::INFINITY, |c| c as f64)
    }
    fn sphere_measure(&self, n: usize) -> f64 {
        if n == 0 {
            1.0
        } else {
            self.volume(n) - self.volume(n - 1)
        }
    }
    fn rmax(&self) -> Option<usize> {
        None
    }
}
