//! The Markov operator `P(x,y) = mu_xy / mu(x)`, the Laplacian `P - I`,
//! heat kernels, and walks killed on exiting a subset.
//!
//! Heat kernels are computed by iterated operator application, never dense
//! matrix powers, so hosts up to ~10^5 vertices stay cheap. The kernel
//! `p_n(x,y) = P_n(x,y)/mu(y)` is symmetric by reversibility, and the column
//! `p_n(o, .)` evolves under one Markov application per step.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::{VertexId, VertexSet, WeightedGraph};

/// Per-vertex real values over a graph (zero-extended over subdomains).
pub type FunctionTable = Vec<f64>;

/// `(Pf)(x) = sum_y P(x,y) f(y)`.
pub fn apply_markov(g: &WeightedGraph, f: &[f64]) -> FunctionTable {
    debug_assert_eq!(f.len(), g.vertex_count());
    let mut out = vec![0.0; f.len()];
    for x in g.vertices() {
        let mut acc = 0.0;
        for (y, w) in g.neighbors(x) {
            acc += w * f[y.index()];
        }
        out[x.index()] = acc / g.mu(x);
    }
    out
}

/// `(Delta f)(x) = (Pf)(x) - f(x)`.
pub fn apply_laplacian(g: &WeightedGraph, f: &[f64]) -> FunctionTable {
    let mut out = apply_markov(g, f);
    for (o, v) in out.iter_mut().zip(f) {
        *o -= v;
    }
    out
}

/// Killed Markov operator: `(P^U f)(x) = sum_{y in U} P(x,y) f(y)` for
/// `x in U`, zero outside `U`.
pub fn killed_apply(g: &WeightedGraph, u: &VertexSet, f: &[f64]) -> FunctionTable {
    debug_assert_eq!(f.len(), g.vertex_count());
    let mut out = vec![0.0; f.len()];
    for x in u.iter() {
        let mut acc = 0.0;
        for (y, w) in g.neighbors(x) {
            if u.contains(y) {
                acc += w * f[y.index()];
            }
        }
        out[x.index()] = acc / g.mu(x);
    }
    out
}

/// Heat kernel column family `p_n(o, .)` for `n = 0..=nmax`.
#[derive(Debug, Clone)]
pub struct HeatKernelSeries {
    pub origin: VertexId,
    tables: Vec<FunctionTable>,
}

impl HeatKernelSeries {
    pub fn nmax(&self) -> usize {
        self.tables.len() - 1
    }

    /// `p_n(origin, x)`.
    pub fn p(&self, n: usize, x: VertexId) -> f64 {
        self.tables[n][x.index()]
    }

    pub fn table(&self, n: usize) -> &[f64] {
        &self.tables[n]
    }
}

/// Computes `p_n(o, .)` by iterated Markov application starting from
/// `p_0 = delta_o / mu(o)`.
pub fn heat_kernel_series(g: &WeightedGraph, o: VertexId, nmax: usize) -> HeatKernelSeries {
    let mut tables = Vec::with_capacity(nmax + 1);
    let mut current = vec![0.0; g.vertex_count()];
    current[o.index()] = 1.0 / g.mu(o);
    tables.push(current.clone());
    for _ in 0..nmax {
        current = apply_markov(g, &current);
        tables.push(current.clone());
    }
    HeatKernelSeries { origin: o, tables }
}

/// Killed heat kernel column `p^U_n(o, .)` for `n = 0..=nmax`.
pub fn killed_kernel_series(
    g: &WeightedGraph,
    u: &VertexSet,
    o: VertexId,
    nmax: usize,
) -> HeatKernelSeries {
    let mut tables = Vec::with_capacity(nmax + 1);
    let mut current = vec![0.0; g.vertex_count()];
    if u.contains(o) {
        current[o.index()] = 1.0 / g.mu(o);
    }
    tables.push(current.clone());
    for _ in 0..nmax {
        current = killed_apply(g, u, &current);
        tables.push(current.clone());
    }
    HeatKernelSeries { origin: o, tables }
}

/// Checks the killed semigroup identity
/// `P^U_{n+m}(x,y) = sum_z P^U_n(x,z) P^U_m(z,y)` on deterministically
/// sampled vertex pairs and returns the worst absolute deviation.
pub fn semigroup_check(g: &WeightedGraph, u: &VertexSet, n: usize, m: usize) -> f64 {
    let samples = sample_pairs(g.vertex_count(), 20, 0x5eed_cafe);
    let mut worst = 0.0f64;
    for (x, y) in samples {
        // P^U_k(x, y) = p^U_k(x, y) mu(y), columns from both endpoints.
        let from_x = killed_kernel_series(g, u, x, n + m);
        let from_y = killed_kernel_series(g, u, y, m);
        let direct = from_x.p(n + m, y) * g.mu(y);
        let mut composed = 0.0;
        for z in u.iter() {
            let pn_xz = from_x.p(n, z) * g.mu(z);
            // P^U_m(z, y) = p^U_m(z, y) mu(y) = p^U_m(y, z) mu(y)
            let pm_zy = from_y.p(m, z) * g.mu(y);
            composed += pn_xz * pm_zy;
        }
        worst = worst.max((direct - composed).abs());
    }
    worst
}

/// Deterministic pseudo-random vertex pairs for reproducible deviation
/// checks.
pub fn sample_pairs(n: usize, count: usize, seed: u64) -> Vec<(VertexId, VertexId)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            (
                VertexId(rng.gen_range(0..n as u32)),
                VertexId(rng.gen_range(0..n as u32)),
            )
        })
        .collect()
}

/// Reversibility check on request: max over `n <= nmax` of
/// `|p_n(x,y) - p_n(y,x)|`, computed from independent kernel columns.
pub fn reversibility_defect(g: &WeightedGraph, x: VertexId, y: VertexId, nmax: usize) -> f64 {
    let from_x = heat_kernel_series(g, x, nmax);
    let from_y = heat_kernel_series(g, y, nmax);
    (0..=nmax)
        .map(|n| (from_x.p(n, y) - from_y.p(n, x)).abs())
        .fold(0.0, f64::max)
}

/// Max deviation of `sum_y P(x,y)` from 1 over all vertices.
pub fn stochasticity_defect(g: &WeightedGraph) -> f64 {
    let ones = vec![1.0; g.vertex_count()];
    apply_markov(g, &ones)
        .iter()
        .map(|v| (v - 1.0).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{bfs_distances, build_graph};

    fn p4() -> WeightedGraph {
        build_graph(&[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0)]).unwrap()
    }

    fn k2() -> WeightedGraph {
        build_graph(&[(0, 1, 1.0)]).unwrap()
    }

    #[test]
    fn markov_preserves_constants() {
        let g = p4();
        let f = vec![3.5; 4];
        for v in apply_markov(&g, &f) {
            assert!((v - 3.5).abs() < 1e-15);
        }
    }

    #[test]
    fn markov_k2_swap() {
        let g = k2();
        assert_eq!(apply_markov(&g, &[1.0, 0.0]), vec![0.0, 1.0]);
    }

    #[test]
    fn markov_p4_hand_values() {
        let g = p4();
        let pf = apply_markov(&g, &[0.0, 1.0, 2.0, 3.0]);
        assert_eq!(pf, vec![1.0, 1.0, 2.0, 2.0]);
        let df = apply_laplacian(&g, &[0.0, 1.0, 2.0, 3.0]);
        assert_eq!(df, vec![1.0, 0.0, 0.0, -1.0]);
    }

    #[test]
    fn laplacian_of_coordinate_is_zero_in_lattice_interior() {
        let t = crate::builders::lattice(2, 5).unwrap();
        let g = &t.graph;
        // coordinate functions are harmonic away from the boundary
        let coords = lattice_coords(5);
        assert_eq!(coords.len(), g.vertex_count());
        let f: Vec<f64> = coords.iter().map(|c| c[0] as f64).collect();
        let df = apply_laplacian(g, &f);
        let dist = bfs_distances(g, t.center);
        for v in g.vertices() {
            if (dist[v.index()] as usize) < 5 {
                assert!(df[v.index()].abs() < 1e-14, "interior vertex {v}");
            }
        }
    }

    // coordinates of lattice(2, r) vertices in enumeration order
    fn lattice_coords(r: usize) -> Vec<[i64; 2]> {
        use std::collections::{HashMap, VecDeque};
        let mut order = vec![[0i64; 2]];
        let mut seen: HashMap<[i64; 2], usize> = HashMap::new();
        seen.insert([0, 0], 0);
        let mut dq = VecDeque::new();
        dq.push_back(([0i64, 0i64], 0usize));
        while let Some((p, d)) = dq.pop_front() {
            if d == r {
                continue;
            }
            for step in [[1, 0], [-1, 0], [0, 1], [0, -1]] {
                let q = [p[0] + step[0], p[1] + step[1]];
                if !seen.contains_key(&q) {
                    seen.insert(q, order.len());
                    order.push(q);
                    dq.push_back((q, d + 1));
                }
            }
        }
        order
    }

    #[test]
    fn heat_kernel_basics() {
        let g = k2();
        let hk = heat_kernel_series(&g, VertexId(0), 4);
        assert_eq!(hk.p(0, VertexId(0)), 1.0 / g.mu(VertexId(0)));
        assert_eq!(hk.p(1, VertexId(1)), 1.0);
        assert_eq!(hk.p(2, VertexId(1)), 0.0);
    }

    #[test]
    fn hat_weights_k2_first_return() {
        // loop 1/2 and edge 1/2 at each vertex: p_1(0,0) = 1/2
        let g = build_graph(&[(0, 0, 0.5), (0, 1, 0.5), (1, 1, 0.5)]).unwrap();
        let hk = heat_kernel_series(&g, VertexId(0), 1);
        assert!((hk.p(1, VertexId(0)) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn probability_conservation_and_propagation() {
        let t = crate::builders::lattice(2, 6).unwrap();
        let g = &t.graph;
        let hk = heat_kernel_series(g, t.center, 5);
        let dist = bfs_distances(g, t.center);
        for n in 0..=5 {
            let mass: f64 = g
                .vertices()
                .map(|x| hk.p(n, x) * g.mu(x))
                .sum();
            assert!((mass - 1.0).abs() < 1e-12, "mass at step {n}: {mass}");
            for x in g.vertices() {
                if (dist[x.index()] as usize) > n {
                    assert_eq!(hk.p(n, x), 0.0, "finite propagation");
                }
            }
        }
    }

    #[test]
    fn heat_kernel_reversibility_sampled() {
        let t = crate::builders::lattice(2, 5).unwrap();
        let g = &t.graph;
        for (x, y) in sample_pairs(g.vertex_count(), 10, 7) {
            let from_x = heat_kernel_series(g, x, 20);
            let from_y = heat_kernel_series(g, y, 20);
            for n in 0..=20 {
                assert!(
                    (from_x.p(n, y) - from_y.p(n, x)).abs() < 1e-12,
                    "p_{n}({x},{y})"
                );
            }
        }
    }

    #[test]
    fn killed_apply_edge_cases() {
        let g = p4();
        let full = VertexSet::full(4);
        let f = vec![1.0, -2.0, 0.5, 3.0];
        assert_eq!(killed_apply(&g, &full, &f), apply_markov(&g, &f));

        let u = VertexSet::new(4, [VertexId(1), VertexId(2)]);
        let mut f_u = vec![0.0; 4];
        f_u[1] = 1.0;
        f_u[2] = 1.0;
        let out = killed_apply(&g, &u, &f_u);
        assert!((out[1] - 0.5).abs() < 1e-15);
        assert!((out[2] - 0.5).abs() < 1e-15);
        assert_eq!(out[0], 0.0);

        let empty = VertexSet::new(4, []);
        assert_eq!(killed_apply(&g, &empty, &f), vec![0.0; 4]);
    }

    #[test]
    fn killed_walk_substochastic() {
        let g = p4();
        let u = VertexSet::new(4, [VertexId(1), VertexId(2)]);
        let ones = vec![1.0; 4];
        let out = killed_apply(&g, &u, &ones);
        for x in u.iter() {
            assert!(out[x.index()] <= 1.0 + 1e-15);
            // both 1 and 2 are adjacent to the complement, so strictly below 1
            assert!(out[x.index()] < 1.0);
        }
    }

    #[test]
    fn semigroup_identity() {
        let g = k2();
        let full = VertexSet::full(2);
        assert_eq!(semigroup_check(&g, &full, 0, 3), 0.0);
        assert!(semigroup_check(&g, &full, 1, 1) < 1e-14);

        let g = p4();
        let u = VertexSet::new(4, [VertexId(1), VertexId(2)]);
        assert!(semigroup_check(&g, &u, 2, 3) < 1e-12);
    }
}
