//! The hat-weight smoothing transform and exact verification of the
//! combinatorial identities behind it.
//!
//! The transform replaces the edge weight by
//! `hat mu_xy = (1/2) mu_xy + (1/2) sum_z mu_xz mu_zy / mu(z)`,
//! which plants a loop at every vertex, preserves vertex weights exactly,
//! and realizes `hat P = (P + P^2)/2`. Iterating gives
//! `hat P_n = 2^{-n} sum_m C(n,m) P_{n+m}`, and the partial sums of the two
//! kernels sandwich each other through the exact rational coefficients
//! `c_k = sum_{m+n=k, m<=n} 2^{-n} C(n,m)`, which stay in `[1/2, 1]`.
//!
//! Coefficient arithmetic is exact (big rationals); matrix identities are
//! checked exactly on small rational-weight hosts and to 1e-12 in floating
//! point otherwise.

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::collections::BTreeMap;

use crate::builders::TruncatedGraph;
use crate::error::{Error, Result};
use crate::graph::{
    bfs_distances, build_graph, p0_constant, VertexId, WeightedGraph,
};
use crate::walk::heat_kernel_series;

/// Hat-weight transform: new graph on the same vertices with
/// `hat mu_xy = (1/2) mu_xy + (1/2) sum_z mu_xz mu_zy / mu(z)`.
pub fn hat_graph(g: &WeightedGraph) -> WeightedGraph {
    let mut edges = Vec::new();
    for x in g.vertices() {
        let mut row: BTreeMap<u32, f64> = BTreeMap::new();
        for (y, w) in g.neighbors(x) {
            *row.entry(y.0).or_insert(0.0) += 0.5 * w;
        }
        for (z, wxz) in g.neighbors(x) {
            let mz = g.mu(z);
            for (y, wzy) in g.neighbors(z) {
                *row.entry(y.0).or_insert(0.0) += 0.5 * wxz * wzy / mz;
            }
        }
        for (&y, &w) in &row {
            if x.0 <= y {
                edges.push((x.0, y, w));
            }
        }
    }
    build_graph(&edges).expect("hat transform preserves validity")
}

/// Hat transform of a truncated host; the trusted radius halves because hat
/// steps cover two original steps.
pub fn hat_truncated(t: &TruncatedGraph) -> TruncatedGraph {
    let graph = hat_graph(&t.graph);
    let trust_radius = t.trust_radius / 2;
    let dist = bfs_distances(&graph, t.center);
    let boundary = crate::graph::VertexSet::new(
        graph.vertex_count(),
        graph
            .vertices()
            .filter(|v| dist[v.index()] as usize >= trust_radius),
    );
    TruncatedGraph {
        graph,
        center: t.center,
        trust_radius,
        boundary,
    }
}

fn big_binomial(n: usize, k: usize) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigInt::one();
    for i in 0..k {
        acc *= BigInt::from(n - i);
        acc /= BigInt::from(i + 1);
    }
    acc
}

fn pow2_rational(exp: i64) -> BigRational {
    let two = BigInt::from(2);
    if exp >= 0 {
        BigRational::from_integer(two.pow(exp as u32))
    } else {
        BigRational::new(BigInt::one(), two.pow((-exp) as u32))
    }
}

/// Exact rational coefficient sequences of the sandwich argument.
#[derive(Debug, Clone)]
pub struct SmoothingCoefficients {
    /// `c_k` for `k = 0..=2*kmax + 1`.
    pub c: Vec<BigRational>,
    /// `a_k = 4^k c_{2k}` for `k = 0..=kmax`.
    pub a: Vec<BigInt>,
    /// `abar_k = 2^{2k+1} c_{2k+1}` for `k = 0..=kmax`.
    pub a_bar: Vec<BigInt>,
    /// `b_k = a_k - a_{k-1}` for `k = 1..=kmax` (index 0 unused, zero).
    pub b: Vec<BigInt>,
    /// `bbar_k = abar_k - abar_{k-1}` likewise.
    pub b_bar: Vec<BigInt>,
}

/// Computes the exact sequences up to `kmax`:
/// `c_k = sum_{(m,n): m+n=k, 0<=m<=n} 2^{-n} C(n,m)` and the derived
/// `a`, `abar`, `b`, `bbar` families.
pub fn coefficients(kmax: usize) -> SmoothingCoefficients {
    let c: Vec<BigRational> = (0..=2 * kmax + 1)
        .map(|k| {
            let mut acc = BigRational::zero();
            for m in 0..=k / 2 {
                let n = k - m;
                acc += pow2_rational(-(n as i64)) * BigRational::from_integer(big_binomial(n, m));
            }
            acc
        })
        .collect();
    let a: Vec<BigInt> = (0..=kmax)
        .map(|k| {
            let v = pow2_rational(2 * k as i64) * &c[2 * k];
            debug_assert!(v.is_integer());
            v.to_integer()
        })
        .collect();
    let a_bar: Vec<BigInt> = (0..=kmax)
        .map(|k| {
            let v = pow2_rational(2 * k as i64 + 1) * &c[2 * k + 1];
            debug_assert!(v.is_integer());
            v.to_integer()
        })
        .collect();
    let mut b = vec![BigInt::zero(); kmax + 1];
    let mut b_bar = vec![BigInt::zero(); kmax + 1];
    for k in 1..=kmax {
        b[k] = &a[k] - &a[k - 1];
        b_bar[k] = &a_bar[k] - &a_bar[k - 1];
    }
    SmoothingCoefficients {
        c,
        a,
        a_bar,
        b,
        b_bar,
    }
}

impl SmoothingCoefficients {
    /// `c_k` as f64 for floating-point sandwich checks.
    pub fn c_f64(&self, k: usize) -> f64 {
        rational_to_f64(&self.c[k])
    }

    /// Exact check `b_k = 2^{2k-1}` and `bbar_k = 2^{2k}` for every
    /// computed `k >= 2`.
    pub fn b_matches_closed_forms(&self) -> bool {
        let two = BigInt::from(2);
        (2..self.b.len()).all(|k| self.b[k] == two.pow(2 * k as u32 - 1))
            && (2..self.b_bar.len()).all(|k| self.b_bar[k] == two.pow(2 * k as u32))
    }

    /// Exact check `1/2 <= c_k <= 1` for every computed `k`.
    pub fn c_in_half_one_band(&self) -> bool {
        let half = BigRational::new(BigInt::one(), BigInt::from(2));
        let one = BigRational::one();
        self.c.iter().all(|c| *c >= half && *c <= one)
    }

    /// Exact CSV export `k,numerator,denominator`.
    pub fn c_to_csv(&self) -> String {
        let mut s = String::from("k,numerator,denominator\n");
        for (k, v) in self.c.iter().enumerate() {
            s.push_str(&format!("{},{},{}\n", k, v.numer(), v.denom()));
        }
        s
    }
}

fn rational_to_f64(r: &BigRational) -> f64 {
    use num_traits::ToPrimitive;
    r.to_f64().expect("rational in f64 range")
}

/// Dense Markov matrix `P(x,y)` of a small host.
fn dense_markov(g: &WeightedGraph) -> DMatrix<f64> {
    let n = g.vertex_count();
    let mut p = DMatrix::zeros(n, n);
    for x in g.vertices() {
        for (y, w) in g.neighbors(x) {
            p[(x.index(), y.index())] += w / g.mu(x);
        }
    }
    p
}

/// Verifies `hat P_n = 2^{-n} sum_{m<=n} C(n,m) P_{n+m}` entrywise on dense
/// powers, returning the max absolute deviation over `n <= nmax`.
pub fn binomial_identity_check(g: &WeightedGraph, nmax: usize) -> Result<f64> {
    if g.vertex_count() > 200 {
        return Err(Error::SizeLimit {
            got: g.vertex_count(),
            limit: 200,
        });
    }
    let p = dense_markov(g);
    let hat = hat_graph(g);
    let ph = dense_markov(&hat);
    let n = g.vertex_count();

    let mut p_powers = vec![DMatrix::identity(n, n)];
    for i in 1..=2 * nmax {
        let next = &p_powers[i - 1] * &p;
        p_powers.push(next);
    }
    let mut hat_power = DMatrix::identity(n, n);
    let mut worst = 0.0f64;
    for step in 0..=nmax {
        if step > 0 {
            hat_power = &hat_power * &ph;
        }
        let mut expect = DMatrix::zeros(n, n);
        for m in 0..=step {
            let coeff = binomial_f64(step, m) / 2f64.powi(step as i32);
            expect += &p_powers[step + m] * coeff;
        }
        let dev = (&hat_power - &expect).abs().max();
        worst = worst.max(dev);
    }
    Ok(worst)
}

fn binomial_f64(n: usize, k: usize) -> f64 {
    let mut acc = 1.0f64;
    let k = k.min(n - k);
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// Exact-rational variant of [`binomial_identity_check`]: every weight is a
/// dyadic rational (it came from an f64), so the identity can be tested with
/// zero tolerance. Returns true when every entry matches exactly.
pub fn binomial_identity_check_exact(g: &WeightedGraph, nmax: usize) -> Result<bool> {
    let n = g.vertex_count();
    if n > 64 {
        return Err(Error::SizeLimit { got: n, limit: 64 });
    }
    let p = rational_markov(g);
    let hat = hat_graph_exact_markov(g);
    let mut p_powers = vec![rational_identity(n)];
    for i in 1..=2 * nmax {
        let next = rational_matmul(&p_powers[i - 1], &p);
        p_powers.push(next);
    }
    let mut hat_power = rational_identity(n);
    for step in 0..=nmax {
        if step > 0 {
            hat_power = rational_matmul(&hat_power, &hat);
        }
        for i in 0..n {
            for j in 0..n {
                let mut expect = BigRational::zero();
                for m in 0..=step {
                    expect += pow2_rational(-(step as i64))
                        * BigRational::from_integer(big_binomial(step, m))
                        * &p_powers[step + m][i][j];
                }
                if expect != hat_power[i][j] {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

type RatMatrix = Vec<Vec<BigRational>>;

fn rational_identity(n: usize) -> RatMatrix {
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        BigRational::one()
                    } else {
                        BigRational::zero()
                    }
                })
                .collect()
        })
        .collect()
}

fn rational_matmul(a: &RatMatrix, b: &RatMatrix) -> RatMatrix {
    let n = a.len();
    let mut out = rational_identity(n);
    for (i, row) in out.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            let mut acc = BigRational::zero();
            for k in 0..n {
                if !a[i][k].is_zero() && !b[k][j].is_zero() {
                    acc += &a[i][k] * &b[k][j];
                }
            }
            *cell = acc;
        }
    }
    out
}

fn rational_weights(g: &WeightedGraph) -> Vec<Vec<(usize, BigRational)>> {
    g.vertices()
        .map(|x| {
            g.neighbors(x)
                .map(|(y, w)| {
                    (
                        y.index(),
                        BigRational::from_float(w).expect("finite weight"),
                    )
                })
                .collect()
        })
        .collect()
}

fn rational_mu(adj: &[Vec<(usize, BigRational)>]) -> Vec<BigRational> {
    adj.iter()
        .map(|row| {
            let mut acc = BigRational::zero();
            for (_, w) in row {
                acc += w;
            }
            acc
        })
        .collect()
}

fn rational_markov(g: &WeightedGraph) -> RatMatrix {
    let adj = rational_weights(g);
    let mu = rational_mu(&adj);
    let n = adj.len();
    let mut p = vec![vec![BigRational::zero(); n]; n];
    for (x, row) in adj.iter().enumerate() {
        for (y, w) in row {
            p[x][*y] += w / &mu[x];
        }
    }
    p
}

/// Exact hat Markov matrix `(P + P^2)/2` built from the hat weights (not
/// from P itself), so it independently witnesses the transition identity.
fn hat_graph_exact_markov(g: &WeightedGraph) -> RatMatrix {
    let adj = rational_weights(g);
    let mu = rational_mu(&adj);
    let n = adj.len();
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    let mut hat = vec![vec![BigRational::zero(); n]; n];
    for x in 0..n {
        for (y, wxy) in &adj[x] {
            hat[x][*y] += &half * wxy;
        }
        for (z, wxz) in &adj[x] {
            for (y, wzy) in &adj[*z] {
                hat[x][*y] += &half * wxz * wzy / &mu[*z];
            }
        }
    }
    // normalize rows by hat mu(x) = mu(x)
    for x in 0..n {
        for y in 0..n {
            if !hat[x][y].is_zero() {
                hat[x][y] = &hat[x][y] / &mu[x];
            }
        }
    }
    hat
}

/// Exact check that the hat transform preserves vertex weights:
/// `sum_y hat mu_xy == mu(x)` in rational arithmetic, every vertex.
pub fn hat_preserves_vertex_weights_exact(g: &WeightedGraph) -> bool {
    let adj = rational_weights(g);
    let mu = rational_mu(&adj);
    let n = adj.len();
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    for x in 0..n {
        let mut total = BigRational::zero();
        for (_, wxy) in &adj[x] {
            total += &half * wxy;
        }
        for (z, wxz) in &adj[x] {
            for (_, wzy) in &adj[*z] {
                total += &half * wxz * wzy / &mu[*z];
            }
        }
        if total != mu[x] {
            return false;
        }
    }
    true
}

/// Margins of the partial-sum sandwich
/// `sum_{n<=l} c_n P_n <= sum_{n<=l} hat P_n <= sum_{n<=2l} c_n P_n`.
#[derive(Debug, Clone, Serialize)]
pub struct SandwichReport {
    pub l: usize,
    /// min over entries of (middle - lower); nonnegative when the lower
    /// bound holds.
    pub lower_margin: f64,
    /// min over entries of (upper - middle).
    pub upper_margin: f64,
    pub pass: bool,
}

pub fn sandwich_check(g: &WeightedGraph, l: usize) -> Result<SandwichReport> {
    if g.vertex_count() > 200 {
        return Err(Error::SizeLimit {
            got: g.vertex_count(),
            limit: 200,
        });
    }
    let coeffs = coefficients(l.max(1));
    let p = dense_markov(g);
    let hat = hat_graph(g);
    let ph = dense_markov(&hat);
    let n = g.vertex_count();

    let mut lower = DMatrix::zeros(n, n);
    let mut upper = DMatrix::zeros(n, n);
    let mut middle = DMatrix::zeros(n, n);
    let mut p_power = DMatrix::identity(n, n);
    for i in 0..=2 * l {
        if i > 0 {
            p_power = &p_power * &p;
        }
        let c = coeffs.c_f64(i);
        if i <= l {
            lower += &p_power * c;
        }
        upper += &p_power * c;
    }
    let mut hat_power = DMatrix::identity(n, n);
    for i in 0..=l {
        if i > 0 {
            hat_power = &hat_power * &ph;
        }
        middle += &hat_power;
    }
    let lower_margin = (&middle - &lower).min();
    let upper_margin = (&upper - &middle).min();
    Ok(SandwichReport {
        l,
        lower_margin,
        upper_margin,
        pass: lower_margin >= -1e-12 && upper_margin >= -1e-12,
    })
}

/// Structural facts about the hat graph of a host.
#[derive(Debug, Clone, Serialize)]
pub struct StructureReport {
    pub p0_alpha: f64,
    /// min over vertices of `hat mu_xx / hat mu(x)`; the loop part of the
    /// delta condition.
    pub min_loop_ratio: f64,
    /// min over hat edges of `hat mu_xy / hat mu(x)`.
    pub min_edge_ratio: f64,
    /// `alpha^2 / 2`, the guaranteed delta constant.
    pub delta_constant: f64,
    pub loops_everywhere: bool,
    pub delta_holds: bool,
    /// max relative deviation of `hat mu(x)` from `mu(x)`.
    pub vertex_weight_defect: f64,
    /// checked identity `hat B(x, n) = B(x, 2n)` on sampled (x, n).
    pub ball_identity_holds: bool,
    /// checked `hat d <= d <= 2 hat d` on sampled pairs.
    pub distance_comparison_holds: bool,
}

pub fn structure_report(g: &WeightedGraph) -> StructureReport {
    let alpha = p0_constant(g).unwrap_or(0.0);
    let hat = hat_graph(g);
    let mut min_loop_ratio = f64::INFINITY;
    let mut min_edge_ratio = f64::INFINITY;
    let mut loops_everywhere = true;
    let mut vertex_weight_defect = 0.0f64;
    for x in hat.vertices() {
        let loop_w = hat.edge_weight(x, x);
        if loop_w <= 0.0 {
            loops_everywhere = false;
        }
        min_loop_ratio = min_loop_ratio.min(loop_w / hat.mu(x));
        for (_, w) in hat.neighbors(x) {
            min_edge_ratio = min_edge_ratio.min(w / hat.mu(x));
        }
        let rel = (hat.mu(x) - g.mu(x)).abs() / g.mu(x);
        vertex_weight_defect = vertex_weight_defect.max(rel);
    }
    let delta_constant = 0.5 * alpha * alpha;

    let mut rng = ChaCha8Rng::seed_from_u64(0x57ac7);
    let n = g.vertex_count();
    let mut ball_identity_holds = true;
    for _ in 0..8 {
        let x = VertexId(rng.gen_range(0..n as u32));
        let raw = bfs_distances(g, x);
        let hatd = bfs_distances(&hat, x);
        let max_hat = hatd.iter().filter(|&&d| d != u32::MAX).max().copied().unwrap_or(0);
        let nn = rng.gen_range(0..=(max_hat as usize).min(6));
        for v in g.vertices() {
            let in_hat_ball = (hatd[v.index()] as usize) <= nn;
            let in_raw_ball = (raw[v.index()] as usize) <= 2 * nn;
            if in_hat_ball != in_raw_ball {
                ball_identity_holds = false;
            }
        }
    }

    let mut distance_comparison_holds = true;
    for (x, y) in crate::walk::sample_pairs(n, 100, 0xd157) {
        let d = crate::graph::distance(g, x, y) as f64;
        let dh = crate::graph::distance(&hat, x, y) as f64;
        if !(dh <= d + 1e-9 && d <= 2.0 * dh + 1e-9) {
            distance_comparison_holds = false;
        }
    }

    StructureReport {
        p0_alpha: alpha,
        min_loop_ratio,
        min_edge_ratio,
        delta_constant,
        loops_everywhere,
        delta_holds: min_loop_ratio >= delta_constant - 1e-12
            && min_edge_ratio >= delta_constant - 1e-12,
        vertex_weight_defect,
        ball_identity_holds,
        distance_comparison_holds,
    }
}

/// Partial-sum Green comparison on a truncated host: for each pair,
/// `(1/2) sum_{n<=l} p_n <= sum_{n<=l} hat p_n <= sum_{n<=2l} p_n`.
#[derive(Debug, Clone, Serialize)]
pub struct GreenComparisonEntry {
    pub x: u32,
    pub y: u32,
    pub raw_partial_l: f64,
    pub hat_partial_l: f64,
    pub raw_partial_2l: f64,
    pub lower_margin: f64,
    pub upper_margin: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GreenComparisonReport {
    pub l: usize,
    pub entries: Vec<GreenComparisonEntry>,
    pub pass: bool,
}

pub fn green_comparison_check(
    t: &TruncatedGraph,
    l: usize,
    pairs: &[(VertexId, VertexId)],
) -> GreenComparisonReport {
    let hat = hat_graph(&t.graph);
    let mut entries = Vec::new();
    let mut pass = true;
    for &(x, y) in pairs {
        let raw = heat_kernel_series(&t.graph, x, 2 * l);
        let hat_k = heat_kernel_series(&hat, x, l);
        let mut raw_l = 0.0;
        let mut raw_2l = 0.0;
        for n in 0..=2 * l {
            let v = raw.p(n, y);
            if n <= l {
                raw_l += v;
            }
            raw_2l += v;
        }
        let mut hat_l = 0.0;
        for n in 0..=l {
            hat_l += hat_k.p(n, y);
        }
        let lower_margin = hat_l - 0.5 * raw_l;
        let upper_margin = raw_2l - hat_l;
        if lower_margin < -1e-12 || upper_margin < -1e-12 {
            pass = false;
        }
        entries.push(GreenComparisonEntry {
            x: x.0,
            y: y.0,
            raw_partial_l: raw_l,
            hat_partial_l: hat_l,
            raw_partial_2l: raw_2l,
            lower_margin,
            upper_margin,
        });
    }
    GreenComparisonReport { l, entries, pass }
}
