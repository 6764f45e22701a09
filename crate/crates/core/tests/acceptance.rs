//! Acceptance battery: one test per criterion, each printing a single
//! pass/fail line. Tolerances are pinned here, not configurable.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see the lines.

use std::time::Instant;

use potlab_core::builders::{
    exhaustion_of, heisenberg, lattice, random_host, LatticeProfile,
};
use potlab_core::capacity::{
    capacity_dual, capacity_laplacian, capacity_potential, equivalence_report,
    harmonic_capacity, CapacityProblem,
};
use potlab_core::criteria::{
    volume_growth_test, fit_volume_power, gaussian_band, lp_parabolic_series,
};
use potlab_core::graph::{
    bfs_distances, build_graph, volume_profile, VertexId, VertexSet, WeightedGraph,
};
use potlab_core::green::{green_band_check, green_operator_apply, green_series_truncated, local_green};
use potlab_core::smoothing::{
    binomial_identity_check, coefficients, hat_graph, hat_preserves_vertex_weights_exact,
    hat_truncated, sandwich_check,
};
use potlab_core::walk::{killed_apply, sample_pairs};

/// Killed-series oracle for the Z^3 Green value: R = 40 host, domain =
/// interior ball of radius 39, horizon 10^4 steps. Computed independently
/// before this build (sparse matrix iteration, double precision).
const Z3_GREEN_ORACLE: f64 = 0.249636235257;

fn report(n: usize, name: &str, pass: bool, detail: &str) {
    println!(
        "criterion {n} ({name}): {} - {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {n} ({name}) failed: {detail}");
}

fn p4() -> WeightedGraph {
    build_graph(&[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0)]).unwrap()
}

fn path(n: usize) -> WeightedGraph {
    let edges: Vec<(u32, u32, f64)> = (0..n as u32 - 1).map(|i| (i, i + 1, 1.0)).collect();
    build_graph(&edges).unwrap()
}

fn wheel12() -> WeightedGraph {
    let mut edges: Vec<(u32, u32, f64)> = (0..12u32).map(|i| (i, (i + 1) % 12, 1.0)).collect();
    for i in (0..12u32).step_by(2) {
        edges.push((i, 12, 1.0));
    }
    build_graph(&edges).unwrap()
}

fn star_with_tail() -> WeightedGraph {
    let mut edges: Vec<(u32, u32, f64)> = (1..=8u32).map(|i| (0, i, 1.0)).collect();
    for i in 8..13u32 {
        edges.push((i, i + 1, 1.0));
    }
    build_graph(&edges).unwrap()
}

fn binary_tree(depth: usize) -> WeightedGraph {
    let n = (1usize << (depth + 1)) - 1;
    let mut edges = Vec::new();
    for i in 0..n {
        for c in [2 * i + 1, 2 * i + 2] {
            if c < n {
                edges.push((i as u32, c as u32, 1.0));
            }
        }
    }
    build_graph(&edges).unwrap()
}

struct Instance {
    name: &'static str,
    graph: WeightedGraph,
    u: Vec<u32>,
    k: Vec<u32>,
}

fn battery_instances() -> Vec<Instance> {
    let mut out = Vec::new();
    out.push(Instance {
        name: "p4",
        graph: p4(),
        u: vec![1, 2],
        k: vec![1],
    });
    out.push(Instance {
        name: "p10",
        graph: path(10),
        u: (1..=8).collect(),
        k: vec![4],
    });
    let w = wheel12();
    let ball = VertexSet::ball(&w, VertexId(0), 2);
    out.push(Instance {
        name: "wheel12",
        graph: w,
        u: ball.iter().map(|v| v.0).collect(),
        k: vec![0],
    });
    let t = lattice(2, 5).unwrap();
    let u = VertexSet::ball(&t.graph, t.center, 3);
    out.push(Instance {
        name: "z2-ball5",
        graph: t.graph.clone(),
        u: u.iter().map(|v| v.0).collect(),
        k: vec![t.center.0],
    });
    let t = lattice(3, 3).unwrap();
    let u = VertexSet::ball(&t.graph, t.center, 2);
    let neighbor = t.graph.neighbors(t.center).next().unwrap().0;
    out.push(Instance {
        name: "z3-ball3",
        graph: t.graph.clone(),
        u: u.iter().map(|v| v.0).collect(),
        k: vec![t.center.0, neighbor.0],
    });
    let t = lattice(1, 30).unwrap();
    let u = VertexSet::ball(&t.graph, t.center, 20);
    out.push(Instance {
        name: "z1-ball30",
        graph: t.graph.clone(),
        u: u.iter().map(|v| v.0).collect(),
        k: vec![t.center.0],
    });
    for (name, seed, n) in [("random40", 7u64, 40usize), ("random60", 8, 60)] {
        let g = random_host(seed, n, 0.4);
        let u = VertexSet::ball(&g, VertexId(0), 2);
        let u: Vec<u32> = if u.len() == g.vertex_count() {
            VertexSet::ball(&g, VertexId(0), 1).iter().map(|v| v.0).collect()
        } else {
            u.iter().map(|v| v.0).collect()
        };
        out.push(Instance {
            name,
            graph: g,
            u,
            k: vec![0],
        });
    }
    let s = star_with_tail();
    out.push(Instance {
        name: "star-tail",
        graph: s,
        u: vec![0, 1, 2, 3, 4, 5, 6, 7, 8],
        k: vec![0, 2],
    });
    let tree = binary_tree(5);
    let ball = VertexSet::ball(&tree, VertexId(0), 3);
    out.push(Instance {
        name: "tree5",
        graph: tree,
        u: ball.iter().map(|v| v.0).collect(),
        k: vec![0],
    });
    let t = heisenberg(3).unwrap();
    let u = VertexSet::ball(&t.graph, t.center, 2);
    out.push(Instance {
        name: "heisenberg3",
        graph: t.graph.clone(),
        u: u.iter().map(|v| v.0).collect(),
        k: vec![t.center.0],
    });
    out
}

#[test]
fn criterion_1_capacity_equivalence() {
    let started = Instant::now();
    // exact P4 instance at p = 2: all three formulations hit 0.9 to 1e-6
    let g = p4();
    let prob = CapacityProblem::new(
        &g,
        VertexSet::new(4, [VertexId(1), VertexId(2)]),
        VertexSet::new(4, [VertexId(1)]),
        2.0,
    )
    .unwrap();
    let exact = [
        capacity_dual(&prob).unwrap().value,
        capacity_potential(&prob).unwrap().value,
        capacity_laplacian(&prob).unwrap().value,
    ];
    let exact_ok = exact.iter().all(|v| (v - 0.9).abs() <= 1e-6);

    // battery: >= 10 hosts, p in {1.5, 2, 3}, pairwise relative dev <= 1e-3
    let mut worst_rel: f64 = 0.0;
    let mut failures = Vec::new();
    let instances = battery_instances();
    assert!(instances.len() >= 10, "battery too small");
    for inst in &instances {
        let n = inst.graph.vertex_count();
        assert!(n <= 200, "{} too large ({n})", inst.name);
        for &p in &[1.5, 2.0, 3.0] {
            let prob = CapacityProblem::new(
                &inst.graph,
                VertexSet::new(n, inst.u.iter().map(|&v| VertexId(v))),
                VertexSet::new(n, inst.k.iter().map(|&v| VertexId(v))),
                p,
            )
            .unwrap();
            match equivalence_report(&prob) {
                Ok(rep) => worst_rel = worst_rel.max(rep.max_pairwise_rel_dev),
                Err(e) => failures.push(format!("{} p={p}: {e}", inst.name)),
            }
        }
    }
    let elapsed = started.elapsed().as_secs_f64();
    let pass = exact_ok && failures.is_empty() && worst_rel <= 1e-3 && elapsed <= 60.0;
    report(
        1,
        "capacity equivalence",
        pass,
        &format!(
            "p4 values {exact:?}, battery {} hosts x 3 exponents, worst rel dev {worst_rel:.2e}, \
             failures {failures:?}, {elapsed:.1}s",
            instances.len()
        ),
    );
}

#[test]
fn criterion_2_harmonic_capacity() {
    let g = p4();
    let u = VertexSet::new(4, [VertexId(1), VertexId(2)]);
    let k = VertexSet::new(4, [VertexId(1)]);
    let sol = harmonic_capacity(&g, &u, &k).unwrap();
    let mass: f64 = sol.equilibrium_measure.iter().sum();
    let pass = (sol.value - 3.0).abs() <= 1e-10 && (mass - sol.value).abs() <= 1e-8;
    report(
        2,
        "harmonic capacity",
        pass,
        &format!("energy {}, equilibrium mass {mass}", sol.value),
    );
}

#[test]
fn criterion_3_smoothing_exactness() {
    use num_bigint::BigInt;
    use num_rational::BigRational;
    let coeffs = coefficients(64);
    let exact_ok = coeffs.c[2] == BigRational::new(BigInt::from(3), BigInt::from(4))
        && coeffs.c[3] == BigRational::new(BigInt::from(5), BigInt::from(8))
        && coeffs.b[2] == BigInt::from(8)
        && coeffs.b_matches_closed_forms()
        && coeffs.c_in_half_one_band();

    let mut worst_dev: f64 = 0.0;
    let mut sandwich_ok = true;
    for i in 0..10u64 {
        let n = 20 + (i as usize * 3) % 31; // hosts up to 50 vertices
        let g = random_host(300 + i, n, 0.35);
        worst_dev = worst_dev.max(binomial_identity_check(&g, 8).unwrap());
        for l in 0..=6 {
            let rep = sandwich_check(&g, l).unwrap();
            if !rep.pass {
                sandwich_ok = false;
            }
        }
    }
    let pass = exact_ok && worst_dev <= 1e-12 && sandwich_ok;
    report(
        3,
        "smoothing exactness",
        pass,
        &format!(
            "coefficients exact {exact_ok}, kernel identity worst dev {worst_dev:.2e}, \
             sandwich pass {sandwich_ok}"
        ),
    );
}

#[test]
fn criterion_4_green_defect() {
    use rand::{Rng, SeedableRng};
    let mut worst_defect: f64 = 0.0;
    let mut worst_series: f64 = 0.0;
    let mut tails_ok = true;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0xdefec7);
    for i in 0..100u64 {
        let n = 20 + (i as usize) % 30;
        let g = random_host(1000 + i, n, 0.4);
        let anchor = VertexId(rng.gen_range(0..n as u32));
        // random star domain around the anchor: radius-1 ball, minus a
        // random subset of its leaves, so escape stays strong and the
        // series tail bound certifies quickly
        let ball = VertexSet::ball(&g, anchor, 1);
        let members: Vec<VertexId> = ball
            .iter()
            .filter(|&v| v == anchor || rng.gen_range(0.0..1.0) < 0.7)
            .collect();
        let u = VertexSet::new(n, members);
        if u.len() == n {
            continue;
        }
        let f: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let v = green_operator_apply(&g, &u, &f).unwrap();
        // defect of (I_U - P^U) G^U f - f on U
        let pv = killed_apply(&g, &u, &v);
        for x in u.iter() {
            let defect = (v[x.index()] - pv[x.index()] - f[x.index()]).abs();
            worst_defect = worst_defect.max(defect);
        }
        // series oracle at the anchor pole
        let mut horizon = 2000;
        let mut series = green_series_truncated(&g, &u, anchor, horizon).unwrap();
        while series.tail_estimate > 1e-9 && horizon < 64_000 {
            horizon *= 2;
            series = green_series_truncated(&g, &u, anchor, horizon).unwrap();
        }
        if series.tail_estimate > 1e-9 {
            tails_ok = false;
            continue;
        }
        let solve = local_green(&g, &u, anchor).unwrap();
        for x in u.iter() {
            worst_series = worst_series.max((series.column[x.index()] - solve.values[x.index()]).abs());
        }
    }
    let pass = worst_defect <= 1e-10 && worst_series <= 1e-8 && tails_ok;
    report(
        4,
        "green defect",
        pass,
        &format!(
            "defect sup {worst_defect:.2e}, series vs solve {worst_series:.2e}, tails ok {tails_ok}"
        ),
    );
}

#[test]
fn criterion_5_hat_structure() {
    let z2 = lattice(2, 14).unwrap();
    let heis = heisenberg(8).unwrap();
    let mut weights_exact = true;
    let mut balls_ok = true;
    let mut dist_ok = true;
    for t in [&z2, &heis] {
        let g = &t.graph;
        weights_exact &= hat_preserves_vertex_weights_exact(g);
        let hat = hat_graph(g);
        // hat B(x, n) = B(x, 2n) as vertex sets for n <= 5, sampled x
        let dist_center = bfs_distances(g, t.center);
        let samples: Vec<VertexId> = g
            .vertices()
            .filter(|v| dist_center[v.index()] <= 2)
            .take(4)
            .collect();
        for &x in &samples {
            let raw = bfs_distances(g, x);
            let hatd = bfs_distances(&hat, x);
            for v in g.vertices() {
                let dr = raw[v.index()] as usize;
                let dh = hatd[v.index()] as usize;
                for n in 0..=5usize {
                    if (dh <= n) != (dr <= 2 * n) {
                        balls_ok = false;
                    }
                }
                // d-hat <= d <= 2 d-hat pointwise
                if !(dh <= dr && dr <= 2 * dh) && dr > 0 {
                    dist_ok = false;
                }
            }
        }
        // and on 100 sampled pairs explicitly
        for (x, y) in sample_pairs(g.vertex_count(), 100, 0xace5) {
            let d = potlab_core::graph::distance(g, x, y);
            let dh = potlab_core::graph::distance(&hat, x, y);
            if !(dh <= d && d <= 2 * dh) && d > 0 {
                dist_ok = false;
            }
        }
    }
    let pass = weights_exact && balls_ok && dist_ok;
    report(
        5,
        "hat structure",
        pass,
        &format!(
            "vertex weights exact {weights_exact}, ball identity {balls_ok}, \
             distance comparison {dist_ok}"
        ),
    );
}

#[test]
fn criterion_6_z3_green_value() {
    let t = lattice(3, 40).unwrap();
    let g = &t.graph;
    let interior = VertexSet::ball(g, t.center, 39);
    let series = green_series_truncated(g, &interior, t.center, 10_000).unwrap();
    let series_value = series.column[t.center.index()];
    let oracle_dev = (series_value - Z3_GREEN_ORACLE).abs() / Z3_GREEN_ORACLE;

    let ex = exhaustion_of(&t, &[10, 15, 20, 25, 30, 35]).unwrap();
    let trend = potlab_core::green::exhaustion_green(&t, &ex, t.center, t.center).unwrap();
    let monotone = trend.diffs.iter().all(|&d| d >= -1e-12);
    let limit = trend.last();
    let rel = (limit - Z3_GREEN_ORACLE).abs() / Z3_GREEN_ORACLE;
    let pass = monotone && rel <= 0.01 && oracle_dev <= 1e-6;
    report(
        6,
        "z3 green value",
        pass,
        &format!(
            "exhaustion limit {limit:.8}, oracle {Z3_GREEN_ORACLE:.8} (rel dev {rel:.4}), \
             in-repo series recomputation dev {oracle_dev:.2e}, monotone {monotone}"
        ),
    );
}

#[test]
fn criterion_7_li_yau_band() {
    let raw = lattice(3, 30).unwrap();
    let hat = hat_truncated(&raw);
    let dist = bfs_distances(&hat.graph, hat.center);
    let mut pairs = Vec::new();
    for d in 0..=8usize {
        if let Some(v) = hat.graph.vertices().find(|v| dist[v.index()] as usize == d) {
            pairs.push((hat.center, v));
        }
    }
    let report_band = green_band_check(&hat, &pairs, 12, 100.0).unwrap();
    let pass = report_band.pass;
    report(
        7,
        "li-yau band",
        pass,
        &format!(
            "ratios in [{:.3}, {:.3}], band width {:.2} (limit 100)",
            report_band.min_ratio, report_band.max_ratio, report_band.band_width
        ),
    );
}

#[test]
fn criterion_8_zd_parabolicity_battery() {
    let started = Instant::now();
    let mut mismatches = Vec::new();
    for d in 2..=5usize {
        for &p in &[1.25, 1.5, 2.0, 2.5, 3.0] {
            let verdict = lp_parabolic_series(&LatticeProfile { d }, p, 10_000).unwrap();
            let expect = p >= d as f64 / 2.0;
            if verdict.divergent() != expect {
                mismatches.push(format!("d={d} p={p}: {:?}", verdict.model));
            }
        }
    }
    let elapsed = started.elapsed().as_secs_f64();
    let pass = mismatches.is_empty() && elapsed <= 120.0;
    report(
        8,
        "zd parabolicity battery",
        pass,
        &format!("20 cells, mismatches {mismatches:?}, {elapsed:.1}s"),
    );
}

#[test]
fn criterion_9_heisenberg_growth() {
    let t = heisenberg(25).unwrap();
    let profile = volume_profile(&t.graph, t.center, 25);
    // fitted exponent of V(e, n) over n in [10, 25]
    let xs: Vec<f64> = (10..=25).map(|n| (n as f64).ln()).collect();
    let ys: Vec<f64> = (10..=25).map(|n| profile.ball_measure[n].ln()).collect();
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);

    let vol_test = volume_growth_test(&profile, 2.0, 25).unwrap();
    let pass = (3.5..=4.5).contains(&slope) && vol_test.pass;
    report(
        9,
        "heisenberg growth",
        pass,
        &format!(
            "fitted exponent {slope:.3}, volume growth test pass {} (trailing slope {:.3})",
            vol_test.pass, vol_test.trailing_slope
        ),
    );
}

#[test]
fn criterion_10_bipartite_counterexample() {
    let raw = lattice(2, 50).unwrap();
    let raw_report = gaussian_band(&raw, raw.center, 400, 10).unwrap();

    let hat = hat_truncated(&lattice(2, 60).unwrap());
    let hat_report = gaussian_band(&hat, hat.center, 400, 10).unwrap();

    let pass = raw_report.violations > 0 && hat_report.violations == 0;
    report(
        10,
        "bipartite counterexample",
        pass,
        &format!(
            "raw z2 violations {} (e.g. {:?}), hat z2 violations {} over {} samples",
            raw_report.violations,
            raw_report.violation_examples.first(),
            hat_report.violations,
            hat_report.samples
        ),
    );
}

#[test]
fn acceptance_suite_fit_sanity() {
    // the heisenberg profile power fit backs criterion 9's volume growth test; pin the
    // volume exponent estimate it rests on
    let t = heisenberg(14).unwrap();
    let profile = volume_profile(&t.graph, t.center, 14);
    let (_, d_exp, _) = fit_volume_power(&profile, 14);
    assert!(d_exp > 3.0 && d_exp < 5.0, "exponent {d_exp}");
}
