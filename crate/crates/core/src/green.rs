//! Local Green functions and their diagnostics.
//!
//! The local Green column `g^U(., x0)` solves `(I_U - P^U) v = delta_x0 /
//! mu(x0)` on `U`. After scaling rows by `mu(x)` the system matrix is the
//! killed graph Laplacian `M = D_mu - A` restricted to `U` with the full
//! vertex weights on the diagonal: symmetric and positive definite whenever
//! `U` is a proper subset of a connected host. Solves use Jacobi-conditioned
//! conjugate gradients to a 1e-12 residual; the truncated Neumann series of
//! the killed walk serves as an independent route to the same values.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{
    VertexId, VertexSet, VolumeProfile, WeightedGraph,
};
use crate::walk::{killed_apply, FunctionTable};

const CG_TOL: f64 = 1e-12;

/// Green column `g^U(., x0)`: values on `U`, zero outside.
#[derive(Debug, Clone)]
pub struct GreenColumn {
    pub domain: VertexSet,
    pub pole: VertexId,
    pub values: FunctionTable,
}

/// Sparse matvec of the killed Laplacian `M v = mu v - A_U v` on `U`.
fn killed_laplacian_apply(g: &WeightedGraph, u: &VertexSet, v: &[f64], out: &mut [f64]) {
    for x in u.iter() {
        let mut acc = g.mu(x) * v[x.index()];
        for (y, w) in g.neighbors(x) {
            if u.contains(y) {
                acc -= w * v[y.index()];
            }
        }
        out[x.index()] = acc;
    }
}

/// Solves `(I_U - P^U) v = f` on `U` (zero extension outside).
///
/// `f` is given on the full host; only its values on `U` matter.
pub fn solve_killed(g: &WeightedGraph, u: &VertexSet, f: &[f64]) -> Result<FunctionTable> {
    if u.len() == g.vertex_count() {
        return Err(Error::SingularSystem);
    }
    if u.is_empty() {
        return Ok(vec![0.0; g.vertex_count()]);
    }
    let n = g.vertex_count();
    // row scaling by mu turns the system symmetric: M v = b, b = mu .* f
    let mut b = vec![0.0; n];
    for x in u.iter() {
        b[x.index()] = g.mu(x) * f[x.index()];
    }
    let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);

    let mut v = vec![0.0; n];
    let mut r = b.clone();
    let mut z = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut mp = vec![0.0; n];

    let precond = |r: &[f64], z: &mut [f64]| {
        for x in u.iter() {
            z[x.index()] = r[x.index()] / g.mu(x);
        }
    };

    precond(&r, &mut z);
    for x in u.iter() {
        p[x.index()] = z[x.index()];
    }
    let mut rz: f64 = u.iter().map(|x| r[x.index()] * z[x.index()]).sum();

    let cap = 40 * u.len() + 200;
    for iter in 0..cap {
        let rnorm = u
            .iter()
            .map(|x| r[x.index()] * r[x.index()])
            .sum::<f64>()
            .sqrt();
        if rnorm <= CG_TOL * bnorm {
            return Ok(v);
        }
        killed_laplacian_apply(g, u, &p, &mut mp);
        let pmp: f64 = u.iter().map(|x| p[x.index()] * mp[x.index()]).sum();
        if !(pmp > 0.0) {
            return Err(Error::SolverDiverged {
                gap: rnorm / bnorm,
                iterations: iter,
            });
        }
        let alpha = rz / pmp;
        for x in u.iter() {
            v[x.index()] += alpha * p[x.index()];
            r[x.index()] -= alpha * mp[x.index()];
        }
        precond(&r, &mut z);
        let rz_next: f64 = u.iter().map(|x| r[x.index()] * z[x.index()]).sum();
        let beta = rz_next / rz;
        rz = rz_next;
        for x in u.iter() {
            p[x.index()] = z[x.index()] + beta * p[x.index()];
        }
    }
    let rnorm = u
        .iter()
        .map(|x| r[x.index()] * r[x.index()])
        .sum::<f64>()
        .sqrt();
    if rnorm <= CG_TOL * bnorm * 10.0 {
        // accept a near-miss; the residual is still tiny
        return Ok(v);
    }
    Err(Error::SolverDiverged {
        gap: rnorm / bnorm,
        iterations: cap,
    })
}

/// Green column with pole `x0`: solves `(I_U - P^U) v = delta_x0 / mu(x0)`.
pub fn local_green(g: &WeightedGraph, u: &VertexSet, x0: VertexId) -> Result<GreenColumn> {
    if !u.contains(x0) {
        return Err(Error::PoleOutsideDomain);
    }
    let mut f = vec![0.0; g.vertex_count()];
    f[x0.index()] = 1.0 / g.mu(x0);
    let values = solve_killed(g, u, &f)?;
    Ok(GreenColumn {
        domain: u.clone(),
        pole: x0,
        values,
    })
}

/// `(G^U f)(x) = sum_{y in U} g^U(x,y) f(y) mu(y)`, via one linear solve.
pub fn green_operator_apply(
    g: &WeightedGraph,
    u: &VertexSet,
    f: &[f64],
) -> Result<FunctionTable> {
    solve_killed(g, u, f)
}

/// Truncated Neumann series of the killed walk from `x0`:
/// `sum_{n=0}^{horizon} p^U_n(x0, .)`, plus an estimated tail bound.
///
/// Independent of the conjugate-gradient route; used as the series oracle.
#[derive(Debug, Clone)]
pub struct TruncatedSeries {
    pub column: FunctionTable,
    pub steps: usize,
    /// Survival probability of the killed walk after `steps` steps.
    pub survival: f64,
    /// Estimated remaining series mass at the pole (geometric extrapolation).
    pub tail_estimate: f64,
}

pub fn green_series_truncated(
    g: &WeightedGraph,
    u: &VertexSet,
    x0: VertexId,
    horizon: usize,
) -> Result<TruncatedSeries> {
    if !u.contains(x0) {
        return Err(Error::PoleOutsideDomain);
    }
    if u.len() == g.vertex_count() {
        return Err(Error::SingularSystem);
    }
    let n = g.vertex_count();
    let mut current = vec![0.0; n];
    current[x0.index()] = 1.0 / g.mu(x0);
    let mut column = current.clone();
    let mut survival_window = Vec::new();
    let mut survival = 1.0;
    for step in 1..=horizon {
        current = killed_apply(g, u, &current);
        for x in u.iter() {
            column[x.index()] += current[x.index()];
        }
        if step + 10 >= horizon {
            survival = current
                .iter()
                .zip(g.vertex_weights())
                .map(|(p, m)| p * m)
                .sum();
            survival_window.push(survival);
        }
    }
    // geometric decay estimate from the trailing window
    let rho = match survival_window.first() {
        Some(&first) if first > 0.0 && survival > 0.0 && survival_window.len() > 1 => {
            (survival / first).powf(1.0 / (survival_window.len() as f64 - 1.0))
        }
        _ => 0.0,
    };
    let mu_min = g
        .vertex_weights()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    // below ~1e-250 the geometric ratio degenerates at the denormal floor;
    // the surviving mass itself already certifies a vanishing tail there
    let tail_estimate = if survival <= 1e-250 {
        survival
    } else if rho < 1.0 {
        survival * rho / (1.0 - rho) / mu_min
    } else {
        f64::INFINITY
    };
    Ok(TruncatedSeries {
        column,
        steps: horizon,
        survival,
        tail_estimate,
    })
}

/// `g^{U_n}(x0, y0)` along an exhaustion; nondecreasing by domain
/// monotonicity. Returns the values together with successive differences.
pub fn exhaustion_green(
    t: &crate::builders::TruncatedGraph,
    ex: &crate::builders::Exhaustion,
    x0: VertexId,
    y0: VertexId,
) -> Result<ExhaustionTrend> {
    let mut values = Vec::with_capacity(ex.sets.len());
    for u in &ex.sets {
        let col = local_green(&t.graph, u, x0)?;
        values.push(col.values[y0.index()]);
    }
    let diffs = values.windows(2).map(|w| w[1] - w[0]).collect();
    Ok(ExhaustionTrend { values, diffs })
}

#[derive(Debug, Clone, Serialize)]
pub struct ExhaustionTrend {
    pub values: Vec<f64>,
    pub diffs: Vec<f64>,
}

impl ExhaustionTrend {
    pub fn last(&self) -> f64 {
        *self.values.last().expect("nonempty exhaustion")
    }

    /// True when the trailing difference is below `rel_tol` of the value.
    pub fn saturated(&self, rel_tol: f64) -> bool {
        match self.diffs.last() {
            Some(&d) => d <= rel_tol * self.last().abs(),
            None => false,
        }
    }
}

/// Local surrogate of the L^q-Green value:
/// `sum_{z in U} g^U(x0,z) g^U(z,x0)^{q-1} mu(z) = ||g^U(.,x0)||_q^q`.
pub fn lq_green(g: &WeightedGraph, u: &VertexSet, x0: VertexId, q: f64) -> Result<f64> {
    if !(q > 1.0) {
        return Err(Error::InvalidParameter(format!("q must be > 1, got {q}")));
    }
    let col = local_green(g, u, x0)?;
    Ok(u.iter()
        .map(|z| {
            let v = col.values[z.index()];
            v * v.powf(q - 1.0) * g.mu(z)
        })
        .sum())
}

/// Partial sum `sum_{n=d}^{N} n / V(x, n)` of the Li-Yau comparison series.
#[derive(Debug, Clone, Serialize)]
pub struct LiYauSeries {
    pub start: usize,
    pub horizon: usize,
    pub value: f64,
    /// Checkpoint partial sums at dyadic indices (n, S(n)).
    pub checkpoints: Vec<(usize, f64)>,
    /// True when the tail looks negligible: S(N) - S(N/2) is a small
    /// fraction of S(N).
    pub tail_converged: bool,
}

pub fn li_yau_series(
    profile: &dyn VolumeProfile,
    d: usize,
    n_max: usize,
) -> Result<LiYauSeries> {
    if let Some(rmax) = profile.rmax() {
        if n_max > rmax {
            return Err(Error::InsufficientProfile { needed: n_max });
        }
    }
    if d > n_max {
        return Err(Error::InvalidParameter(format!(
            "series start {d} beyond horizon {n_max}"
        )));
    }
    let mut value = 0.0;
    let mut checkpoints = Vec::new();
    let mut half_value = 0.0;
    for n in d..=n_max {
        value += n as f64 / profile.volume(n);
        if n == n_max / 2 {
            half_value = value;
        }
        if n.is_power_of_two() || n == n_max {
            checkpoints.push((n, value));
        }
    }
    let tail_converged = value > 0.0 && (value - half_value) <= 0.05 * value;
    Ok(LiYauSeries {
        start: d,
        horizon: n_max,
        value,
        checkpoints,
        tail_converged,
    })
}

/// One line of a Green/Li-Yau comparison.
#[derive(Debug, Clone, Serialize)]
pub struct BandEntry {
    pub x: u32,
    pub y: u32,
    pub distance: usize,
    pub green: f64,
    pub series: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BandReport {
    pub entries: Vec<BandEntry>,
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub band_width: f64,
    pub band_limit: f64,
    pub pass: bool,
}

/// Compares exhaustion Green values against the Li-Yau series
/// `sum_{n >= d(x,y)} n / V(x,n)` over the given pairs. The band is the
/// ratio spread max/min; constants are recorded, not asserted a priori.
pub fn green_band_check(
    t: &crate::builders::TruncatedGraph,
    pairs: &[(VertexId, VertexId)],
    series_horizon: usize,
    band_limit: f64,
) -> Result<BandReport> {
    let g = &t.graph;
    let radii: Vec<usize> = exhaustion_radii(t.trust_radius);
    let ex = crate::builders::exhaustion_of(t, &radii)?;
    // group by pole: one solve per (pole, domain) serves every target
    let mut by_pole: std::collections::BTreeMap<u32, Vec<VertexId>> =
        std::collections::BTreeMap::new();
    for &(x, y) in pairs {
        by_pole.entry(x.0).or_default().push(y);
    }
    let mut entries = Vec::new();
    for (&pole, targets) in &by_pole {
        let x = VertexId(pole);
        // one solve per domain; the trend must be monotone at the probe
        let probe = targets[0];
        let mut prev = f64::NEG_INFINITY;
        let mut final_column = None;
        for u in &ex.sets {
            let col = local_green(g, u, x)?;
            let v = col.values[probe.index()];
            if v < prev - 1e-12 {
                return Err(Error::SolverDiverged {
                    gap: prev - v,
                    iterations: 0,
                });
            }
            prev = v;
            final_column = Some(col);
        }
        let final_column = final_column.expect("nonempty exhaustion");
        let dist = crate::graph::bfs_distances(g, x);
        let profile = crate::graph::volume_profile(g, x, series_horizon);
        for &y in targets {
            let green = final_column.values[y.index()];
            let d = dist[y.index()] as usize;
            let series = li_yau_series(&profile, d, series_horizon)?.value;
            entries.push(BandEntry {
                x: x.0,
                y: y.0,
                distance: d,
                green,
                series,
                ratio: green / series,
            });
        }
    }
    let min_ratio = entries.iter().map(|e| e.ratio).fold(f64::INFINITY, f64::min);
    let max_ratio = entries
        .iter()
        .map(|e| e.ratio)
        .fold(f64::NEG_INFINITY, f64::max);
    let band_width = max_ratio / min_ratio;
    Ok(BandReport {
        entries,
        min_ratio,
        max_ratio,
        band_width,
        band_limit,
        pass: band_width.is_finite() && band_width <= band_limit && min_ratio > 0.0,
    })
}

fn exhaustion_radii(trust: usize) -> Vec<usize> {
    let top = trust.saturating_sub(1).max(1);
    let mut radii: Vec<usize> = [top / 3, top / 2, (2 * top) / 3, (5 * top) / 6, top]
        .into_iter()
        .filter(|&r| r >= 1)
        .collect();
    radii.dedup();
    radii
}

/// Cross-solve symmetry defect `|g^U(x,y) - g^U(y,x)|` over sampled pairs.
pub fn symmetry_defect(
    g: &WeightedGraph,
    u: &VertexSet,
    pairs: &[(VertexId, VertexId)],
) -> Result<f64> {
    let mut worst = 0.0f64;
    for &(x, y) in pairs {
        if !u.contains(x) || !u.contains(y) {
            continue;
        }
        let from_x = local_green(g, u, x)?;
        let from_y = local_green(g, u, y)?;
        worst = worst.max((from_x.values[y.index()] - from_y.values[x.index()]).abs());
    }
    Ok(worst)
}

/// Exports a Green column as `vertex,value` CSV.
pub fn column_to_csv(col: &GreenColumn) -> String {
    let mut s = String::from("vertex,value\n");
    for v in col.domain.iter() {
        s.push_str(&format!("{},{}\n", v.0, col.values[v.index()]));
    }
    s
}
