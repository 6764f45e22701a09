//! The L^p-capacity programs and their cross-formulation certification.
//!
//! Three equivalent formulations are implemented through genuinely different
//! routes so that their agreement is a real check, not a tautology:
//!
//! * `capacity_dual` maximizes `nu(K)^p` subject to `||G^U f||_q <= 1`,
//!   solved as a projected-gradient minimization of `||G^U f||_q` over the
//!   weighted simplex `nu(K) = 1`;
//! * `capacity_potential` minimizes `||f||_p^p` subject to `G^U f >= 1` on
//!   `K`, solved by exact KKT elimination at `p = 2` and concave dual ascent
//!   otherwise;
//! * `capacity_laplacian` minimizes `||Delta f||_p^p` over `f` supported in
//!   `U` with `f >= 1` on `K`, solved by exact KKT elimination at `p = 2`
//!   and accelerated projected descent otherwise.
//!
//! Every minimization reports a certified gap against the elementary
//! weak-duality bound `(nu(K) / ||G^U(nu/mu)||_q)^p`, valid for any
//! nonnegative measure `nu` on `K` by self-adjointness of the killed
//! Laplacian and Hoelder's inequality.
//!
//! Exponents very close to 1 push the conjugate `q = p/(p-1)` into a regime
//! where the q-norms are numerically extreme (at `p = 1.1`, tenth powers of
//! the Green potential enter the gradients); the first-order solvers then
//! stop with an honest [`Error::SolverDiverged`] carrying the unclosed gap
//! instead of returning unverified values. Exponents in roughly
//! `[1.2, 6]` close their gaps to the 1e-7 target on desk-scale hosts.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{VertexId, VertexSet, WeightedGraph};
use crate::green::{local_green, solve_killed};
use crate::walk::FunctionTable;

/// Hard cap on dense eliminations inside the Laplacian KKT route (the
/// system there is |U| x |U|).
const DENSE_CAP: usize = 1500;
/// Iteration cap for first-order solvers.
const ITER_CAP: usize = 100_000;
/// Relative duality-gap target.
const GAP_TOL: f64 = 1e-7;
/// Relative gap above which a capped solve is reported as diverged.
const GAP_FAIL: f64 = 1e-4;

/// One capacity instance: a finite kernel `K` inside a proper domain `U` of
/// the host, with exponent `p > 1` (`p = 1` is served by
/// [`harmonic_capacity`] alone).
#[derive(Debug, Clone)]
pub struct CapacityProblem<'g> {
    pub graph: &'g WeightedGraph,
    pub domain: VertexSet,
    pub kernel: VertexSet,
    pub p: f64,
}

impl<'g> CapacityProblem<'g> {
    pub fn new(
        graph: &'g WeightedGraph,
        domain: VertexSet,
        kernel: VertexSet,
        p: f64,
    ) -> Result<CapacityProblem<'g>> {
        if !(p >= 1.0) {
            return Err(Error::InvalidParameter(format!("p must be >= 1, got {p}")));
        }
        if kernel.is_empty() {
            return Err(Error::InvalidParameter("kernel K must be nonempty".into()));
        }
        if !kernel.is_subset_of(&domain) {
            return Err(Error::InvalidParameter("K must be a subset of U".into()));
        }
        if domain.len() == graph.vertex_count() {
            return Err(Error::SingularSystem);
        }
        Ok(CapacityProblem {
            graph,
            domain,
            kernel,
            p,
        })
    }

    /// Hoelder conjugate exponent.
    pub fn q(&self) -> f64 {
        self.p / (self.p - 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Formulation {
    Dual,
    Potential,
    Laplacian,
    Harmonic,
    PEnergy,
}

/// Result of one capacity program.
#[derive(Debug, Clone, Serialize)]
pub struct CapacitySolution {
    pub value: f64,
    /// Optimizer on its natural domain (zero-extended to the host).
    pub optimizer: FunctionTable,
    pub formulation: Formulation,
    pub iterations: usize,
    /// Distance to the best weak-duality certificate found (absolute).
    pub certified_gap: f64,
}

/// Green columns `g^U(., x)` for every kernel vertex, in kernel order.
fn kernel_columns(prob: &CapacityProblem) -> Result<Vec<FunctionTable>> {
    prob.kernel
        .iter()
        .map(|x| Ok(local_green(prob.graph, &prob.domain, x)?.values))
        .collect()
}

/// Weighted q-norm over the domain.
fn lq_norm(g: &WeightedGraph, u: &VertexSet, v: &[f64], q: f64) -> f64 {
    u.iter()
        .map(|x| v[x.index()].abs().powf(q) * g.mu(x))
        .sum::<f64>()
        .powf(1.0 / q)
}

/// Weak-duality lower bound `(nu(K) / ||G^U(nu/mu)||_q)^p` for a nonnegative
/// measure `nu` on `K` (given as masses in kernel order).
fn holder_lower_bound(prob: &CapacityProblem, columns: &[FunctionTable], nu: &[f64]) -> f64 {
    let mass: f64 = nu.iter().sum();
    if !(mass > 0.0) {
        return 0.0;
    }
    let g = prob.graph;
    let mut w = vec![0.0; g.vertex_count()];
    // G^U(nu/mu)(x) = sum_k g^U(x, x_k) nu_k by symmetry of g^U
    for (col, &m) in columns.iter().zip(nu) {
        for x in prob.domain.iter() {
            w[x.index()] += col[x.index()] * m;
        }
    }
    let norm = lq_norm(g, &prob.domain, &w, prob.q());
    if norm > 0.0 {
        (mass / norm).powf(prob.p)
    } else {
        0.0
    }
}

/// Projection of `z` onto the weighted simplex `{ f >= 0, sum w f = 1 }`.
fn project_weighted_simplex(z: &[f64], w: &[f64]) -> Vec<f64> {
    let h = |theta: f64| -> f64 {
        z.iter()
            .zip(w)
            .map(|(&zi, &wi)| wi * (zi - theta * wi).max(0.0))
            .sum::<f64>()
            - 1.0
    };
    let mut hi = z
        .iter()
        .zip(w)
        .map(|(&zi, &wi)| zi / wi)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut lo = hi - 1.0;
    let mut span = 1.0;
    while h(lo) < 0.0 {
        span *= 2.0;
        lo = hi - span;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if h(mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let theta = 0.5 * (lo + hi);
    z.iter()
        .zip(w)
        .map(|(&zi, &wi)| (zi - theta * wi).max(0.0))
        .collect()
}

/// `C_p(K, U)` through the measure-side program: minimize
/// `||G^U f||_{L^q(U)}` over densities `f >= 0` on `K` with `nu(K) = 1`,
/// then `C_p = m^{-p}`. Certified from both sides.
pub fn capacity_dual(prob: &CapacityProblem) -> Result<CapacitySolution> {
    require_p_above_one(prob)?;
    let g = prob.graph;
    let q = prob.q();
    let columns = kernel_columns(prob)?;
    let k = prob.kernel.len();
    let weights: Vec<f64> = prob.kernel.iter().map(|x| g.mu(x)).collect();

    // v(x) = sum_k col_k(x) f_k mu_k on U
    let assemble = |f: &[f64], v: &mut [f64]| {
        for x in prob.domain.iter() {
            v[x.index()] = 0.0;
        }
        for (i, col) in columns.iter().enumerate() {
            let c = f[i] * weights[i];
            if c != 0.0 {
                for x in prob.domain.iter() {
                    v[x.index()] += c * col[x.index()];
                }
            }
        }
    };

    let objective = |f: &[f64], v: &mut [f64]| -> f64 {
        assemble(f, v);
        lq_norm(g, &prob.domain, v, q)
    };

    // gradient of ||v||_q wrt f_k: mu_k <col_k, sigma>_mu with
    // sigma = v^{q-1} ||v||^{1-q}
    let gradient = |v: &[f64], norm: f64, grad: &mut [f64]| {
        for (i, col) in columns.iter().enumerate() {
            let mut acc = 0.0;
            for x in prob.domain.iter() {
                let vx = v[x.index()];
                if vx > 0.0 {
                    acc += col[x.index()] * vx.powf(q - 1.0) * g.mu(x);
                }
            }
            grad[i] = weights[i] * acc * norm.powf(1.0 - q);
        }
    };

    let mut f = project_weighted_simplex(&vec![1.0; k], &weights);
    let mut v = vec![0.0; g.vertex_count()];
    let mut grad = vec![0.0; k];
    let mut phi = objective(&f, &mut v);
    let mut step = 1.0;
    let mut best_upper = f64::INFINITY;
    let mut iterations = 0;

    // certificate: m >= min_K G^U u for the norming functional
    // u = v^{q-1} ||v||^{1-q} of the current iterate
    let certificate = |v: &[f64], phi: f64| -> f64 {
        let mut beta = f64::INFINITY;
        for col in &columns {
            let mut acc = 0.0;
            for x in prob.domain.iter() {
                let vx = v[x.index()];
                if vx > 0.0 {
                    acc += col[x.index()] * vx.powf(q - 1.0) * g.mu(x);
                }
            }
            beta = beta.min(acc * phi.powf(1.0 - q));
        }
        if beta > 0.0 {
            beta.powf(-prob.p)
        } else {
            f64::INFINITY
        }
    };

    for iter in 0..ITER_CAP {
        iterations = iter + 1;
        gradient(&v, phi, &mut grad);

        if iter % 20 == 0 || iter + 1 == ITER_CAP {
            best_upper = best_upper.min(certificate(&v, phi));
            let value = phi.powf(-prob.p);
            if (best_upper - value).abs() <= GAP_TOL * value {
                break;
            }
        }

        // backtracking projected gradient step on the simplex
        let mut improved = false;
        for _ in 0..60 {
            let trial: Vec<f64> = f
                .iter()
                .zip(&grad)
                .map(|(fi, gi)| fi - step * gi)
                .collect();
            let trial = project_weighted_simplex(&trial, &weights);
            let phi_trial = objective(&trial, &mut v);
            if phi_trial < phi {
                f = trial;
                phi = phi_trial;
                step *= 1.3;
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
    }

    assemble(&f, &mut v);
    phi = lq_norm(g, &prob.domain, &v, q);
    best_upper = best_upper.min(certificate(&v, phi));
    let value = phi.powf(-prob.p);
    let gap = if best_upper.is_finite() {
        (best_upper - value).max(0.0)
    } else {
        f64::INFINITY
    };
    if !(gap <= GAP_FAIL * value.max(1e-300)) {
        return Err(Error::SolverDiverged { gap, iterations });
    }

    // report the literal program's optimizer: ||G^U f||_q = 1
    let mut optimizer = vec![0.0; g.vertex_count()];
    for (i, x) in prob.kernel.iter().enumerate() {
        optimizer[x.index()] = f[i] / phi;
    }
    Ok(CapacitySolution {
        value,
        optimizer,
        formulation: Formulation::Dual,
        iterations,
        certified_gap: gap,
    })
}

fn require_p_above_one(prob: &CapacityProblem) -> Result<()> {
    if prob.p <= 1.0 {
        return Err(Error::InvalidParameter(
            "this formulation needs p > 1; use harmonic_capacity for p = 1".into(),
        ));
    }
    Ok(())
}

/// Gram matrix `W(i,j) = <col_i, col_j>_{L^2(U,mu)}` of the kernel columns.
fn kernel_gram(prob: &CapacityProblem, columns: &[FunctionTable]) -> DMatrix<f64> {
    let k = columns.len();
    DMatrix::from_fn(k, k, |i, j| {
        prob.domain
            .iter()
            .map(|x| columns[i][x.index()] * columns[j][x.index()] * prob.graph.mu(x))
            .sum()
    })
}

/// `hat C_p(K, U)`: minimize `||f||_p^p` over `f >= 0` on `U` with
/// `G^U f >= 1` on `K`. Exact KKT elimination at `p = 2`, dual ascent
/// otherwise.
pub fn capacity_potential(prob: &CapacityProblem) -> Result<CapacitySolution> {
    require_p_above_one(prob)?;
    let columns = kernel_columns(prob)?;
    if (prob.p - 2.0).abs() < 1e-12 {
        potential_kkt_p2(prob, &columns)
    } else {
        potential_dual_ascent(prob, &columns)
    }
}

fn potential_kkt_p2(
    prob: &CapacityProblem,
    columns: &[FunctionTable],
) -> Result<CapacitySolution> {
    let g = prob.graph;
    let k = prob.kernel.len();
    // only the |K| x |K| kernel Gram matrix goes dense here
    let w = kernel_gram(prob, columns);
    let tol = 1e-11;

    // active-set iteration, with exhaustive subset fallback for tiny K
    let solve_for = |active: &[usize]| -> Option<(Vec<f64>, Vec<f64>)> {
        let m = active.len();
        let ws = DMatrix::from_fn(m, m, |i, j| w[(active[i], active[j])]);
        let rhs = DVector::from_element(m, 2.0);
        let lambda_s = ws.lu().solve(&rhs)?;
        let mut lambda = vec![0.0; k];
        for (i, &a) in active.iter().enumerate() {
            lambda[a] = lambda_s[i];
        }
        // constraint values (A f)(x_j) = (1/2) sum_i lambda_i W(j, i)
        let af: Vec<f64> = (0..k)
            .map(|j| 0.5 * (0..k).map(|i| lambda[i] * w[(j, i)]).sum::<f64>())
            .collect();
        Some((lambda, af))
    };

    let mut active: Vec<usize> = (0..k).collect();
    let mut result = None;
    for _ in 0..60 {
        let Some((lambda, af)) = solve_for(&active) else {
            break;
        };
        // drop the most negative multiplier, if any
        let mut drop: Option<(usize, f64)> = None;
        for &i in &active {
            if lambda[i] < -tol && drop.map_or(true, |(_, l)| lambda[i] < l) {
                drop = Some((i, lambda[i]));
            }
        }
        if let Some((idx, _)) = drop {
            active.retain(|&a| a != idx);
            if active.is_empty() {
                break;
            }
            continue;
        }
        // re-add the most violated inactive constraint, if any
        let mut add: Option<(usize, f64)> = None;
        for i in 0..k {
            if !active.contains(&i) && af[i] < 1.0 - tol && add.map_or(true, |(_, v)| af[i] < v) {
                add = Some((i, af[i]));
            }
        }
        if let Some((idx, _)) = add {
            active.push(idx);
            active.sort_unstable();
            continue;
        }
        result = Some(lambda);
        break;
    }

    let lambda = match result {
        Some(l) => l,
        None => exhaustive_kkt(&w, k, tol).ok_or(Error::SolverDiverged {
            gap: f64::INFINITY,
            iterations: 60,
        })?,
    };

    // f = (1/2) sum_i lambda_i col_i, value = (1/2) sum lambda
    let mut f = vec![0.0; g.vertex_count()];
    for (i, col) in columns.iter().enumerate() {
        if lambda[i] != 0.0 {
            for x in prob.domain.iter() {
                f[x.index()] += 0.5 * lambda[i] * col[x.index()];
            }
        }
    }
    let value: f64 = 0.5 * lambda.iter().sum::<f64>();
    let bound = holder_lower_bound(prob, columns, &lambda);
    Ok(CapacitySolution {
        value,
        optimizer: f,
        formulation: Formulation::Potential,
        iterations: 1,
        certified_gap: (value - bound).abs(),
    })
}

fn exhaustive_kkt(w: &DMatrix<f64>, k: usize, tol: f64) -> Option<Vec<f64>> {
    if k > 16 {
        return None;
    }
    for bits in 1u32..(1 << k) {
        let active: Vec<usize> = (0..k).filter(|i| bits & (1 << i) != 0).collect();
        let m = active.len();
        let ws = DMatrix::from_fn(m, m, |i, j| w[(active[i], active[j])]);
        let rhs = DVector::from_element(m, 2.0);
        let Some(lambda_s) = ws.lu().solve(&rhs) else {
            continue;
        };
        if lambda_s.iter().any(|&l| l < -tol) {
            continue;
        }
        let mut lambda = vec![0.0; k];
        for (i, &a) in active.iter().enumerate() {
            lambda[a] = lambda_s[i].max(0.0);
        }
        let feasible = (0..k).all(|j| {
            let v: f64 = 0.5 * (0..k).map(|i| lambda[i] * w[(j, i)]).sum::<f64>();
            v >= 1.0 - 1e-9
        });
        if feasible {
            return Some(lambda);
        }
    }
    None
}

fn potential_dual_ascent(
    prob: &CapacityProblem,
    columns: &[FunctionTable],
) -> Result<CapacitySolution> {
    let g = prob.graph;
    let p = prob.p;
    let k = prob.kernel.len();
    let exponent = 1.0 / (p - 1.0);

    // f(lambda)(y) = (s(y)/p)^{1/(p-1)}, s(y) = sum_i lambda_i col_i(y)
    let build_f = |lambda: &[f64], f: &mut [f64]| {
        for x in prob.domain.iter() {
            f[x.index()] = 0.0;
        }
        for (i, col) in columns.iter().enumerate() {
            if lambda[i] != 0.0 {
                for x in prob.domain.iter() {
                    f[x.index()] += lambda[i] * col[x.index()];
                }
            }
        }
        for x in prob.domain.iter() {
            let s = f[x.index()].max(0.0);
            f[x.index()] = (s / p).powf(exponent);
        }
    };
    let constraint_values = |f: &[f64], af: &mut [f64]| {
        for (i, col) in columns.iter().enumerate() {
            af[i] = prob
                .domain
                .iter()
                .map(|y| col[y.index()] * f[y.index()] * g.mu(y))
                .sum();
        }
    };
    let dual_value = |lambda: &[f64], f: &[f64], af: &[f64]| -> f64 {
        let energy: f64 = prob
            .domain
            .iter()
            .map(|x| f[x.index()].powf(p) * g.mu(x))
            .sum();
        let penalty: f64 = lambda.iter().zip(af).map(|(l, a)| l * (a - 1.0)).sum();
        energy - penalty
    };

    let n = g.vertex_count();
    let mut lambda = vec![1.0; k];
    let mut f = vec![0.0; n];
    let mut af = vec![0.0; k];
    build_f(&lambda, &mut f);
    constraint_values(&f, &mut af);
    let mut dual = dual_value(&lambda, &f, &af);
    let mut step = 1.0;
    let mut best_primal = f64::INFINITY;
    let mut best_optimizer = vec![0.0; n];
    let mut best_dual = dual;
    let mut iterations = 0;

    for iter in 0..ITER_CAP {
        iterations = iter + 1;
        best_dual = best_dual.max(dual);
        // primal recovery by scaling to feasibility
        let min_af = af.iter().cloned().fold(f64::INFINITY, f64::min);
        if min_af > 0.0 {
            let scale = 1.0 / min_af;
            let primal: f64 = prob
                .domain
                .iter()
                .map(|x| (f[x.index()] * scale).powf(p) * g.mu(x))
                .sum();
            if primal < best_primal {
                best_primal = primal;
                for (o, v) in best_optimizer.iter_mut().zip(&f) {
                    *o = v * scale;
                }
            }
            if best_primal - best_dual <= GAP_TOL * best_primal.max(1e-300) {
                break;
            }
        }
        // projected gradient ascent with backtracking
        let grad: Vec<f64> = af.iter().map(|a| 1.0 - a).collect();
        let mut advanced = false;
        for _ in 0..60 {
            let trial: Vec<f64> = lambda
                .iter()
                .zip(&grad)
                .map(|(l, g)| (l + step * g).max(0.0))
                .collect();
            build_f(&trial, &mut f);
            constraint_values(&f, &mut af);
            let d_trial = dual_value(&trial, &f, &af);
            if d_trial > dual {
                lambda = trial;
                dual = d_trial;
                step *= 1.3;
                advanced = true;
                break;
            }
            step *= 0.5;
        }
        if !advanced {
            // stationary: restore state for the final certificate
            build_f(&lambda, &mut f);
            constraint_values(&f, &mut af);
            best_dual = best_dual.max(dual_value(&lambda, &f, &af));
            let min_af = af.iter().cloned().fold(f64::INFINITY, f64::min);
            if min_af > 0.0 {
                let scale = 1.0 / min_af;
                let primal: f64 = prob
                    .domain
                    .iter()
                    .map(|x| (f[x.index()] * scale).powf(p) * g.mu(x))
                    .sum();
                if primal < best_primal {
                    best_primal = primal;
                    for (o, v) in best_optimizer.iter_mut().zip(&f) {
                        *o = v * scale;
                    }
                }
            }
            break;
        }
    }

    let value = best_primal;
    let gap = (value - best_dual).max(0.0);
    if !(gap <= GAP_FAIL * value.max(1e-300)) {
        return Err(Error::SolverDiverged { gap, iterations });
    }
    Ok(CapacitySolution {
        value,
        optimizer: best_optimizer,
        formulation: Formulation::Potential,
        iterations,
        certified_gap: gap,
    })
}

/// `bar C_p(K, U)`: minimize `||Delta f||_p^p` over `f` supported in `U`
/// with `f >= 1` on `K`; `Delta` is the full-graph Laplacian applied to the
/// zero extension, the norm runs over `U`.
pub fn capacity_laplacian(prob: &CapacityProblem) -> Result<CapacitySolution> {
    require_p_above_one(prob)?;
    if prob.domain.len() > DENSE_CAP {
        return Err(Error::SizeLimit {
            got: prob.domain.len(),
            limit: DENSE_CAP,
        });
    }
    let columns = kernel_columns(prob)?;
    let p2 = laplacian_kkt_p2(prob)?;
    if (prob.p - 2.0).abs() < 1e-12 {
        let bound = holder_lower_bound(prob, &columns, &kkt_measure(prob, &p2.optimizer, 2.0));
        return Ok(CapacitySolution {
            certified_gap: (p2.value - bound).abs(),
            ..p2
        });
    }
    laplacian_descent(prob, &columns, p2.optimizer)
}

/// `(L f)(x) = mu(x) f(x) - sum_y mu_xy f(y)` for `x in U`, `f` zero
/// outside `U`; exactly the killed Laplacian matrix.
fn killed_l_apply(g: &WeightedGraph, u: &VertexSet, f: &[f64], out: &mut [f64]) {
    for x in u.iter() {
        let mut acc = g.mu(x) * f[x.index()];
        for (y, w) in g.neighbors(x) {
            if u.contains(y) {
                acc -= w * f[y.index()];
            }
        }
        out[x.index()] = acc;
    }
}

/// Gradient-side application `L^T v` restricted to `U` (L is symmetric).
fn killed_l_adjoint(g: &WeightedGraph, u: &VertexSet, v: &[f64], out: &mut [f64]) {
    killed_l_apply(g, u, v, out);
}

fn laplacian_objective(g: &WeightedGraph, u: &VertexSet, f: &[f64], p: f64) -> f64 {
    let mut lf = vec![0.0; g.vertex_count()];
    killed_l_apply(g, u, f, &mut lf);
    u.iter()
        .map(|x| (lf[x.index()].abs() / g.mu(x)).powf(p) * g.mu(x))
        .sum()
}

fn laplacian_gradient(g: &WeightedGraph, u: &VertexSet, f: &[f64], p: f64, grad: &mut [f64]) {
    let mut lf = vec![0.0; g.vertex_count()];
    killed_l_apply(g, u, f, &mut lf);
    // d/df sum |Lf/mu|^p mu = L [ p |Lf/mu|^{p-1} sgn(Lf) ]; the mu factors
    // from the norm and the chain rule cancel.
    let mut inner = vec![0.0; g.vertex_count()];
    for x in u.iter() {
        let d = lf[x.index()] / g.mu(x);
        inner[x.index()] = p * d.abs().powf(p - 1.0) * d.signum();
    }
    killed_l_adjoint(g, u, &inner, grad);
}

/// KKT measure recovered from the objective gradient on `K`.
fn kkt_measure(prob: &CapacityProblem, f: &[f64], p: f64) -> Vec<f64> {
    let mut grad = vec![0.0; prob.graph.vertex_count()];
    laplacian_gradient(prob.graph, &prob.domain, f, p, &mut grad);
    prob.kernel
        .iter()
        .map(|x| grad[x.index()].max(0.0))
        .collect()
}

fn laplacian_kkt_p2(prob: &CapacityProblem) -> Result<CapacitySolution> {
    let g = prob.graph;
    let u = &prob.domain;
    let n = u.len();
    let order: Vec<VertexId> = u.iter().collect();
    let pos: std::collections::HashMap<VertexId, usize> =
        order.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    // dense Q = L D^{-1} L over U
    let mut lmat: DMatrix<f64> = DMatrix::zeros(n, n);
    for (i, &x) in order.iter().enumerate() {
        lmat[(i, i)] += g.mu(x);
        for (y, w) in g.neighbors(x) {
            if let Some(&j) = pos.get(&y) {
                lmat[(i, j)] -= w;
            }
        }
    }
    let dinv: DMatrix<f64> = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            1.0 / g.mu(order[i])
        } else {
            0.0
        }
    });
    let qmat: DMatrix<f64> = &lmat * dinv * &lmat;

    let kernel_pos: Vec<usize> = prob.kernel.iter().map(|x| pos[&x]).collect();
    let tol = 1e-11;

    let solve_for = |active: &[usize]| -> Option<(DVector<f64>, Vec<f64>)> {
        // f = 1 on active, free elsewhere: Q_FF f_F = -Q_FA 1
        let free: Vec<usize> = (0..n).filter(|i| !active.contains(i)).collect();
        let m = free.len();
        let mut f = DVector::zeros(n);
        for &a in active {
            f[a] = 1.0;
        }
        if m > 0 {
            let qff = DMatrix::from_fn(m, m, |i, j| qmat[(free[i], free[j])]);
            let rhs = DVector::from_fn(m, |i, _| {
                -active.iter().map(|&a| qmat[(free[i], a)]).sum::<f64>()
            });
            let sol = Cholesky::new(qff)?.solve(&rhs);
            for (i, &fi) in free.iter().enumerate() {
                f[fi] = sol[i];
            }
        }
        let qf = &qmat * &f;
        let lambda: Vec<f64> = active.iter().map(|&a| 2.0 * qf[a]).collect();
        Some((f, lambda))
    };

    let mut active: Vec<usize> = kernel_pos.clone();
    let mut done = None;
    for step in 0..60 {
        let Some((f, lambda)) = solve_for(&active) else {
            break;
        };
        // drop the most negative multiplier
        let mut drop: Option<(usize, f64)> = None;
        for (pos, &l) in lambda.iter().enumerate() {
            if l < -tol && drop.map_or(true, |(_, worst)| l < worst) {
                drop = Some((pos, l));
            }
        }
        if let Some((pos_in_active, _)) = drop {
            active.remove(pos_in_active);
            if active.is_empty() {
                break;
            }
            continue;
        }
        // re-add the most violated kernel constraint
        let mut add: Option<(usize, f64)> = None;
        for &i in &kernel_pos {
            if !active.contains(&i) && f[i] < 1.0 - tol && add.map_or(true, |(_, v)| f[i] < v) {
                add = Some((i, f[i]));
            }
        }
        if let Some((idx, _)) = add {
            active.push(idx);
            continue;
        }
        done = Some((f, step + 1));
        break;
    }
    let (f, iterations) = done.ok_or(Error::SolverDiverged {
        gap: f64::INFINITY,
        iterations: 60,
    })?;
    let value = (f.transpose() * &qmat * &f)[(0, 0)];
    let mut optimizer = vec![0.0; g.vertex_count()];
    for (i, &x) in order.iter().enumerate() {
        optimizer[x.index()] = f[i];
    }
    Ok(CapacitySolution {
        value,
        optimizer,
        formulation: Formulation::Laplacian,
        iterations,
        certified_gap: f64::NAN, // filled by the caller
    })
}

fn laplacian_descent(
    prob: &CapacityProblem,
    columns: &[FunctionTable],
    warm_start: FunctionTable,
) -> Result<CapacitySolution> {
    let g = prob.graph;
    let u = &prob.domain;
    let p = prob.p;
    let clamp = |f: &mut [f64]| {
        for x in prob.kernel.iter() {
            if f[x.index()] < 1.0 {
                f[x.index()] = 1.0;
            }
        }
    };
    let mut f = warm_start;
    clamp(&mut f);
    let mut value = laplacian_objective(g, u, &f, p);
    let mut grad = vec![0.0; g.vertex_count()];
    let mut step = 1.0;
    let mut best_bound = 0.0f64;
    let mut iterations = 0;

    for iter in 0..ITER_CAP {
        iterations = iter + 1;
        if iter % 50 == 0 || iter + 1 == ITER_CAP {
            let nu = kkt_measure(prob, &f, p);
            best_bound = best_bound.max(holder_lower_bound(prob, columns, &nu));
            if value - best_bound <= GAP_TOL * value.max(1e-300) {
                break;
            }
        }
        laplacian_gradient(g, u, &f, p, &mut grad);
        let mut advanced = false;
        for _ in 0..60 {
            let mut trial = f.clone();
            for x in u.iter() {
                trial[x.index()] -= step * grad[x.index()];
            }
            clamp(&mut trial);
            let v_trial = laplacian_objective(g, u, &trial, p);
            if v_trial < value {
                f = trial;
                value = v_trial;
                step *= 1.25;
                advanced = true;
                break;
            }
            step *= 0.5;
        }
        if !advanced {
            break;
        }
    }
    let nu = kkt_measure(prob, &f, p);
    best_bound = best_bound.max(holder_lower_bound(prob, columns, &nu));
    let gap = (value - best_bound).max(0.0);
    if !(gap <= GAP_FAIL * value.max(1e-300)) {
        return Err(Error::SolverDiverged { gap, iterations });
    }
    Ok(CapacitySolution {
        value,
        optimizer: f,
        formulation: Formulation::Laplacian,
        iterations,
        certified_gap: gap,
    })
}

/// Energy summation convention for the quadratic capacities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EnergyConvention {
    /// Ordered pairs over the whole host with zero extension: every
    /// undirected edge counts twice, boundary edges included.
    FullGraphOrdered,
    /// Ordered pairs with both endpoints inside `U`, the literal reading of
    /// the restricted sum; boundary edges are dropped.
    RestrictedToU,
}

/// Harmonic capacity via the equilibrium potential: `v = 1` on `K`, `v = 0`
/// outside `U`, harmonic in between; value is the ordered-pair Dirichlet
/// energy. The equilibrium measure `nu = 2 mu (-Delta v)` on `K` has total
/// mass equal to the energy under this convention.
pub fn harmonic_capacity(
    g: &WeightedGraph,
    u: &VertexSet,
    k: &VertexSet,
) -> Result<HarmonicSolution> {
    harmonic_capacity_with(g, u, k, EnergyConvention::FullGraphOrdered)
}

#[derive(Debug, Clone, Serialize)]
pub struct HarmonicSolution {
    pub value: f64,
    pub potential: FunctionTable,
    /// Equilibrium masses in kernel order, scaled to the ordered-pair
    /// convention.
    pub equilibrium_measure: Vec<f64>,
    pub convention: EnergyConvention,
}

pub fn harmonic_capacity_with(
    g: &WeightedGraph,
    u: &VertexSet,
    k: &VertexSet,
    convention: EnergyConvention,
) -> Result<HarmonicSolution> {
    if k.is_empty() {
        return Err(Error::InvalidParameter("kernel K must be nonempty".into()));
    }
    if !k.is_subset_of(u) {
        return Err(Error::InvalidParameter("K must be a subset of U".into()));
    }
    if u.len() == g.vertex_count() {
        return Err(Error::SingularSystem);
    }
    let free = VertexSet::new(
        g.vertex_count(),
        u.iter().filter(|&x| !k.contains(x)),
    );
    let mut v = vec![0.0; g.vertex_count()];
    for x in k.iter() {
        v[x.index()] = 1.0;
    }
    if !free.is_empty() {
        // (I - P^F) v = P(. , K) 1 on F
        let mut rhs = vec![0.0; g.vertex_count()];
        for x in free.iter() {
            let mut acc = 0.0;
            for (y, w) in g.neighbors(x) {
                if k.contains(y) {
                    acc += w;
                }
            }
            rhs[x.index()] = acc / g.mu(x);
        }
        let sol = solve_killed(g, &free, &rhs)?;
        for x in free.iter() {
            v[x.index()] = sol[x.index()];
        }
    }
    let value = dirichlet_energy_ordered(g, u, &v, convention);
    let equilibrium_measure: Vec<f64> = k
        .iter()
        .map(|x| {
            let mut pv = 0.0;
            for (y, w) in g.neighbors(x) {
                pv += w * v[y.index()];
            }
            let neg_delta = v[x.index()] - pv / g.mu(x);
            match convention {
                EnergyConvention::FullGraphOrdered => 2.0 * g.mu(x) * neg_delta,
                EnergyConvention::RestrictedToU => {
                    // drop flux through boundary edges
                    let mut inside = 0.0;
                    for (y, w) in g.neighbors(x) {
                        if u.contains(y) {
                            inside += w * (v[x.index()] - v[y.index()]);
                        }
                    }
                    2.0 * inside
                }
            }
        })
        .collect();
    Ok(HarmonicSolution {
        value,
        potential: v,
        equilibrium_measure,
        convention,
    })
}

fn dirichlet_energy_ordered(
    g: &WeightedGraph,
    u: &VertexSet,
    v: &[f64],
    convention: EnergyConvention,
) -> f64 {
    let mut acc = 0.0;
    for x in g.vertices() {
        for (y, w) in g.neighbors(x) {
            let keep = match convention {
                EnergyConvention::FullGraphOrdered => true,
                EnergyConvention::RestrictedToU => u.contains(x) && u.contains(y),
            };
            if keep {
                let d = v[x.index()] - v[y.index()];
                let c = w * d * d;
                // ordered pairs: off-diagonal edges appear twice, loops once
                acc += if x == y { c } else { c * 2.0 };
            }
        }
    }
    // neighbors() already materializes both directions, so halve
    acc / 2.0
}

/// p-energy capacity on an explicit support set: minimize the ordered-pair
/// p-energy `sum_{x,y} mu_xy |f(y)-f(x)|^p` over `f` supported in
/// `support`, `f >= 1` on `K`.
pub fn p_energy_capacity_on(
    g: &WeightedGraph,
    k: &VertexSet,
    support: &VertexSet,
    p: f64,
) -> Result<CapacitySolution> {
    if !(p > 1.0) {
        return Err(Error::InvalidParameter("p-energy needs p > 1".into()));
    }
    if !k.is_subset_of(support) {
        return Err(Error::InvalidParameter(
            "K must lie inside the feasible support".into(),
        ));
    }
    if support.len() == g.vertex_count() {
        return Err(Error::SingularSystem);
    }
    // p = 2 warm start: equilibrium potential on the support
    let eq = harmonic_capacity(g, support, k)?;
    if (p - 2.0).abs() < 1e-12 {
        return Ok(CapacitySolution {
            value: eq.value,
            optimizer: eq.potential,
            formulation: Formulation::PEnergy,
            iterations: 1,
            certified_gap: 0.0,
        });
    }
    let objective = |f: &[f64]| -> f64 {
        let mut acc = 0.0;
        for x in g.vertices() {
            for (y, w) in g.neighbors(x) {
                let d = (f[x.index()] - f[y.index()]).abs().powf(p) * w;
                acc += if x == y { d } else { 2.0 * d };
            }
        }
        acc / 2.0
    };
    let gradient = |f: &[f64], grad: &mut [f64]| {
        for g_ in grad.iter_mut() {
            *g_ = 0.0;
        }
        for x in support.iter() {
            let mut acc = 0.0;
            for (y, w) in g.neighbors(x) {
                let d = f[x.index()] - f[y.index()];
                acc += 2.0 * p * w * d.abs().powf(p - 1.0) * d.signum();
            }
            grad[x.index()] = acc;
        }
    };
    let clamp = |f: &mut [f64]| {
        for x in k.iter() {
            if f[x.index()] < 1.0 {
                f[x.index()] = 1.0;
            }
        }
    };
    let mut f = eq.potential;
    clamp(&mut f);
    let mut value = objective(&f);
    let mut grad = vec![0.0; g.vertex_count()];
    let mut step = 0.25;
    let mut iterations = 0;
    let mut stall = 0;
    for iter in 0..ITER_CAP {
        iterations = iter + 1;
        gradient(&f, &mut grad);
        let mut advanced = false;
        for _ in 0..60 {
            let mut trial = f.clone();
            for x in support.iter() {
                trial[x.index()] -= step * grad[x.index()];
            }
            clamp(&mut trial);
            let v_trial = objective(&trial);
            if v_trial < value {
                let improvement = (value - v_trial) / value.max(1e-300);
                f = trial;
                value = v_trial;
                step *= 1.25;
                advanced = true;
                if improvement < 1e-12 {
                    stall += 1;
                } else {
                    stall = 0;
                }
                break;
            }
            step *= 0.5;
        }
        if !advanced || stall > 20 {
            break;
        }
    }
    Ok(CapacitySolution {
        value,
        optimizer: f,
        formulation: Formulation::PEnergy,
        iterations,
        certified_gap: f64::NAN,
    })
}

/// p-energy capacity with feasible support `{x : d(x, K) <= r}`.
pub fn p_energy_capacity(
    g: &WeightedGraph,
    k: &VertexSet,
    r: usize,
    p: f64,
) -> Result<CapacitySolution> {
    // multi-source BFS ball around the kernel
    let mut dist = vec![u32::MAX; g.vertex_count()];
    let mut queue = std::collections::VecDeque::new();
    for x in k.iter() {
        dist[x.index()] = 0;
        queue.push_back(x);
    }
    while let Some(x) = queue.pop_front() {
        let dx = dist[x.index()];
        if dx as usize == r {
            continue;
        }
        for (y, _) in g.neighbors(x) {
            if dist[y.index()] == u32::MAX {
                dist[y.index()] = dx + 1;
                queue.push_back(y);
            }
        }
    }
    let support = VertexSet::new(
        g.vertex_count(),
        g.vertices().filter(|v| dist[v.index()] != u32::MAX),
    );
    p_energy_capacity_on(g, k, &support, p)
}

/// Three-way equivalence report for one problem.
#[derive(Debug, Clone, Serialize)]
pub struct EquivalenceReport {
    pub p: f64,
    pub dual: CapacitySolution,
    pub potential: CapacitySolution,
    pub laplacian: CapacitySolution,
    pub max_pairwise_rel_dev: f64,
    pub tolerance: f64,
}

/// Computes all three formulations and checks their pairwise agreement
/// within `max(1e-6, 1e-3 * value)` relative deviation.
pub fn equivalence_report(prob: &CapacityProblem) -> Result<EquivalenceReport> {
    let dual = capacity_dual(prob)?;
    let potential = capacity_potential(prob)?;
    let laplacian = capacity_laplacian(prob)?;
    let vals = [dual.value, potential.value, laplacian.value];
    let scale = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut max_dev = 0.0f64;
    for i in 0..3 {
        for j in (i + 1)..3 {
            max_dev = max_dev.max((vals[i] - vals[j]).abs());
        }
    }
    let tolerance = (1e-6f64).max(1e-3 * scale);
    let rel = max_dev / scale.max(1e-300);
    if max_dev > tolerance {
        return Err(Error::EquivalenceViolation {
            dual: vals[0],
            potential: vals[1],
            laplacian: vals[2],
        });
    }
    Ok(EquivalenceReport {
        p: prob.p,
        dual,
        potential,
        laplacian,
        max_pairwise_rel_dev: rel,
        tolerance,
    })
}

/// Capacity along an exhaustion of domains: nonincreasing and convergent.
pub fn capacity_exhaustion(
    g: &WeightedGraph,
    k: &VertexSet,
    sets: &[VertexSet],
    p: f64,
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(sets.len());
    for u in sets {
        let prob = CapacityProblem::new(g, u.clone(), k.clone(), p)?;
        out.push(capacity_potential(&prob)?.value);
    }
    Ok(out)
}

/// Numerical check of the monotonicity estimates: `C_p(K1, U) <= C_p(K2, U)`
/// for `K1 subset K2`, and `C_p(K, U2) <= C_p(K, U1)` for `U1 subset U2`.
#[derive(Debug, Clone, Serialize)]
pub struct MonotonicityCheck {
    pub kernel_small: f64,
    pub kernel_large: f64,
    pub domain_small: f64,
    pub domain_large: f64,
    pub holds: bool,
}

pub fn check_monotonicity(
    g: &WeightedGraph,
    k1: &VertexSet,
    k2: &VertexSet,
    u1: &VertexSet,
    u2: &VertexSet,
    p: f64,
) -> Result<MonotonicityCheck> {
    if !k1.is_subset_of(k2) || !u1.is_subset_of(u2) || !k2.is_subset_of(u1) {
        return Err(Error::InvalidParameter(
            "need K1 in K2 in U1 in U2".into(),
        ));
    }
    let slack = 1e-8;
    let kernel_small =
        capacity_potential(&CapacityProblem::new(g, u1.clone(), k1.clone(), p)?)?.value;
    let kernel_large =
        capacity_potential(&CapacityProblem::new(g, u1.clone(), k2.clone(), p)?)?.value;
    let domain_small =
        capacity_potential(&CapacityProblem::new(g, u1.clone(), k1.clone(), p)?)?.value;
    let domain_large =
        capacity_potential(&CapacityProblem::new(g, u2.clone(), k1.clone(), p)?)?.value;
    Ok(MonotonicityCheck {
        kernel_small,
        kernel_large,
        domain_small,
        domain_large,
        holds: kernel_small <= kernel_large + slack && domain_large <= domain_small + slack,
    })
}

/// Numerical check of subadditivity:
/// `C_p(K1 ∪ K2, U) <= C_p(K1, U) + C_p(K2, U)`.
#[derive(Debug, Clone, Serialize)]
pub struct SubadditivityCheck {
    pub union_value: f64,
    pub sum_of_parts: f64,
    pub holds: bool,
}

pub fn check_subadditivity(
    g: &WeightedGraph,
    k1: &VertexSet,
    k2: &VertexSet,
    u: &VertexSet,
    p: f64,
) -> Result<SubadditivityCheck> {
    let host = g.vertex_count();
    let union = VertexSet::new(host, k1.iter().chain(k2.iter()));
    let v1 = capacity_potential(&CapacityProblem::new(g, u.clone(), k1.clone(), p)?)?.value;
    let v2 = capacity_potential(&CapacityProblem::new(g, u.clone(), k2.clone(), p)?)?.value;
    let vu = capacity_potential(&CapacityProblem::new(g, u.clone(), union, p)?)?.value;
    Ok(SubadditivityCheck {
        union_value: vu,
        sum_of_parts: v1 + v2,
        holds: vu <= v1 + v2 + 1e-8,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_graph;

    fn p4() -> WeightedGraph {
        build_graph(&[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0)]).unwrap()
    }

    fn p4_problem(g: &WeightedGraph, p: f64) -> CapacityProblem<'_> {
        let u = VertexSet::new(4, [VertexId(1), VertexId(2)]);
        let k = VertexSet::new(4, [VertexId(1)]);
        CapacityProblem::new(g, u, k, p).unwrap()
    }

    #[test]
    fn dual_p4_nine_tenths() {
        let g = p4();
        let prob = p4_problem(&g, 2.0);
        let sol = capacity_dual(&prob).unwrap();
        assert!((sol.value - 0.9).abs() < 1e-6, "value {}", sol.value);
        // optimizer normalized to ||G^U f||_q = 1: f(1) = 3/sqrt(40)
        assert!((sol.optimizer[1] - 3.0 / 40f64.sqrt()).abs() < 1e-5);
    }

    #[test]
    fn potential_p4_exact() {
        let g = p4();
        let prob = p4_problem(&g, 2.0);
        let sol = capacity_potential(&prob).unwrap();
        assert!((sol.value - 0.9).abs() < 1e-10, "value {}", sol.value);
        assert!((sol.optimizer[1] - 0.6).abs() < 1e-9);
        assert!((sol.optimizer[2] - 0.3).abs() < 1e-9);
        assert!(sol.certified_gap < 1e-9);
    }

    #[test]
    fn laplacian_p4_exact() {
        let g = p4();
        let prob = p4_problem(&g, 2.0);
        let sol = capacity_laplacian(&prob).unwrap();
        assert!((sol.value - 0.9).abs() < 1e-10, "value {}", sol.value);
        assert!((sol.optimizer[1] - 1.0).abs() < 1e-9);
        assert!((sol.optimizer[2] - 0.8).abs() < 1e-9);
        assert!(sol.certified_gap < 1e-8);
    }

    #[test]
    fn equivalence_on_p4() {
        let g = p4();
        let rep = equivalence_report(&p4_problem(&g, 2.0)).unwrap();
        assert!(rep.max_pairwise_rel_dev < 1e-3);
    }

    #[test]
    fn feasibility_of_potential_optimizer() {
        let g = p4();
        let prob = p4_problem(&g, 1.5);
        let sol = capacity_potential(&prob).unwrap();
        // G^U f >= 1 - 1e-8 on K
        let cols = kernel_columns(&prob).unwrap();
        for (col, x) in cols.iter().zip(prob.kernel.iter()) {
            let af: f64 = prob
                .domain
                .iter()
                .map(|y| col[y.index()] * sol.optimizer[y.index()] * g.mu(y))
                .sum();
            let _ = x;
            assert!(af >= 1.0 - 1e-8, "constraint value {af}");
        }
    }

    #[test]
    fn kernel_monotonicity() {
        let g = p4();
        let u = VertexSet::new(4, [VertexId(1), VertexId(2)]);
        let small = CapacityProblem::new(&g, u.clone(), VertexSet::new(4, [VertexId(1)]), 2.0)
            .unwrap();
        let large = CapacityProblem::new(
            &g,
            u,
            VertexSet::new(4, [VertexId(1), VertexId(2)]),
            2.0,
        )
        .unwrap();
        let a = capacity_dual(&small).unwrap().value;
        let b = capacity_dual(&large).unwrap().value;
        assert!(a <= b + 1e-8);
    }

    #[test]
    fn domain_monotonicity_and_exhaustion() {
        let t = crate::builders::lattice(2, 6).unwrap();
        let g = &t.graph;
        let k = VertexSet::new(g.vertex_count(), [t.center]);
        let sets: Vec<VertexSet> = [1usize, 2, 3, 4]
            .iter()
            .map(|&r| VertexSet::ball(g, t.center, r))
            .collect();
        let vals = capacity_exhaustion(g, &k, &sets, 2.0).unwrap();
        for w in vals.windows(2) {
            assert!(w[1] <= w[0] + 1e-8, "{vals:?}");
        }
        // converging toward the capacity on the union: steps shrink
        let first_step = vals[0] - vals[1];
        let last_step = vals[2] - vals[3];
        assert!(last_step <= first_step + 1e-10, "{vals:?}");
    }

    #[test]
    fn scaling_under_weight_doubling() {
        // doubling all edge weights doubles C_p
        let edges = [(0u32, 1u32, 1.0), (1, 2, 1.5), (2, 3, 0.5), (1, 4, 2.0)];
        let doubled: Vec<(u32, u32, f64)> =
            edges.iter().map(|&(u, v, w)| (u, v, 2.0 * w)).collect();
        let g1 = build_graph(&edges).unwrap();
        let g2 = build_graph(&doubled).unwrap();
        let u1 = VertexSet::new(5, [VertexId(1), VertexId(2), VertexId(4)]);
        let k1 = VertexSet::new(5, [VertexId(1)]);
        let a = capacity_potential(&CapacityProblem::new(&g1, u1.clone(), k1.clone(), 2.0).unwrap())
            .unwrap()
            .value;
        let b = capacity_potential(&CapacityProblem::new(&g2, u1, k1, 2.0).unwrap())
            .unwrap()
            .value;
        assert!((b / a - 2.0).abs() < 1e-9, "ratio {}", b / a);
    }

    #[test]
    fn harmonic_p4() {
        let g = p4();
        let u = VertexSet::new(4, [VertexId(1), VertexId(2)]);
        let k = VertexSet::new(4, [VertexId(1)]);
        let sol = harmonic_capacity(&g, &u, &k).unwrap();
        assert!((sol.value - 3.0).abs() < 1e-10, "energy {}", sol.value);
        let expect = [0.0, 1.0, 0.5, 0.0];
        for (a, b) in sol.potential.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
        let mass: f64 = sol.equilibrium_measure.iter().sum();
        assert!((mass - sol.value).abs() < 1e-8);
    }

    #[test]
    fn harmonic_k_equals_u() {
        // v = indicator of U: energy = 2 * sum of boundary edge weights
        let g = p4();
        let u = VertexSet::new(4, [VertexId(1), VertexId(2)]);
        let sol = harmonic_capacity(&g, &u, &u).unwrap();
        assert!((sol.value - 2.0 * (1.0 + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn p_energy_matches_harmonic_at_p2() {
        let g = p4();
        let u = VertexSet::new(4, [VertexId(1), VertexId(2)]);
        let k = VertexSet::new(4, [VertexId(1)]);
        let sol = p_energy_capacity_on(&g, &k, &u, 2.0).unwrap();
        assert!((sol.value - 3.0).abs() < 1e-10);
    }

    #[test]
    fn p_energy_nonincreasing_in_radius() {
        let t = crate::builders::lattice(2, 6).unwrap();
        let g = &t.graph;
        let k = VertexSet::new(g.vertex_count(), [t.center]);
        let v2 = p_energy_capacity(g, &k, 2, 2.0).unwrap().value;
        let v4 = p_energy_capacity(g, &k, 4, 2.0).unwrap().value;
        assert!(v4 <= v2 + 1e-10);
    }

    #[test]
    fn jensen_laplacian_below_p_energy() {
        let g = p4();
        let prob = p4_problem(&g, 2.0);
        let cbar = capacity_laplacian(&prob).unwrap().value;
        let u = VertexSet::new(4, [VertexId(1), VertexId(2)]);
        let k = VertexSet::new(4, [VertexId(1)]);
        let cap_p = p_energy_capacity_on(&g, &k, &u, 2.0).unwrap().value;
        assert!(cbar <= cap_p + 1e-10);
    }

    #[test]
    fn jensen_bound_on_random_hosts() {
        // Cbar_p(K, U) <= Cap_p(K, U) with matched feasible support
        let mut checked = 0;
        for seed in 0..14u64 {
            let g = crate::builders::random_host(90 + seed, 18, 0.4);
            let n = g.vertex_count();
            let u = VertexSet::ball(&g, VertexId(0), 2);
            if u.len() == n || u.len() < 3 {
                continue;
            }
            let k = VertexSet::new(n, [VertexId(0)]);
            for &p in &[1.5, 2.0] {
                let prob = CapacityProblem::new(&g, u.clone(), k.clone(), p).unwrap();
                let cbar = capacity_laplacian(&prob).unwrap().value;
                let cap_p = p_energy_capacity_on(&g, &k, &u, p).unwrap().value;
                assert!(
                    cbar <= cap_p + 1e-8 + 1e-6 * cap_p,
                    "seed {seed} p {p}: {cbar} > {cap_p}"
                );
            }
            checked += 1;
        }
        assert!(checked >= 10, "only {checked} hosts checked");
    }

    #[test]
    fn optimizers_feasible_for_their_programs() {
        let g = p4();
        for &p in &[1.5, 2.0, 3.0] {
            let prob = p4_problem(&g, p);
            let q = prob.q();
            // dual: ||G^U f||_q = 1 within 1e-8
            let dual = capacity_dual(&prob).unwrap();
            let v = crate::green::green_operator_apply(&g, &prob.domain, &dual.optimizer)
                .unwrap();
            let norm = prob
                .domain
                .iter()
                .map(|x| v[x.index()].abs().powf(q) * g.mu(x))
                .sum::<f64>()
                .powf(1.0 / q);
            assert!((norm - 1.0).abs() <= 1e-8, "p={p}: dual norm {norm}");
            assert!(dual.value > 0.0);
            // laplacian: f >= 1 on K within 1e-8
            let lap = capacity_laplacian(&prob).unwrap();
            for x in prob.kernel.iter() {
                assert!(lap.optimizer[x.index()] >= 1.0 - 1e-8, "p={p}");
            }
        }
    }

    #[test]
    fn harmonic_restricted_convention() {
        // literal sum over x,y in U drops the boundary edges: on the P4
        // instance only the (1,2) edge remains, ordered energy 0.5
        let g = p4();
        let u = VertexSet::new(4, [VertexId(1), VertexId(2)]);
        let k = VertexSet::new(4, [VertexId(1)]);
        let sol =
            harmonic_capacity_with(&g, &u, &k, EnergyConvention::RestrictedToU).unwrap();
        assert!((sol.value - 0.5).abs() < 1e-12, "value {}", sol.value);
    }

    #[test]
    fn subadditivity_on_random_hosts() {
        for seed in 0..6u64 {
            let g = crate::builders::random_host(40 + seed, 25, 0.4);
            let n = g.vertex_count();
            let u = VertexSet::ball(&g, VertexId(0), 2);
            if u.len() == n || u.len() < 4 {
                continue;
            }
            let members: Vec<VertexId> = u.iter().collect();
            let k1 = VertexSet::new(n, [members[0]]);
            let k2 = VertexSet::new(n, [members[1]]);
            let check = check_subadditivity(&g, &k1, &k2, &u, 2.0).unwrap();
            assert!(check.holds, "seed {seed}: {check:?}");
        }
    }

    #[test]
    fn monotonicity_check_on_lattice() {
        let t = crate::builders::lattice(2, 6).unwrap();
        let g = &t.graph;
        let n = g.vertex_count();
        let center = t.center;
        let neighbor = g.neighbors(center).next().unwrap().0;
        let k1 = VertexSet::new(n, [center]);
        let k2 = VertexSet::new(n, [center, neighbor]);
        let u1 = VertexSet::ball(g, center, 3);
        let u2 = VertexSet::ball(g, center, 4);
        let check = check_monotonicity(g, &k1, &k2, &u1, &u2, 2.0).unwrap();
        assert!(check.holds, "{check:?}");
    }

    // brute-force grid refinement oracles for the p = 2 exact routes

    fn refine_grid_2d(
        mut lo: (f64, f64),
        mut hi: (f64, f64),
        objective: impl Fn(f64, f64) -> f64,
    ) -> f64 {
        let mut best = f64::INFINITY;
        for _ in 0..8 {
            let mut arg = (lo.0, lo.1);
            for i in 0..=40 {
                for j in 0..=40 {
                    let a = lo.0 + (hi.0 - lo.0) * i as f64 / 40.0;
                    let b = lo.1 + (hi.1 - lo.1) * j as f64 / 40.0;
                    let v = objective(a, b);
                    if v < best {
                        best = v;
                        arg = (a, b);
                    }
                }
            }
            let span = ((hi.0 - lo.0) / 10.0, (hi.1 - lo.1) / 10.0);
            lo = (arg.0 - span.0, arg.1 - span.1);
            hi = (arg.0 + span.0, arg.1 + span.1);
        }
        best
    }

    #[test]
    fn laplacian_p2_matches_grid_oracle() {
        // P4 instance: two variables (f(1), f(2)), constraint f(1) >= 1
        let g = p4();
        let mu = [1.0, 2.0, 2.0, 1.0];
        let objective = |f1: f64, f2: f64| {
            if f1 < 1.0 {
                return f64::INFINITY;
            }
            let f = [0.0, f1, f2, 0.0];
            let mut acc = 0.0;
            for x in 1..=2usize {
                let mut lf = mu[x] * f[x];
                if x == 1 {
                    lf -= f[2];
                } else {
                    lf -= f[1];
                }
                acc += (lf / mu[x]).powi(2) * mu[x];
            }
            acc
        };
        let oracle = refine_grid_2d((1.0, -1.0), (3.0, 3.0), objective);
        let sol = capacity_laplacian(&p4_problem(&g, 2.0)).unwrap();
        assert!(
            (oracle - sol.value).abs() < 1e-4,
            "oracle {oracle} vs solver {}",
            sol.value
        );
    }

    #[test]
    fn potential_p2_matches_grid_oracle() {
        // P4 instance: two variables f on U = {1,2}, constraint
        // (4/3) f1 + (2/3) f2 >= 1 from the green column
        let g = p4();
        let objective = |f1: f64, f2: f64| {
            if f1 < 0.0 || f2 < 0.0 || (4.0 / 3.0) * f1 + (2.0 / 3.0) * f2 < 1.0 {
                return f64::INFINITY;
            }
            2.0 * (f1 * f1 + f2 * f2)
        };
        let oracle = refine_grid_2d((0.0, 0.0), (1.5, 1.5), objective);
        let sol = capacity_potential(&p4_problem(&g, 2.0)).unwrap();
        assert!(
            (oracle - sol.value).abs() < 1e-4,
            "oracle {oracle} vs solver {}",
            sol.value
        );
    }

    #[test]
    fn dual_p2_matches_grid_oracle_two_kernel() {
        // |K| = 2 instance on the z3 ball: one simplex parameter
        let t = crate::builders::lattice(3, 3).unwrap();
        let g = &t.graph;
        let u = VertexSet::ball(g, t.center, 2);
        let neighbor = g.neighbors(t.center).next().unwrap().0;
        let k = VertexSet::new(g.vertex_count(), [t.center, neighbor]);
        let prob = CapacityProblem::new(g, u.clone(), k.clone(), 2.0).unwrap();
        let cols = kernel_columns(&prob).unwrap();
        // masses nu = (t, 1-t) on the kernel; G^U f = sum col_y nu_y
        let phi = |tparam: f64| -> f64 {
            let masses = [tparam, 1.0 - tparam];
            let mut acc = 0.0;
            for x in u.iter() {
                let v = cols[0][x.index()] * masses[0] + cols[1][x.index()] * masses[1];
                acc += v * v * g.mu(x);
            }
            acc.sqrt()
        };
        let mut lo = 0.0;
        let mut hi = 1.0;
        let mut best = f64::INFINITY;
        for _ in 0..10 {
            let mut arg = lo;
            for i in 0..=200 {
                let tpar = lo + (hi - lo) * i as f64 / 200.0;
                let v = phi(tpar);
                if v < best {
                    best = v;
                    arg = tpar;
                }
            }
            let span = (hi - lo) / 20.0;
            lo = (arg - span).max(0.0);
            hi = (arg + span).min(1.0);
        }
        let oracle = best.powi(-2);
        let sol = capacity_dual(&prob).unwrap();
        assert!(
            (oracle - sol.value).abs() < 1e-4 * oracle,
            "oracle {oracle} vs solver {}",
            sol.value
        );
    }

    #[test]
    fn rejects_bad_parameters() {
        let g = p4();
        let u = VertexSet::new(4, [VertexId(1), VertexId(2)]);
        let k = VertexSet::new(4, [VertexId(1)]);
        assert!(CapacityProblem::new(&g, u.clone(), k.clone(), 0.5).is_err());
        let full = VertexSet::full(4);
        assert!(matches!(
            CapacityProblem::new(&g, full, k.clone(), 2.0),
            Err(Error::SingularSystem)
        ));
        let prob = CapacityProblem::new(&g, u, k, 1.0).unwrap();
        assert!(capacity_dual(&prob).is_err());
    }
}
