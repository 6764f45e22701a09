//! Volume-growth parabolicity tests, exhaustion diagnostics, the
//! superharmonic-pair system checker, and empirical Poincare/Gaussian
//! diagnostics.
//!
//! Finite data cannot certify divergence, so every series verdict is a
//! model fit over dyadic checkpoints with an explicit residual: partial-sum
//! increments `D_j = S(2^{j+1}) - S(2^j)` behave like `2^{gamma j}` for a
//! power-divergent series, stay flat for a log-divergent one, and decay
//! geometrically for a convergent one.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::builders::{Exhaustion, TruncatedGraph};
use crate::error::{Error, Result};
use crate::graph::{
    bfs_distances, volume_profile, VertexId, VertexSet, VolumeProfile, WeightedGraph,
};
use crate::green::lq_green;
use crate::walk::{apply_laplacian, heat_kernel_series, HeatKernelSeries};

/// Fitted growth class of a partial-sum sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum SeriesModel {
    Convergent,
    LogDivergent,
    PowerDivergent { exponent: f64 },
}

impl SeriesModel {
    pub fn divergent(&self) -> bool {
        !matches!(self, SeriesModel::Convergent)
    }
}

/// Partial sums at dyadic checkpoints plus the fitted classification.
#[derive(Debug, Clone, Serialize)]
pub struct SeriesVerdict {
    pub checkpoints: Vec<(usize, f64)>,
    pub model: SeriesModel,
    /// Scatter of the dyadic increment ratios around the fitted one
    /// (standard deviation of log2 ratios); never suppressed.
    pub residual: f64,
    /// True when inner tails beyond the profile were extended by a fitted
    /// power model.
    pub tail_extended: bool,
    /// True when the inner comparison series itself diverges (volume growth
    /// exponent <= 2), which forces the verdict.
    pub inner_tail_divergent: bool,
}

impl SeriesVerdict {
    pub fn divergent(&self) -> bool {
        self.model.divergent()
    }

    /// Checkpoint partial sums as `n,partial_sum` CSV.
    pub fn checkpoints_to_csv(&self) -> String {
        let mut s = String::from("n,partial_sum\n");
        for (n, v) in &self.checkpoints {
            s.push_str(&format!("{},{}\n", n, v));
        }
        s
    }
}

/// Classifies partial sums sampled over `terms`, recording dyadic
/// checkpoints.
fn classify_terms(terms: impl Iterator<Item = f64>, start: usize) -> SeriesVerdict {
    let mut partial = 0.0;
    let mut checkpoints = Vec::new();
    let mut n = start;
    for t in terms {
        partial += t;
        if n.is_power_of_two() || n == start {
            checkpoints.push((n, partial));
        }
        n += 1;
    }
    checkpoints.push((n - 1, partial));
    let (model, residual) = classify_checkpoints(&checkpoints);
    SeriesVerdict {
        checkpoints,
        model,
        residual,
        tail_extended: false,
        inner_tail_divergent: false,
    }
}

fn classify_checkpoints(checkpoints: &[(usize, f64)]) -> (SeriesModel, f64) {
    // dyadic increments over the trailing window
    let dyadic: Vec<(usize, f64)> = checkpoints
        .iter()
        .filter(|(n, _)| n.is_power_of_two())
        .map(|&(n, s)| (n, s))
        .collect();
    if dyadic.len() < 4 {
        return (SeriesModel::Convergent, f64::NAN);
    }
    let total = checkpoints.last().unwrap().1;
    let mut increments = Vec::new();
    for w in dyadic.windows(2) {
        increments.push(w[1].1 - w[0].1);
    }
    // effectively flat tail: convergent
    let trailing: Vec<f64> = increments.iter().rev().take(5).cloned().collect();
    if trailing.iter().all(|&d| d <= 1e-12 * total.abs().max(1e-300)) {
        return (SeriesModel::Convergent, 0.0);
    }
    let mut log_ratios = Vec::new();
    for w in increments.windows(2) {
        if w[0] > 0.0 && w[1] > 0.0 {
            log_ratios.push((w[1] / w[0]).log2());
        }
    }
    let take = log_ratios.len().min(4);
    if take == 0 {
        return (SeriesModel::Convergent, 0.0);
    }
    let tail = &log_ratios[log_ratios.len() - take..];
    let mean = tail.iter().sum::<f64>() / take as f64;
    let var = tail.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / take as f64;
    let residual = var.sqrt();
    let ratio = mean.exp2();
    let model = if ratio < 0.85 {
        SeriesModel::Convergent
    } else if ratio <= 1.12 {
        SeriesModel::LogDivergent
    } else {
        SeriesModel::PowerDivergent { exponent: mean }
    };
    (model, residual)
}

/// Nash-Williams style volume test: partial sums of `sum n / V(o, n)`.
pub fn nash_williams(profile: &dyn VolumeProfile, n_max: usize) -> Result<SeriesVerdict> {
    ensure_profile(profile, n_max)?;
    Ok(classify_terms(
        (1..=n_max).map(|n| n as f64 / profile.volume(n)),
        1,
    ))
}

fn ensure_profile(profile: &dyn VolumeProfile, n_max: usize) -> Result<()> {
    if let Some(rmax) = profile.rmax() {
        if n_max > rmax {
            return Err(Error::InsufficientProfile { needed: n_max });
        }
    }
    Ok(())
}

/// Least-squares power fit `V(n) ~ c n^D` over the trailing half of the
/// profile; returns (c, D, residual).
pub fn fit_volume_power(profile: &dyn VolumeProfile, n_max: usize) -> (f64, f64, f64) {
    let lo = (n_max / 2).max(2);
    let xs: Vec<f64> = (lo..=n_max).map(|n| (n as f64).ln()).collect();
    let ys: Vec<f64> = (lo..=n_max).map(|n| profile.volume(n).ln()).collect();
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let intercept = (sy - slope * sx) / n;
    let residual = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let e = y - (intercept + slope * x);
            e * e
        })
        .sum::<f64>()
        .sqrt()
        / n.sqrt();
    (intercept.exp(), slope, residual)
}

/// Inner tails `T(n) = sum_{m>=n} m / V(o,m)`, truncated at `n_max` and
/// extended by the fitted power model when the fit has exponent above 2.
/// Returns (tails, tail_extended, inner_divergent).
fn inner_tails(
    profile: &dyn VolumeProfile,
    n_max: usize,
) -> (Vec<f64>, bool, bool) {
    let (c, d_exp, _res) = fit_volume_power(profile, n_max);
    let inner_divergent = d_exp <= 2.05;
    let tail_ext = if inner_divergent {
        0.0
    } else {
        (n_max as f64 + 0.5).powf(2.0 - d_exp) / (c * (d_exp - 2.0))
    };
    let mut tails = vec![0.0; n_max + 2];
    tails[n_max + 1] = tail_ext;
    for n in (0..=n_max).rev() {
        let v = profile.volume(n);
        tails[n] = tails[n + 1] + n as f64 / v;
    }
    (tails, !inner_divergent, inner_divergent)
}

/// The full characterization series
/// `sum_n (sum_{m>=n} m/V(o,m))^q mu(S(o,n))`; divergence is equivalent to
/// L^p-parabolicity under (VD) + (PI) + (P0).
pub fn lp_parabolic_series(
    profile: &dyn VolumeProfile,
    p: f64,
    n_max: usize,
) -> Result<SeriesVerdict> {
    require_p(p)?;
    ensure_profile(profile, n_max)?;
    let q = p / (p - 1.0);
    let (tails, tail_extended, inner_divergent) = inner_tails(profile, n_max);
    if inner_divergent {
        // the comparison Green series already diverges: parabolic at every p
        let (_, d_exp, res) = fit_volume_power(profile, n_max);
        let mut verdict = classify_terms(
            (0..=n_max).map(|n| tails[n].powf(q) * profile.sphere_measure(n)),
            0,
        );
        verdict.model = SeriesModel::PowerDivergent { exponent: d_exp };
        verdict.residual = res;
        verdict.inner_tail_divergent = true;
        verdict.tail_extended = false;
        return Ok(verdict);
    }
    let mut verdict = classify_terms(
        (0..=n_max).map(|n| tails[n].powf(q) * profile.sphere_measure(n)),
        0,
    );
    verdict.tail_extended = tail_extended;
    Ok(verdict)
}

/// The sufficient-condition series `sum_n n (sum_{m>=n} m/V(o,m))^{1/(p-1)}`;
/// its divergence implies divergence of [`lp_parabolic_series`].
pub fn lp_sufficient_series(
    profile: &dyn VolumeProfile,
    p: f64,
    n_max: usize,
) -> Result<SeriesVerdict> {
    require_p(p)?;
    ensure_profile(profile, n_max)?;
    let e = 1.0 / (p - 1.0);
    let (tails, tail_extended, inner_divergent) = inner_tails(profile, n_max);
    let mut verdict = classify_terms(
        (0..=n_max).map(|n| n as f64 * tails[n].powf(e)),
        0,
    );
    if inner_divergent {
        let (_, d_exp, res) = fit_volume_power(profile, n_max);
        verdict.model = SeriesModel::PowerDivergent { exponent: d_exp };
        verdict.residual = res;
        verdict.inner_tail_divergent = true;
    } else {
        verdict.tail_extended = tail_extended;
    }
    Ok(verdict)
}

fn require_p(p: f64) -> Result<()> {
    if !(p > 1.0) {
        return Err(Error::InvalidParameter(format!("p must be > 1, got {p}")));
    }
    Ok(())
}

/// Volume-growth sufficient test: does `V(o,r) <= C r^{2p} (log r)^{p-1}`
/// hold with a finite, stable constant over the trusted range?
#[derive(Debug, Clone, Serialize)]
pub struct VolumeTestReport {
    pub pass: bool,
    /// Largest observed ratio `V / (r^{2p} (log r)^{p-1})`.
    pub c_max: f64,
    /// Fitted log-log slope of the ratio over the trailing half; positive
    /// slope means the bound eventually fails.
    pub trailing_slope: f64,
}

pub fn volume_growth_test(
    profile: &dyn VolumeProfile,
    p: f64,
    r_max: usize,
) -> Result<VolumeTestReport> {
    require_p(p)?;
    ensure_profile(profile, r_max)?;
    if r_max < 8 {
        return Err(Error::InsufficientProfile { needed: 8 });
    }
    let ratio = |r: usize| {
        let rf = r as f64;
        profile.volume(r) / (rf.powf(2.0 * p) * rf.ln().powf(p - 1.0))
    };
    let c_max = (2..=r_max).map(ratio).fold(f64::NEG_INFINITY, f64::max);
    let lo = (r_max / 2).max(2);
    let xs: Vec<f64> = (lo..=r_max).map(|r| (r as f64).ln()).collect();
    let ys: Vec<f64> = (lo..=r_max).map(|r| ratio(r).ln()).collect();
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
    let trailing_slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    Ok(VolumeTestReport {
        pass: trailing_slope <= 0.05,
        c_max,
        trailing_slope,
    })
}

/// Lower-bound series for `g_q(o,o)` trends:
/// `sum_n (sum_{m=n}^{horizon} p_m(o,o))^{q-1}`.
pub fn diagonal_lower_series(hk: &HeatKernelSeries, q: f64) -> Result<SeriesVerdict> {
    if hk.nmax() < 100 {
        return Err(Error::HorizonTooShort {
            horizon: hk.nmax(),
            needed: 100,
        });
    }
    let o = hk.origin;
    let h = hk.nmax();
    let mut suffix = vec![0.0; h + 2];
    for n in (0..=h).rev() {
        suffix[n] = suffix[n + 1] + hk.p(n, o);
    }
    Ok(classify_terms(
        (0..=h).map(|n| suffix[n].powf(q - 1.0)),
        0,
    ))
}

/// Verdict of the superharmonic-pair system at exponent `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum SystemVerdict {
    /// `Delta u = 0` throughout the checked region.
    Harmonic,
    /// `-Delta u >= 0` and `-Delta(|Delta u|^{p-1}) >= 0` both hold.
    SuperharmonicPair,
    /// First violated inequality and where.
    Violation { vertex: u32, second_inequality: bool },
}

/// Checks `-Delta u >= -tol` and `-Delta(|Delta u|^{p-1}) >= -tol` on the
/// 2-interior of `region` (vertices whose 2-ball stays inside), with
/// `tol = 1e-10 ||u||_inf`.
pub fn system_check(
    g: &WeightedGraph,
    region: &VertexSet,
    u: &[f64],
    p: f64,
) -> SystemVerdict {
    let sup: f64 = u.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let tol = 1e-10 * sup.max(1e-300);
    let du = apply_laplacian(g, u);
    let v: Vec<f64> = du.iter().map(|d| d.abs().powf(p - 1.0)).collect();
    let dv = apply_laplacian(g, &v);

    // 2-interior: both the vertex's neighbors and their neighbors stay in
    let one_interior: Vec<bool> = g
        .vertices()
        .map(|x| region.contains(x) && g.neighbors(x).all(|(y, _)| region.contains(y)))
        .collect();
    let mut harmonic = true;
    for x in region.iter() {
        if !one_interior[x.index()]
            || !g.neighbors(x).all(|(y, _)| one_interior[y.index()])
        {
            continue;
        }
        if -du[x.index()] < -tol {
            return SystemVerdict::Violation {
                vertex: x.0,
                second_inequality: false,
            };
        }
        if -dv[x.index()] < -tol {
            return SystemVerdict::Violation {
                vertex: x.0,
                second_inequality: true,
            };
        }
        if du[x.index()].abs() > tol {
            harmonic = false;
        }
    }
    if harmonic {
        SystemVerdict::Harmonic
    } else {
        SystemVerdict::SuperharmonicPair
    }
}

/// Finite-trend surrogate of the L^q-Liouville dichotomy: the L^q-Green
/// value along an exhaustion, classified as bounded or growing. These are
/// finite-truncation trends, not infinite-graph verdicts.
#[derive(Debug, Clone, Serialize)]
pub struct LiouvilleProbe {
    pub q: f64,
    pub p: f64,
    pub values: Vec<f64>,
    /// Ratios of successive increments over the (geometric) exhaustion.
    pub increment_ratios: Vec<f64>,
    pub growing: bool,
    /// log2 of the mean trailing increment ratio.
    pub fitted_growth: f64,
    /// Verdict of the matching volume series when a profile is supplied.
    pub series_divergent: Option<bool>,
    /// Agreement between the trend and the series verdict.
    pub consistent: Option<bool>,
}

pub fn liouville_probe(
    t: &TruncatedGraph,
    ex: &Exhaustion,
    q: f64,
    profile: Option<(&dyn VolumeProfile, usize)>,
) -> Result<LiouvilleProbe> {
    if !(q > 1.0) {
        return Err(Error::InvalidParameter(format!("q must be > 1, got {q}")));
    }
    let p = q / (q - 1.0);
    let mut values = Vec::new();
    for u in &ex.sets {
        values.push(lq_green(&t.graph, u, t.center, q)?);
    }
    let increments: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
    let mut increment_ratios = Vec::new();
    for w in increments.windows(2) {
        if w[0] > 0.0 {
            increment_ratios.push(w[1] / w[0]);
        }
    }
    let take = increment_ratios.len().min(3);
    let fitted_growth = if take > 0 {
        let mean: f64 = increment_ratios[increment_ratios.len() - take..]
            .iter()
            .map(|r| r.log2())
            .sum::<f64>()
            / take as f64;
        mean
    } else {
        f64::NEG_INFINITY
    };
    let growing = fitted_growth > -0.15;
    let series_divergent = match profile {
        Some((prof, n_max)) => Some(lp_parabolic_series(prof, p, n_max)?.divergent()),
        None => None,
    };
    let consistent = series_divergent.map(|d| d == growing);
    Ok(LiouvilleProbe {
        q,
        p,
        values,
        increment_ratios,
        growing,
        fitted_growth,
        series_divergent,
        consistent,
    })
}

/// Monotonicity of parabolicity in `p` restated over series verdicts: once
/// divergent at some `p`, divergent at every larger tested `p`.
pub fn st_parabolic_consistency(
    profile: &dyn VolumeProfile,
    ps: &[f64],
    n_max: usize,
) -> Result<bool> {
    let mut sorted = ps.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let verdicts: Vec<bool> = sorted
        .iter()
        .map(|&p| lp_parabolic_series(profile, p, n_max).map(|v| v.divergent()))
        .collect::<Result<_>>()?;
    Ok(verdicts.windows(2).all(|w| !w[0] || w[1]))
}

/// Empirical Poincare constant on the ball `B(o, r)`:
/// `Lambda(r) = max_f sum_{B(o,r)} |f - f_B|^2 mu / sum_{x,y in B(o,2r)}
/// mu_xy (f(y)-f(x))^2`, solved as a generalized eigenvalue problem.
#[derive(Debug, Clone, Serialize)]
pub struct PoincareEstimate {
    pub r: usize,
    pub lambda: f64,
    /// `Lambda(r) / r^2`, the PI diagnostic.
    pub normalized: f64,
    pub ball_size: usize,
}

const POINCARE_DENSE_CAP: usize = 6000;

pub fn poincare_constant(
    g: &WeightedGraph,
    o: VertexId,
    r: usize,
) -> Result<PoincareEstimate> {
    let dist = bfs_distances(g, o);
    let ball2: Vec<VertexId> = g
        .vertices()
        .filter(|v| (dist[v.index()] as usize) <= 2 * r)
        .collect();
    let n = ball2.len();
    if n > POINCARE_DENSE_CAP {
        return Err(Error::BallTooLarge {
            size: n,
            cap: POINCARE_DENSE_CAP,
        });
    }
    let pos: std::collections::HashMap<VertexId, usize> =
        ball2.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let inner: Vec<bool> = ball2
        .iter()
        .map(|v| (dist[v.index()] as usize) <= r)
        .collect();

    // numerator form: A = M_r - (mu_r)(mu_r)^T / V(r), applied matrix-free
    let mu_r: Vec<f64> = ball2
        .iter()
        .zip(&inner)
        .map(|(&v, &inb)| if inb { g.mu(v) } else { 0.0 })
        .collect();
    let vol_r: f64 = mu_r.iter().sum();
    let apply_a = |f: &DVector<f64>| -> DVector<f64> {
        let dot: f64 = mu_r.iter().zip(f.iter()).map(|(m, x)| m * x).sum();
        DVector::from_fn(n, |i, _| mu_r[i] * f[i] - mu_r[i] * dot / vol_r)
    };

    // denominator form: ordered-pair energy on the induced subgraph of
    // B(o,2r) = 2 * (D - W), shifted off the constant kernel
    let mut b = DMatrix::zeros(n, n);
    for (i, &x) in ball2.iter().enumerate() {
        for (y, w) in g.neighbors(x) {
            if let Some(&j) = pos.get(&y) {
                if i != j {
                    b[(i, i)] += 2.0 * w;
                    b[(i, j)] -= 2.0 * w;
                }
            }
        }
    }
    let mut shift = DVector::from_fn(n, |i, _| g.mu(ball2[i]));
    shift /= shift.norm();
    let kappa = b.diagonal().sum() / n as f64;
    for i in 0..n {
        for j in 0..n {
            b[(i, j)] += kappa * shift[i] * shift[j];
        }
    }
    let chol = Cholesky::new(b).ok_or(Error::SolverDiverged {
        gap: f64::INFINITY,
        iterations: 0,
    })?;

    // power iteration on the pencil (A, B~): the shift leaves the maximal
    // Rayleigh quotient untouched because A kills constants
    let mut best = 0.0f64;
    for seed in 0..3u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(0x9e3779b9 ^ seed);
        let mut v = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        let mut lambda_prev = 0.0;
        for _ in 0..20_000 {
            let av = apply_a(&v);
            let mut w = chol.solve(&av);
            let norm = w.norm();
            if norm == 0.0 {
                break;
            }
            w /= norm;
            let aw = apply_a(&w);
            let num: f64 = w.dot(&aw);
            let bw = chol.l() * (chol.l().transpose() * &w);
            let den: f64 = w.dot(&bw);
            let lambda = num / den;
            v = w;
            if (lambda - lambda_prev).abs() <= 1e-11 * lambda.abs().max(1e-300) {
                lambda_prev = lambda;
                break;
            }
            lambda_prev = lambda;
        }
        best = best.max(lambda_prev);
    }
    Ok(PoincareEstimate {
        r,
        lambda: best,
        normalized: best / (r * r) as f64,
        ball_size: n,
    })
}

/// One sampled heat-kernel point for the Gaussian band fit.
#[derive(Debug, Clone, Serialize)]
pub struct GaussianSample {
    pub x: u32,
    pub y: u32,
    pub d: usize,
    pub n: usize,
    pub p: f64,
    pub vol_sqrt_n: f64,
}

/// Two-sided Gaussian band fit `c e^{-C d^2/n} / V(x, sqrt n)` against
/// sampled `p_n(x,y)`, `n >= d(x,y)`.
#[derive(Debug, Clone, Serialize)]
pub struct GaussianBandReport {
    pub samples: usize,
    /// Samples with `p_n(x,y) = 0` despite `n >= d`: lower-bound
    /// violations no positive constant can repair.
    pub violations: usize,
    pub violation_examples: Vec<(u32, usize)>,
    pub fitted_exponent: f64,
    pub c_lower: f64,
    pub c_upper: f64,
    /// `c_upper / c_lower`: spread of the fitted band over the samples.
    pub band_ratio: f64,
}

pub fn gaussian_band(
    t: &TruncatedGraph,
    o: VertexId,
    nmax: usize,
    dmax: usize,
) -> Result<GaussianBandReport> {
    let g = &t.graph;
    let sqrt_n = (nmax as f64).sqrt().floor() as usize;
    let profile = volume_profile(g, o, sqrt_n.max(1));
    let hk = heat_kernel_series(g, o, nmax);
    let dist = bfs_distances(g, o);

    // deterministic spread of targets per distance shell
    let mut rng = ChaCha8Rng::seed_from_u64(0xba5e);
    let mut targets: Vec<VertexId> = Vec::new();
    for shell in 0..=dmax {
        let shell_vertices: Vec<VertexId> = g
            .vertices()
            .filter(|v| dist[v.index()] as usize == shell)
            .collect();
        if shell_vertices.is_empty() {
            continue;
        }
        for _ in 0..3.min(shell_vertices.len()) {
            targets.push(shell_vertices[rng.gen_range(0..shell_vertices.len())]);
        }
    }

    let mut samples = Vec::new();
    let mut violations = 0usize;
    let mut violation_examples = Vec::new();
    for &y in &targets {
        let d = dist[y.index()] as usize;
        // geometric grid of times from d (or 1) to nmax
        let mut n = d.max(1);
        while n <= nmax {
            if n >= d {
                let p = hk.p(n, y);
                let vol = profile.volume(((n as f64).sqrt().floor() as usize).min(sqrt_n));
                if p <= 0.0 {
                    violations += 1;
                    if violation_examples.len() < 8 {
                        violation_examples.push((y.0, n));
                    }
                } else {
                    samples.push(GaussianSample {
                        x: o.0,
                        y: y.0,
                        d,
                        n,
                        p,
                        vol_sqrt_n: vol,
                    });
                }
            }
            n = (n + 1).max((n as f64 * 1.35) as usize);
        }
    }

    // fit log(p V) ~ log c - C d^2/n by least squares, then take the
    // enveloping constants
    let xs: Vec<f64> = samples.iter().map(|s| s.d.pow(2) as f64 / s.n as f64).collect();
    let ys: Vec<f64> = samples.iter().map(|s| (s.p * s.vol_sqrt_n).ln()).collect();
    let m = xs.len() as f64;
    let fitted_exponent = if samples.len() >= 2 {
        let sx: f64 = xs.iter().sum();
        let sy: f64 = ys.iter().sum();
        let sxx: f64 = xs.iter().map(|x| x * x).sum();
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
        let denom = m * sxx - sx * sx;
        if denom.abs() > 1e-12 {
            (-(m * sxy - sx * sy) / denom).max(0.0)
        } else {
            0.0
        }
    } else {
        0.0
    };
    let mut c_lower = f64::INFINITY;
    let mut c_upper: f64 = 0.0;
    for s in &samples {
        let envelope = s.p * s.vol_sqrt_n * (fitted_exponent * s.d.pow(2) as f64 / s.n as f64).exp();
        c_lower = c_lower.min(envelope);
        c_upper = c_upper.max(envelope);
    }
    Ok(GaussianBandReport {
        samples: samples.len(),
        violations,
        violation_examples,
        fitted_exponent,
        c_lower,
        c_upper,
        band_ratio: c_upper / c_lower,
    })
}
