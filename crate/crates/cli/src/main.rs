//! potlab: batch front-end for the discrete potential theory laboratory.
//!
//! Subcommands build graphs, run capacity and criteria diagnostics, and emit
//! reproducible JSON/CSV reports. A run is a pure function of its resolved
//! configuration: every JSON report embeds the tool version and a hash of
//! the configuration, and repeated runs are bit-identical.
//!
//! Exit codes: 0 success, 1 property violation, 2 usage error.

use std::fs;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use potlab_core::builders::{
    exhaustion_of, heisenberg, lattice, LatticeProfile, TruncatedGraph,
};
use potlab_core::capacity::{
    equivalence_report, harmonic_capacity, CapacityProblem,
};
use potlab_core::criteria::{
    volume_growth_test, lp_parabolic_series, nash_williams, SeriesVerdict,
};
use potlab_core::graph::{volume_profile, VertexId, VertexSet, WeightedGraph};
use potlab_core::green::{column_to_csv, exhaustion_green, green_band_check, local_green};
use potlab_core::smoothing::{coefficients, hat_graph, sandwich_check, structure_report};
use potlab_core::Error;

#[derive(Parser)]
#[command(name = "potlab", version, about = "discrete potential theory lab")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build a truncated host and write its edge list and volume profile.
    Build {
        #[command(subcommand)]
        cmd: BuildCmd,
    },
    /// Run the three-way capacity equivalence report on one instance.
    Capacity(CapacityArgs),
    /// Volume-growth series diagnostics.
    Criteria {
        #[command(subcommand)]
        cmd: CriteriaCmd,
    },
    /// Green function diagnostics.
    Green {
        #[command(subcommand)]
        cmd: GreenCmd,
    },
    /// Smoothing transform diagnostics.
    Smooth {
        #[command(subcommand)]
        cmd: SmoothCmd,
    },
}

#[derive(Subcommand)]
enum BuildCmd {
    /// l1 ball of Z^d with unit edge weights.
    Lattice(LatticeBuildArgs),
    /// Word-metric ball of the discrete Heisenberg group.
    Heisenberg(HeisenbergBuildArgs),
}

#[derive(Args, Serialize)]
struct LatticeBuildArgs {
    /// Dimension.
    #[arg(long = "d")]
    dim: usize,
    /// Truncation radius.
    #[arg(long = "R")]
    radius: usize,
    /// Output path for the edge list.
    #[arg(long, default_value = "graph.edges")]
    out_edges: String,
    /// Output path for the volume profile CSV.
    #[arg(long, default_value = "profile.csv")]
    out_profile: String,
}

#[derive(Args, Serialize)]
struct HeisenbergBuildArgs {
    /// Truncation radius.
    #[arg(long = "R")]
    radius: usize,
    #[arg(long, default_value = "graph.edges")]
    out_edges: String,
    #[arg(long, default_value = "profile.csv")]
    out_profile: String,
}

#[derive(Args, Serialize)]
struct CapacityArgs {
    /// Host: z1..z8, heisenberg, or an edge-list file path.
    #[arg(long)]
    graph: String,
    /// Truncation radius for builtin hosts.
    #[arg(long = "R", default_value_t = 6)]
    radius: usize,
    /// Domain U = ball of this radius around the center.
    #[arg(long, default_value_t = 4)]
    u_radius: usize,
    /// Kernel vertices (defaults to the center).
    #[arg(long, value_delimiter = ',')]
    kernel: Vec<u32>,
    /// Exponent p >= 1; p = 1 routes to the harmonic capacity.
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    /// Include wall-clock timings (breaks bit-identical output).
    #[arg(long, default_value_t = false)]
    timings: bool,
    /// Output path for the JSON report (stdout when omitted).
    #[arg(long)]
    out: Option<String>,
}

#[derive(Subcommand)]
enum CriteriaCmd {
    /// Full d x p verdict matrix over closed-form lattice profiles.
    ZdBattery(ZdBatteryArgs),
    /// Nash-Williams series for one closed-form lattice profile.
    NashWilliams(NashWilliamsArgs),
    /// Volume-growth sufficient test V <= C r^{2p} (log r)^{p-1}.
    VolumeTest(VolumeTestArgs),
    /// Empirical Poincare constants Lambda(r) on balls of a host.
    Poincare(PoincareArgs),
    /// Two-sided Gaussian heat-kernel band fit with violation counts.
    GaussianBand(GaussianBandArgs),
}

#[derive(Args, Serialize)]
struct ZdBatteryArgs {
    #[arg(long, value_delimiter = ',', default_value = "2,3,4,5")]
    dims: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "1.25,1.5,2,2.5,3")]
    ps: Vec<f64>,
    #[arg(long, default_value_t = 10_000)]
    n: usize,
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args, Serialize)]
struct NashWilliamsArgs {
    #[arg(long)]
    d: usize,
    #[arg(long, default_value_t = 10_000)]
    n: usize,
    /// Checkpoint partial sums as CSV.
    #[arg(long)]
    out_csv: Option<String>,
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args, Serialize)]
struct VolumeTestArgs {
    /// Host: zd for closed form, heisenberg for a measured profile.
    #[arg(long)]
    graph: String,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    /// Radius horizon (closed form) or truncation radius (measured).
    #[arg(long = "R", default_value_t = 25)]
    radius: usize,
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args, Serialize)]
struct PoincareArgs {
    #[arg(long)]
    graph: String,
    /// Truncation radius; must cover 2 * max(radii).
    #[arg(long = "R", default_value_t = 18)]
    radius: usize,
    #[arg(long, value_delimiter = ',', default_value = "4,8")]
    radii: Vec<usize>,
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args, Serialize)]
struct GaussianBandArgs {
    #[arg(long)]
    graph: String,
    #[arg(long = "R", default_value_t = 50)]
    radius: usize,
    /// Apply the hat transform first (plants loops everywhere).
    #[arg(long, default_value_t = false)]
    hat: bool,
    #[arg(long, default_value_t = 400)]
    nmax: usize,
    #[arg(long, default_value_t = 10)]
    dmax: usize,
    #[arg(long)]
    out: Option<String>,
}

#[derive(Subcommand)]
enum GreenCmd {
    /// Green/Li-Yau ratio band over interior pairs.
    Band(BandArgs),
    /// One local Green column as CSV.
    Column(ColumnArgs),
    /// Exhaustion trend of g^{U_n}(center, center).
    Trend(TrendArgs),
}

#[derive(Args, Serialize)]
struct BandArgs {
    #[arg(long)]
    graph: String,
    #[arg(long = "R", default_value_t = 20)]
    radius: usize,
    /// Apply the hat transform to the host first.
    #[arg(long, default_value_t = false)]
    hat: bool,
    /// Max pair distance.
    #[arg(long, default_value_t = 8)]
    dmax: usize,
    /// Li-Yau series horizon.
    #[arg(long, default_value_t = 12)]
    series_n: usize,
    /// Band width limit for the pass verdict.
    #[arg(long, default_value_t = 100.0)]
    band_limit: f64,
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args, Serialize)]
struct ColumnArgs {
    #[arg(long)]
    graph: String,
    #[arg(long = "R", default_value_t = 10)]
    radius: usize,
    #[arg(long, default_value_t = 8)]
    u_radius: usize,
    /// Pole vertex (defaults to the center).
    #[arg(long)]
    pole: Option<u32>,
    #[arg(long, default_value = "column.csv")]
    out: String,
}

#[derive(Args, Serialize)]
struct TrendArgs {
    #[arg(long)]
    graph: String,
    #[arg(long = "R", default_value_t = 20)]
    radius: usize,
    #[arg(long, value_delimiter = ',')]
    radii: Vec<usize>,
    #[arg(long)]
    out: Option<String>,
}

#[derive(Subcommand)]
enum SmoothCmd {
    /// Exact coefficient table and identity checks.
    Verify(VerifyArgs),
    /// Hat transform of a host, written as an edge list.
    Hat(HatArgs),
}

#[derive(Args, Serialize)]
struct VerifyArgs {
    #[arg(long, default_value_t = 64)]
    kmax: usize,
    /// Also run the sandwich check on a small host with this radius.
    #[arg(long, default_value_t = 3)]
    host_radius: usize,
    #[arg(long, default_value_t = 4)]
    sandwich_l: usize,
    /// Output path for the exact coefficient CSV.
    #[arg(long)]
    out_csv: Option<String>,
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args, Serialize)]
struct HatArgs {
    #[arg(long)]
    graph: String,
    #[arg(long = "R", default_value_t = 6)]
    radius: usize,
    #[arg(long, default_value = "hat.edges")]
    out: String,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::InvalidParameter(_) | Error::ParseError { .. } => ExitCode::from(2),
                Error::EquivalenceViolation { .. } => ExitCode::from(1),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn run(cli: Cli) -> potlab_core::Result<ExitCode> {
    match cli.cmd {
        Cmd::Build { cmd } => match cmd {
            BuildCmd::Lattice(args) => {
                let t = lattice(args.dim, args.radius)?;
                let (edges, profile) = (args.out_edges.clone(), args.out_profile.clone());
                cmd_build(t, &edges, &profile, args)
            }
            BuildCmd::Heisenberg(args) => {
                let t = heisenberg(args.radius)?;
                let (edges, profile) = (args.out_edges.clone(), args.out_profile.clone());
                cmd_build(t, &edges, &profile, args)
            }
        },
        Cmd::Capacity(args) => cmd_capacity(args),
        Cmd::Criteria { cmd } => match cmd {
            CriteriaCmd::ZdBattery(args) => cmd_zd_battery(args),
            CriteriaCmd::NashWilliams(args) => cmd_nash_williams(args),
            CriteriaCmd::VolumeTest(args) => cmd_volume_test(args),
            CriteriaCmd::Poincare(args) => cmd_poincare(args),
            CriteriaCmd::GaussianBand(args) => cmd_gaussian_band(args),
        },
        Cmd::Green { cmd } => match cmd {
            GreenCmd::Band(args) => cmd_band(args),
            GreenCmd::Column(args) => cmd_column(args),
            GreenCmd::Trend(args) => cmd_trend(args),
        },
        Cmd::Smooth { cmd } => match cmd {
            SmoothCmd::Verify(args) => cmd_smooth_verify(args),
            SmoothCmd::Hat(args) => cmd_smooth_hat(args),
        },
    }
}

/// FNV-1a over the canonical config JSON; embedded in every report.
fn config_hash(config_json: &str) -> String {
    let mut hash: u64 = 0xcbf29ce484222325;
    for b in config_json.as_bytes() {
        hash ^= *b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    format!("{hash:016x}")
}

#[derive(Serialize)]
struct Envelope<C: Serialize, R: Serialize> {
    tool: &'static str,
    version: &'static str,
    config_hash: String,
    config: C,
    report: R,
}

fn emit<C: Serialize, R: Serialize>(
    config: C,
    report: R,
    out: Option<&str>,
) -> potlab_core::Result<()> {
    let config_json = serde_json::to_string(&config).expect("config serializes");
    let envelope = Envelope {
        tool: "potlab",
        version: env!("CARGO_PKG_VERSION"),
        config_hash: config_hash(&config_json),
        config,
        report,
    };
    let text = serde_json::to_string_pretty(&envelope).expect("report serializes");
    match out {
        Some(path) => fs::write(path, text + "\n").map_err(|e| {
            Error::InvalidParameter(format!("cannot write {path}: {e}"))
        })?,
        None => println!("{text}"),
    }
    Ok(())
}

/// Resolves a host spec: z1..z8 / heisenberg builders, or an edge-list file.
fn resolve_host(spec: &str, radius: usize) -> potlab_core::Result<TruncatedGraph> {
    if let Some(d) = spec.strip_prefix('z').and_then(|s| s.parse::<usize>().ok()) {
        return lattice(d, radius);
    }
    if spec == "heisenberg" {
        return heisenberg(radius);
    }
    let text = fs::read_to_string(spec)
        .map_err(|e| Error::InvalidParameter(format!("cannot read {spec}: {e}")))?;
    let graph = WeightedGraph::from_edge_list(&text)?;
    let center = VertexId(0);
    let dist = potlab_core::graph::bfs_distances(&graph, center);
    let trust = dist.iter().map(|&d| d as usize).max().unwrap_or(0);
    let boundary = VertexSet::new(
        graph.vertex_count(),
        graph
            .vertices()
            .filter(|v| dist[v.index()] as usize >= trust),
    );
    Ok(TruncatedGraph {
        graph,
        center,
        trust_radius: trust,
        boundary,
    })
}

fn cmd_build<C: Serialize>(
    t: TruncatedGraph,
    out_edges: &str,
    out_profile: &str,
    config: C,
) -> potlab_core::Result<ExitCode> {
    fs::write(out_edges, t.graph.to_edge_list())
        .map_err(|e| Error::InvalidParameter(format!("cannot write edges: {e}")))?;
    let profile = volume_profile(&t.graph, t.center, t.trust_radius);
    let mut csv = String::from("n,ball_measure,sphere_count,sphere_measure\n");
    for n in 0..=profile.rmax() {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            n, profile.ball_measure[n], profile.sphere_count[n], profile.sphere_measure[n]
        ));
    }
    fs::write(out_profile, csv)
        .map_err(|e| Error::InvalidParameter(format!("cannot write profile: {e}")))?;
    #[derive(Serialize)]
    struct BuildReport {
        vertices: usize,
        trust_radius: usize,
        boundary_size: usize,
    }
    let report = BuildReport {
        vertices: t.graph.vertex_count(),
        trust_radius: t.trust_radius,
        boundary_size: t.boundary.len(),
    };
    emit(config, report, None)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_capacity(args: CapacityArgs) -> potlab_core::Result<ExitCode> {
    if !(args.p >= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "p must be >= 1, got {}",
            args.p
        )));
    }
    let t = resolve_host(&args.graph, args.radius)?;
    let g = &t.graph;
    let u = VertexSet::ball(g, t.center, args.u_radius);
    if let Some(&bad) = args
        .kernel
        .iter()
        .find(|&&v| v as usize >= g.vertex_count())
    {
        return Err(Error::InvalidParameter(format!(
            "kernel vertex {bad} outside host of {} vertices",
            g.vertex_count()
        )));
    }
    let kernel = if args.kernel.is_empty() {
        VertexSet::new(g.vertex_count(), [t.center])
    } else {
        VertexSet::new(g.vertex_count(), args.kernel.iter().map(|&v| VertexId(v)))
    };
    if (args.p - 1.0).abs() < 1e-12 {
        // the dual sup degenerates at p = 1: harmonic capacity only
        let sol = harmonic_capacity(g, &u, &kernel)?;
        #[derive(Serialize)]
        struct HarmonicReport {
            note: &'static str,
            value: f64,
            equilibrium_mass: f64,
        }
        let mass = sol.equilibrium_measure.iter().sum();
        emit(
            args,
            HarmonicReport {
                note: "p = 1 is served by the harmonic capacity",
                value: sol.value,
                equilibrium_mass: mass,
            },
            None,
        )?;
        return Ok(ExitCode::SUCCESS);
    }
    let prob = CapacityProblem::new(g, u, kernel, args.p)?;
    let started = std::time::Instant::now();
    let report = equivalence_report(&prob)?;
    let elapsed_ms = started.elapsed().as_secs_f64() * 1e3;
    #[derive(Serialize)]
    struct TimedReport {
        #[serde(flatten)]
        report: potlab_core::capacity::EquivalenceReport,
        #[serde(skip_serializing_if = "Option::is_none")]
        timings_ms: Option<f64>,
    }
    let timed = TimedReport {
        report,
        timings_ms: args.timings.then_some(elapsed_ms),
    };
    let out = args.out.clone();
    emit(args, timed, out.as_deref())?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_zd_battery(args: ZdBatteryArgs) -> potlab_core::Result<ExitCode> {
    #[derive(Serialize)]
    struct Cell {
        d: usize,
        p: f64,
        divergent: bool,
        expected_divergent: bool,
        matches: bool,
        verdict: SeriesVerdict,
    }
    let threads: usize = std::env::var("POTLAB_THREADS")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(1);
    let mut jobs: Vec<(usize, f64)> = Vec::new();
    for &d in &args.dims {
        for &p in &args.ps {
            jobs.push((d, p));
        }
    }
    let n = args.n;
    let results: Vec<Cell> = if threads > 1 {
        let chunks: Vec<Vec<(usize, f64)>> = jobs
            .chunks(jobs.len().div_ceil(threads))
            .map(|c| c.to_vec())
            .collect();
        let mut all: Vec<Cell> = std::thread::scope(|scope| {
            let handles: Vec<_> = chunks
                .into_iter()
                .map(|chunk| {
                    scope.spawn(move || {
                        chunk
                            .into_iter()
                            .map(|(d, p)| battery_cell(d, p, n))
                            .collect::<potlab_core::Result<Vec<Cell>>>()
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("battery thread"))
                .collect::<potlab_core::Result<Vec<Vec<Cell>>>>()
                .map(|v| v.into_iter().flatten().collect())
        })?;
        all.sort_by(|a, b| (a.d, ordered(a.p)).cmp(&(b.d, ordered(b.p))));
        all
    } else {
        jobs.into_iter()
            .map(|(d, p)| battery_cell(d, p, n))
            .collect::<potlab_core::Result<Vec<Cell>>>()?
    };

    fn ordered(p: f64) -> u64 {
        (p * 1000.0) as u64
    }

    fn battery_cell(d: usize, p: f64, n: usize) -> potlab_core::Result<Cell> {
        let verdict = lp_parabolic_series(&LatticeProfile { d }, p, n)?;
        let expected = p >= d as f64 / 2.0;
        Ok(Cell {
            d,
            p,
            divergent: verdict.divergent(),
            expected_divergent: expected,
            matches: verdict.divergent() == expected,
            verdict,
        })
    }

    let all_match = results.iter().all(|c| c.matches);
    #[derive(Serialize)]
    struct Battery {
        cells: Vec<Cell>,
        all_match: bool,
    }
    let out = args.out.clone();
    emit(
        args,
        Battery {
            cells: results,
            all_match,
        },
        out.as_deref(),
    )?;
    Ok(if all_match {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn cmd_nash_williams(args: NashWilliamsArgs) -> potlab_core::Result<ExitCode> {
    let verdict = nash_williams(&LatticeProfile { d: args.d }, args.n)?;
    if let Some(path) = &args.out_csv {
        fs::write(path, verdict.checkpoints_to_csv())
            .map_err(|e| Error::InvalidParameter(format!("cannot write csv: {e}")))?;
    }
    let out = args.out.clone();
    emit(args, verdict, out.as_deref())?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_volume_test(args: VolumeTestArgs) -> potlab_core::Result<ExitCode> {
    let report = if let Some(d) = args
        .graph
        .strip_prefix('z')
        .and_then(|s| s.parse::<usize>().ok())
    {
        volume_growth_test(&LatticeProfile { d }, args.p, args.radius)?
    } else {
        let t = resolve_host(&args.graph, args.radius)?;
        let profile = volume_profile(&t.graph, t.center, t.trust_radius);
        volume_growth_test(&profile, args.p, t.trust_radius)?
    };
    let pass = report.pass;
    let out = args.out.clone();
    emit(args, report, out.as_deref())?;
    Ok(if pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn cmd_poincare(args: PoincareArgs) -> potlab_core::Result<ExitCode> {
    let t = resolve_host(&args.graph, args.radius)?;
    let mut estimates = Vec::new();
    for &r in &args.radii {
        estimates.push(potlab_core::criteria::poincare_constant(
            &t.graph, t.center, r,
        )?);
    }
    let out = args.out.clone();
    emit(args, estimates, out.as_deref())?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_gaussian_band(args: GaussianBandArgs) -> potlab_core::Result<ExitCode> {
    let mut t = resolve_host(&args.graph, args.radius)?;
    if args.hat {
        t = potlab_core::smoothing::hat_truncated(&t);
    }
    let report = potlab_core::criteria::gaussian_band(&t, t.center, args.nmax, args.dmax)?;
    let clean = report.violations == 0;
    let out = args.out.clone();
    emit(args, report, out.as_deref())?;
    Ok(if clean {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn cmd_band(args: BandArgs) -> potlab_core::Result<ExitCode> {
    let mut t = resolve_host(&args.graph, args.radius)?;
    if args.hat {
        t = potlab_core::smoothing::hat_truncated(&t);
    }
    let dist = potlab_core::graph::bfs_distances(&t.graph, t.center);
    let mut pairs = Vec::new();
    for d in 0..=args.dmax {
        if let Some(v) = t
            .graph
            .vertices()
            .find(|v| dist[v.index()] as usize == d)
        {
            pairs.push((t.center, v));
        }
    }
    let report = green_band_check(&t, &pairs, args.series_n, args.band_limit)?;
    let pass = report.pass;
    let out = args.out.clone();
    emit(args, report, out.as_deref())?;
    Ok(if pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn cmd_column(args: ColumnArgs) -> potlab_core::Result<ExitCode> {
    let t = resolve_host(&args.graph, args.radius)?;
    let u = VertexSet::ball(&t.graph, t.center, args.u_radius);
    let pole = args.pole.map_or(t.center, VertexId);
    if pole.index() >= t.graph.vertex_count() {
        return Err(Error::InvalidParameter(format!(
            "pole {pole} outside host of {} vertices",
            t.graph.vertex_count()
        )));
    }
    let col = local_green(&t.graph, &u, pole)?;
    fs::write(&args.out, column_to_csv(&col))
        .map_err(|e| Error::InvalidParameter(format!("cannot write column: {e}")))?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_trend(args: TrendArgs) -> potlab_core::Result<ExitCode> {
    let t = resolve_host(&args.graph, args.radius)?;
    let radii = if args.radii.is_empty() {
        let top = t.trust_radius.saturating_sub(1);
        vec![top / 4, top / 2, (3 * top) / 4, top]
    } else {
        args.radii.clone()
    };
    let ex = exhaustion_of(&t, &radii)?;
    let trend = exhaustion_green(&t, &ex, t.center, t.center)?;
    let out = args.out.clone();
    emit(args, trend, out.as_deref())?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_smooth_verify(args: VerifyArgs) -> potlab_core::Result<ExitCode> {
    let coeffs = coefficients(args.kmax);
    if let Some(path) = &args.out_csv {
        fs::write(path, coeffs.c_to_csv())
            .map_err(|e| Error::InvalidParameter(format!("cannot write csv: {e}")))?;
    }
    let host = lattice(2, args.host_radius)?;
    let sandwich = sandwich_check(&host.graph, args.sandwich_l)?;
    let structure = structure_report(&host.graph);

    #[derive(Serialize)]
    struct VerifyReport {
        kmax: usize,
        c_first_eight: Vec<String>,
        b_k_all_match_closed_form: bool,
        c_k_in_half_one: bool,
        sandwich_pass: bool,
        structure_delta_holds: bool,
    }
    let b_ok = coeffs.b_matches_closed_forms();
    let c_ok = coeffs.c_in_half_one_band();
    let report = VerifyReport {
        kmax: args.kmax,
        c_first_eight: coeffs.c.iter().take(8).map(|c| c.to_string()).collect(),
        b_k_all_match_closed_form: b_ok,
        c_k_in_half_one: c_ok,
        sandwich_pass: sandwich.pass,
        structure_delta_holds: structure.delta_holds,
    };
    let pass = b_ok && c_ok && sandwich.pass && structure.delta_holds;
    let out = args.out.clone();
    emit(args, report, out.as_deref())?;
    Ok(if pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn cmd_smooth_hat(args: HatArgs) -> potlab_core::Result<ExitCode> {
    let t = resolve_host(&args.graph, args.radius)?;
    let hat = hat_graph(&t.graph);
    fs::write(&args.out, hat.to_edge_list())
        .map_err(|e| Error::InvalidParameter(format!("cannot write hat graph: {e}")))?;
    Ok(ExitCode::SUCCESS)
}
