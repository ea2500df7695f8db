//! `hzsvse`: build input-output sets, run estimation scenarios and query
//! hybrid zonotope files.

mod svg;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use serde::Serialize;

use hzsvse::approx::relu::PreactivationBounds;
use hzsvse::approx::{Domain, IOSet, TrainConfig};
use hzsvse::scenario::{build_ioset, ApproxSpec, Method, Scenario};
use hzsvse::svse::{run_estimator, StepRecord};
use hzsvse::{Error, HybridZonotope, MiSolver, Result, SolverOptions};

#[derive(Parser, Debug)]
#[command(name = "hzsvse", version, about = "Set-valued state estimation with hybrid zonotopes")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Membership tolerance (overrides the scenario's).
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Angle between support directions for polygon extraction, degrees.
    #[arg(long = "angular-res", global = true, default_value_t = 5.0)]
    angular_res: f64,
    /// Largest number of binary factors for leaf enumeration.
    #[arg(long = "leaf-cap", global = true)]
    leaf_cap: Option<usize>,
    /// Accept error bounds that are sampled rather than certified.
    #[arg(long = "allow-uncertified", global = true)]
    allow_uncertified: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build an over-approximating input-output set of a function.
    Approx(ApproxArgs),
    /// Run a scenario file through the estimator.
    Estimate(EstimateArgs),
    /// Enumerate the nonempty leaves of a 2-D set as polygons.
    Leaves(LeavesArgs),
    /// Axis-aligned bounds of one or more sets, as CSV.
    Bounds(BoundsArgs),
    /// Test whether a point belongs to a set.
    Contains(ContainsArgs),
}

#[derive(Args, Debug)]
struct ApproxArgs {
    #[arg(long, default_value = "m1")]
    method: String,
    /// inv, sources, square or net:<path>.
    #[arg(long)]
    function: String,
    /// `lo,hi` or `lo1,hi1,lo2,hi2`; defaults depend on the function.
    #[arg(long, allow_hyphen_values = true)]
    domain: Option<String>,
    /// Breakpoint count for univariate functions.
    #[arg(long)]
    breakpoints: Option<usize>,
    /// Grid for bivariate functions, `NXxNY`.
    #[arg(long)]
    grid: Option<String>,
    /// Hidden layer widths for m3, comma separated.
    #[arg(long)]
    layers: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Training iterations for m3.
    #[arg(long)]
    iterations: Option<usize>,
    /// Use LP-tightened pre-activation bounds for m3.
    #[arg(long)]
    exact_bounds: bool,
}

#[derive(Args, Debug)]
struct EstimateArgs {
    scenario: PathBuf,
    /// Run only the first `horizon` steps.
    #[arg(long)]
    horizon: Option<usize>,
    /// Enumerate leaves and count connected regions where `nb <= leaf-cap`.
    #[arg(long)]
    regions: bool,
}

#[derive(Args, Debug)]
struct LeavesArgs {
    /// Hybrid zonotope or input-output set JSON.
    set: PathBuf,
    /// Also write `leaves.svg`.
    #[arg(long)]
    svg: bool,
}

#[derive(Args, Debug)]
struct BoundsArgs {
    /// Set files; row `k` of the CSV is the `k`-th file.
    #[arg(required = true)]
    sets: Vec<PathBuf>,
}

#[derive(Args, Debug)]
struct ContainsArgs {
    set: PathBuf,
    /// Comma separated coordinates.
    #[arg(long, allow_hyphen_values = true)]
    point: String,
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse()
                .map_err(|_| Error::InvalidInput(format!("cannot parse {what} entry {t:?}")))
        })
        .collect()
}

fn parse_domain(s: &str) -> Result<Domain> {
    let v: Vec<f64> = parse_list(s, "domain")?;
    if v.is_empty() || v.len() % 2 != 0 {
        return Err(Error::InvalidInput("domain needs lo,hi pairs".into()));
    }
    Domain::new(v.iter().step_by(2).copied().collect(), v.iter().skip(1).step_by(2).copied().collect())
}

fn parse_grid(s: &str) -> Result<[usize; 2]> {
    let parts: Vec<&str> = s.split(['x', 'X']).collect();
    match parts[..] {
        [a, b] => match (a.trim().parse(), b.trim().parse()) {
            (Ok(a), Ok(b)) => Ok([a, b]),
            _ => Err(Error::InvalidInput(format!("cannot parse grid {s:?}"))),
        },
        _ => Err(Error::InvalidInput(format!("grid must look like 10x10, got {s:?}"))),
    }
}

fn default_domain(function: &str) -> Result<Domain> {
    match function {
        "inv" => Domain::interval(1.0, 10.0),
        "sources" => Domain::new(vec![-5.0, -5.0], vec![5.0, 5.0]),
        "square" => Domain::interval(-1.0, 1.0),
        _ => Err(Error::InvalidInput(format!("--domain is required for {function}"))),
    }
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Read a hybrid zonotope, or the set of an input-output set file.
fn read_set(path: &Path) -> Result<HybridZonotope> {
    let text = fs::read_to_string(path)?;
    match serde_json::from_str::<HybridZonotope>(&text) {
        Ok(z) => Ok(z),
        Err(e) => match serde_json::from_str::<IOSet>(&text) {
            Ok(phi) => Ok(phi.set),
            Err(_) => Err(Error::InvalidInput(format!("{}: {e}", path.display()))),
        },
    }
}

fn solver(g: &Global) -> MiSolver {
    let mut opts = SolverOptions::default();
    if let Some(cap) = g.leaf_cap {
        opts.leaf_cap = cap;
    }
    MiSolver::new(opts)
}

fn tol(g: &Global) -> Result<f64> {
    let t = g.tol.unwrap_or(1e-6);
    if !(t > 0.0) {
        return Err(Error::InvalidInput("--tol must be positive".into()));
    }
    Ok(t)
}

fn cmd_approx(g: &Global, a: &ApproxArgs) -> Result<()> {
    let method: Method = a.method.parse()?;
    let domain = match &a.domain {
        Some(d) => parse_domain(d)?,
        None => default_domain(&a.function)?,
    };
    let grid = a.grid.as_deref().map(parse_grid).transpose()?;
    let layers = a.layers.as_deref().map(|l| parse_list(l, "layers")).transpose()?;
    let training = a.iterations.map(|iterations| TrainConfig {
        iterations,
        ..TrainConfig::default()
    });
    let spec = ApproxSpec {
        method,
        function: a.function.clone(),
        domain,
        breakpoints: a.breakpoints,
        grid,
        axes: None,
        layers,
        bounds: if a.exact_bounds {
            PreactivationBounds::Exact
        } else {
            PreactivationBounds::Interval
        },
        seed: a.seed,
        training,
        error_grid: None,
    };
    let built = build_ioset(&spec, Path::new("."))?;
    if !built.report.certified {
        if !g.allow_uncertified {
            return Err(Error::Uncertified { eps: built.report.eps });
        }
        warn!("error bound is sampled, not certified");
    }
    fs::create_dir_all(&g.out)?;
    built.ioset.to_json_file(&g.out.join("ioset.json"))?;
    write_json(&g.out.join("report.json"), &built.report)?;
    write_json(&g.out.join("spec.json"), &spec)?;
    if let Some(s) = &built.sos {
        write_json(&g.out.join("sos.json"), s)?;
    }
    if let Some(net) = &built.network {
        hzsvse::approx::save_relu(net, &g.out.join("network.json"))?;
    }
    let r = &built.report;
    println!(
        "{:?} {}: eps {:.6e} ({}), exact (ng, nb, nc) = ({}, {}, {}), inflated ({}, {}, {}){}",
        r.method,
        r.function,
        r.eps,
        if r.certified { "certified" } else { "sampled" },
        r.exact_complexity.ng,
        r.exact_complexity.nb,
        r.exact_complexity.nc,
        r.complexity.ng,
        r.complexity.nb,
        r.complexity.nc,
        r.cells.map_or(String::new(), |c| format!(", {c} cells"))
    );
    Ok(())
}

#[derive(Serialize)]
struct Summary<'a> {
    steps: &'a [StepRecord],
    all_contain_truth: bool,
    measurement_eps: f64,
}

#[derive(Serialize)]
struct Timing {
    update_seconds: Vec<f64>,
    bounds_seconds: Vec<f64>,
    leaves_seconds: Vec<f64>,
    total_update_seconds: f64,
    total_bounds_seconds: f64,
    wall_seconds: f64,
}

fn bounds_csv(rows: &[(usize, Vec<(f64, f64)>)]) -> String {
    let n = rows.first().map_or(0, |r| r.1.len());
    let mut s = String::from("k");
    for i in 1..=n {
        s.push_str(&format!(",lo{i},hi{i}"));
    }
    s.push('\n');
    for (k, b) in rows {
        s.push_str(&k.to_string());
        for (lo, hi) in b {
            s.push_str(&format!(",{lo},{hi}"));
        }
        s.push('\n');
    }
    s
}

fn cmd_estimate(g: &Global, a: &EstimateArgs) -> Result<()> {
    let mut scenario = Scenario::from_file(&a.scenario)?;
    if let Some(h) = a.horizon {
        scenario.horizon = Some(h);
    }
    if let Some(t) = g.tol {
        scenario.tol = t;
    }
    if let Some(cap) = g.leaf_cap {
        scenario.leaf_cap = cap;
    }
    let base = a.scenario.parent().unwrap_or(Path::new("."));
    let start = Instant::now();
    let mut loaded = scenario.load(base)?;
    loaded.config.allow_uncertified = g.allow_uncertified;
    loaded.config.count_regions = a.regions;
    let eps = loaded.measurement.phi.eps;
    let state = run_estimator(
        &loaded.plant,
        &loaded.measurement,
        &loaded.x0_set,
        &loaded.system,
        &loaded.config,
    )?;
    let wall = start.elapsed().as_secs_f64();

    fs::create_dir_all(&g.out)?;
    for r in &state.log {
        write_json(&g.out.join(format!("step_{}.json", r.k)), r)?;
        write_json(&g.out.join(format!("posterior_{}.json", r.k)), &r.posterior)?;
        write_json(&g.out.join(format!("prior_{}.json", r.k)), &r.prior)?;
    }
    let rows: Vec<_> = state
        .log
        .iter()
        .filter_map(|r| r.bounds.clone().map(|b| (r.k, b)))
        .collect();
    fs::write(g.out.join("bounds.csv"), bounds_csv(&rows))?;
    write_json(
        &g.out.join("summary.json"),
        &Summary {
            steps: &state.log,
            all_contain_truth: state.all_contain_truth(),
            measurement_eps: eps,
        },
    )?;
    write_json(
        &g.out.join("timing.json"),
        &Timing {
            update_seconds: state.log.iter().map(|r| r.update_seconds).collect(),
            bounds_seconds: state.log.iter().map(|r| r.bounds_seconds).collect(),
            leaves_seconds: state.log.iter().map(|r| r.leaves_seconds).collect(),
            total_update_seconds: state.update_seconds(),
            total_bounds_seconds: state.bounds_seconds(),
            wall_seconds: wall,
        },
    )?;

    for r in &state.log {
        let bounds = r.bounds.as_ref().map_or(String::from("-"), |b| {
            b.iter()
                .map(|(lo, hi)| format!("[{lo:.4}, {hi:.4}]"))
                .collect::<Vec<_>>()
                .join(" x ")
        });
        let regions = match (r.leaves, r.regions) {
            (Some(l), Some(g)) => format!(", {l} leaves in {g} region(s)"),
            _ if a.regions => format!(", regions not counted (nb {} above cap)", r.posterior_complexity.nb),
            _ => String::new(),
        };
        println!(
            "k={} truth {} subset violations {}/{} bounds {}{}",
            r.k,
            if r.contains_truth { "contained" } else { "NOT contained" },
            r.subset_violations,
            r.subset_samples,
            bounds,
            regions
        );
    }
    println!(
        "estimation {:.3} s, bounds {:.3} s, wall {:.3} s",
        state.update_seconds(),
        state.bounds_seconds(),
        wall
    );
    if !state.all_contain_truth() {
        warn!("the true state left at least one posterior");
    }
    Ok(())
}

#[derive(Serialize)]
struct LeafPolygon {
    assignment: Vec<i8>,
    vertices: Vec<[f64; 2]>,
}

#[derive(Serialize)]
struct LeavesOut {
    angular_resolution: f64,
    leaves: Vec<LeafPolygon>,
    regions: Vec<Vec<usize>>,
}

fn cmd_leaves(g: &Global, a: &LeavesArgs) -> Result<()> {
    let z = read_set(&a.set)?;
    if z.n() != 2 {
        return Err(Error::InvalidInput(format!("leaves needs a 2-D set, got dimension {}", z.n())));
    }
    let s = solver(g);
    let leaves = s.enumerate_leaves(&z)?;
    if leaves.is_empty() {
        return Err(Error::EmptySet);
    }
    let regions = s.connected_regions(&leaves, tol(g)?)?;
    let polys = leaves
        .iter()
        .map(|l| s.leaf_polygon_2d(l, g.angular_res))
        .collect::<Result<Vec<_>>>()?;
    info!("{} leaves in {} region(s)", leaves.len(), regions.len());
    fs::create_dir_all(&g.out)?;
    if a.svg {
        let mut group = vec![0; leaves.len()];
        for (r, members) in regions.iter().enumerate() {
            for &i in members {
                group[i] = r;
            }
        }
        let title = a.set.file_stem().map_or(String::new(), |t| t.to_string_lossy().into_owned());
        fs::write(g.out.join("leaves.svg"), svg::render(&polys, &group, &title))?;
    }
    let out = LeavesOut {
        angular_resolution: g.angular_res,
        leaves: leaves
            .iter()
            .zip(polys)
            .map(|(l, p)| LeafPolygon {
                assignment: l.assignment.0.clone(),
                vertices: p.vertices,
            })
            .collect(),
        regions,
    };
    write_json(&g.out.join("leaves.json"), &out)?;
    println!("{} leaves, {} region(s)", out.leaves.len(), out.regions.len());
    Ok(())
}

fn cmd_bounds(g: &Global, a: &BoundsArgs) -> Result<()> {
    let s = solver(g);
    let mut rows = Vec::with_capacity(a.sets.len());
    for (k, p) in a.sets.iter().enumerate() {
        let z = read_set(p)?;
        if let Some((_, first)) = rows.first() {
            let first: &Vec<(f64, f64)> = first;
            if first.len() != z.n() {
                return Err(Error::InvalidInput(format!("{} has dimension {}", p.display(), z.n())));
            }
        }
        rows.push((k, s.bounds(&z)?));
    }
    let csv = bounds_csv(&rows);
    fs::create_dir_all(&g.out)?;
    fs::write(g.out.join("bounds.csv"), &csv)?;
    print!("{csv}");
    Ok(())
}

#[derive(Serialize)]
struct Verdict {
    point: Vec<f64>,
    tol: f64,
    contains: bool,
    /// Factors `(xi_c, xi_b)` of a member within `tol` of the point.
    #[serde(skip_serializing_if = "Option::is_none")]
    certificate: Option<hzsvse::Member>,
}

fn cmd_contains(g: &Global, a: &ContainsArgs) -> Result<()> {
    let z = read_set(&a.set)?;
    let point: Vec<f64> = parse_list(&a.point, "point")?;
    let t = tol(g)?;
    let witness = solver(g).contains_point_witness(&z, &point, t)?;
    let v = Verdict {
        point,
        tol: t,
        contains: witness.is_some(),
        certificate: witness,
    };
    fs::create_dir_all(&g.out)?;
    write_json(&g.out.join("contains.json"), &v)?;
    println!("{}", v.contains);
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Inconsistent { .. } | Error::EmptySet => 2,
        Error::ResourceCap { .. } => 3,
        Error::InvalidInput(_)
        | Error::Dimension { .. }
        | Error::Uncertified { .. }
        | Error::Io(_)
        | Error::Json(_) => 4,
        Error::SolverFailure(_) | Error::Training(_) => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(4) } else { ExitCode::SUCCESS };
        }
    };
    let g = &cli.global;
    let result = match &cli.cmd {
        Command::Approx(a) => cmd_approx(g, a),
        Command::Estimate(a) => cmd_estimate(g, a),
        Command::Leaves(a) => cmd_leaves(g, a),
        Command::Bounds(a) => cmd_bounds(g, a),
        Command::Contains(a) => cmd_contains(g, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
