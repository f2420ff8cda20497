//! Command-line entry point: configure runs, execute extremum search or the
//! TSP baseline, verify against the brute-force oracle, and write reports.
//!
//! Exit codes: 0 success, 1 runtime error, 2 usage error.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{ArgGroup, Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::colony::AcoParams;
use crate::grid::NeighborScheme;
use crate::objective::{BoxDomain, ObjectiveFunction, Sense};
use crate::oracle::{grid_extrema, OracleConfig};
use crate::report::{emit_plot_data, fmt17, FunctionSpec, ReportDoc, RunConfigDoc};
use crate::search::{error_ratio, search, ExtremumResult, RunReport, SearchConfig};
use crate::tsp::{solve_tsp, CityGraph, TspParams};

const GRAMMAR_HELP: &str = "\
Expression grammar (EBNF):
  expr    := term { (\"+\" | \"-\") term }
  term    := factor { (\"*\" | \"/\") factor }
  factor  := \"-\" factor | power
  power   := atom [ \"^\" factor ]
  atom    := NUMBER | \"pi\" | \"e\" | VAR | FUNC \"(\" expr \")\" | \"(\" expr \")\"
  FUNC    := sin | cos | exp | sqrt | abs
  VAR     := x (dim 1) | x1 .. xd
`^` is right-associative and binds tighter than unary minus: -x^2 = -(x^2).";

#[derive(Parser, Debug)]
#[command(
    name = "lattice-aco",
    version,
    about = "Locate all local extrema of a multimodal function with lattice-partitioned ant colonies",
    after_long_help = GRAMMAR_HELP
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Search for all local extrema of a function on a box domain
    Extrema(ExtremaArgs),
    /// Run the classical ant-system TSP baseline on a city list
    Tsp(TspArgs),
    /// Run both the search and the brute-force oracle and report errors
    Verify(VerifyArgs),
}

#[derive(Args, Debug, Clone)]
#[command(group(ArgGroup::new("function").args(["builtin", "expr", "config"]).required(true)))]
struct FunctionArgs {
    /// Built-in test function: f1, f2, f3, f4, or f5
    #[arg(long, conflicts_with_all = ["expr", "domain"])]
    builtin: Option<String>,

    /// Objective as an expression, e.g. "sin(5.1*pi*x+0.5)^6" (see --help)
    #[arg(long, requires = "domain")]
    expr: Option<String>,

    /// Box domain as "lo,hi" pairs joined by ';', e.g. "0,1" or "-1,1;-1,1"
    #[arg(long)]
    domain: Option<String>,

    /// JSON config file (the `config` object of a report); replaces all
    /// function and search flags
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct SearchArgs {
    /// Initial cells per dimension, comma-separated (single value broadcasts)
    #[arg(long, conflicts_with = "config")]
    n: Option<String>,

    /// Subdivision per dimension, comma-separated (single value broadcasts)
    #[arg(long, conflicts_with = "config")]
    n1: Option<String>,

    /// Stop threshold on the maximum cell size
    #[arg(long, default_value_t = 1e-4)]
    epsilon: f64,

    /// Optimization sense: min, max, or both (two merged passes)
    #[arg(long, conflicts_with = "config")]
    sense: Option<String>,

    /// Random seed
    #[arg(long, default_value_t = 1)]
    seed: u64,

    /// Neighbor scheme: axis or full
    #[arg(long, default_value = "full")]
    neighbor_scheme: String,

    /// Also evaluate the domain boundary faces directly
    #[arg(long, default_value_t = false)]
    check_boundary: bool,

    /// Trail influence
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,

    /// Heuristic influence
    #[arg(long, default_value_t = 1.0)]
    beta: f64,

    /// Evaporation rate in [0, 1)
    #[arg(long, default_value_t = 0.3)]
    rho: f64,

    /// Pheromone deposit coefficient
    #[arg(long, default_value_t = 1.0)]
    c1: f64,

    /// Initial pheromone level
    #[arg(long, default_value_t = 10.0)]
    tau0: f64,

    /// Cap on colony steps per grid (default: 10x the cell count)
    #[arg(long)]
    max_inner_iters: Option<usize>,
}

#[derive(Args, Debug)]
struct ExtremaArgs {
    #[command(flatten)]
    function: FunctionArgs,
    #[command(flatten)]
    search: SearchArgs,

    /// Write the JSON report here
    #[arg(long)]
    out: Option<PathBuf>,

    /// Write the CSV report here
    #[arg(long)]
    csv: Option<PathBuf>,

    /// Write curve.csv and extrema.csv plot data into this directory
    #[arg(long)]
    plot_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TspArgs {
    /// CSV file of cities, one "x,y" pair per line
    #[arg(long)]
    cities: PathBuf,

    /// Iteration count
    #[arg(long, default_value_t = 100)]
    iterations: usize,

    /// Ant count (default: round(N / 1.5))
    #[arg(long)]
    ants: Option<usize>,

    #[arg(long, default_value_t = 1.0)]
    alpha: f64,

    #[arg(long, default_value_t = 1.0)]
    beta: f64,

    #[arg(long, default_value_t = 0.3)]
    rho: f64,

    /// Pheromone quantity Q
    #[arg(long, default_value_t = 1.0)]
    q: f64,

    #[arg(long, default_value_t = 10.0)]
    tau0: f64,

    /// Stop early when |L_t - L_{t+1}| / L_t drops below this
    #[arg(long)]
    marker_threshold: Option<f64>,

    #[arg(long, default_value_t = 1)]
    seed: u64,

    /// Write a JSON result here
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[command(flatten)]
    function: FunctionArgs,
    #[command(flatten)]
    search: SearchArgs,

    /// Oracle samples per dimension, comma-separated (default: 100001 for
    /// 1-D, 2001 per dimension otherwise)
    #[arg(long)]
    resolution: Option<String>,

    /// Oracle 1-D refinement iterations
    #[arg(long, default_value_t = 60)]
    refine_steps: usize,

    /// Write the JSON report here
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Run the CLI against `argv` (including the program name) and return the
/// process exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = err.print();
            return code;
        }
    };

    let body = || -> Result<i32, CliError> {
        match cli.command {
            Command::Extrema(args) => cmd_extrema(args),
            Command::Tsp(args) => cmd_tsp(args),
            Command::Verify(args) => cmd_verify(args),
        }
    };

    let run = || match body() {
        Ok(code) => code,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            1
        }
    };

    // LATTICE_ACO_THREADS caps the worker pool used for per-grid parallelism
    match std::env::var("LATTICE_ACO_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n >= 1)
    {
        Some(threads) => match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
            Ok(pool) => pool.install(run),
            Err(_) => run(),
        },
        None => run(),
    }
}

enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    fn runtime(msg: impl std::fmt::Display) -> Self {
        CliError::Runtime(msg.to_string())
    }
}

fn parse_counts(text: &str, dim: usize, flag: &str) -> Result<Vec<usize>, CliError> {
    let parts: Result<Vec<usize>, _> = text.split(',').map(|p| p.trim().parse()).collect();
    let counts =
        parts.map_err(|_| CliError::usage(format!("--{flag} expects positive integers, got `{text}`")))?;
    if counts.len() == dim {
        Ok(counts)
    } else if counts.len() == 1 {
        Ok(vec![counts[0]; dim])
    } else {
        Err(CliError::usage(format!(
            "--{flag} has {} entries but the domain has dimension {dim}",
            counts.len()
        )))
    }
}

fn parse_domain(text: &str) -> Result<Vec<[f64; 2]>, CliError> {
    text.split(';')
        .map(|seg| {
            let pair: Vec<&str> = seg.split(',').map(str::trim).collect();
            if pair.len() != 2 {
                return Err(CliError::usage(format!(
                    "--domain segment `{seg}` is not a `lo,hi` pair"
                )));
            }
            let lo: f64 = pair[0]
                .parse()
                .map_err(|_| CliError::usage(format!("bad domain bound `{}`", pair[0])))?;
            let hi: f64 = pair[1]
                .parse()
                .map_err(|_| CliError::usage(format!("bad domain bound `{}`", pair[1])))?;
            Ok([lo, hi])
        })
        .collect()
}

fn parse_sense(label: &str) -> Result<Vec<Sense>, CliError> {
    match label {
        "min" => Ok(vec![Sense::Minimize]),
        "max" => Ok(vec![Sense::Maximize]),
        "both" => Ok(vec![Sense::Minimize, Sense::Maximize]),
        other => Err(CliError::usage(format!(
            "--sense must be min, max, or both, got `{other}`"
        ))),
    }
}

fn parse_scheme(label: &str) -> Result<NeighborScheme, CliError> {
    match label {
        "axis" => Ok(NeighborScheme::Axis),
        "full" => Ok(NeighborScheme::Full),
        other => Err(CliError::usage(format!(
            "--neighbor-scheme must be axis or full, got `{other}`"
        ))),
    }
}

fn build_objective(spec: &FunctionSpec) -> Result<ObjectiveFunction, CliError> {
    match spec {
        FunctionSpec::Builtin { builtin } => {
            ObjectiveFunction::builtin(builtin).map_err(|e| CliError::usage(e.to_string()))
        }
        FunctionSpec::Expression { expr, domain } => {
            let dim = domain.len();
            let parsed = crate::expr::parse(expr, dim).map_err(|e| CliError::usage(e.to_string()))?;
            let lower = domain.iter().map(|d| d[0]).collect();
            let upper = domain.iter().map(|d| d[1]).collect();
            let boxdom = BoxDomain::new(lower, upper).map_err(|e| CliError::usage(e.to_string()))?;
            ObjectiveFunction::from_expr(expr.clone(), boxdom, parsed)
                .map_err(|e| CliError::usage(e.to_string()))
        }
    }
}

struct ResolvedRun {
    function: FunctionSpec,
    objective: ObjectiveFunction,
    senses: Vec<Sense>,
    sense_label: String,
    cfg: SearchConfig,
}

fn resolve_run(function: &FunctionArgs, search_args: &SearchArgs) -> Result<ResolvedRun, CliError> {
    if let Some(path) = &function.config {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read --config {}: {e}", path.display())))?;
        let doc: RunConfigDoc = serde_json::from_str(&text)
            .map_err(|e| CliError::usage(format!("bad config file {}: {e}", path.display())))?;
        let objective = build_objective(&doc.function)?;
        let senses = parse_sense(&doc.sense)?;
        let cfg = SearchConfig {
            n: doc.n.clone(),
            n1: doc.n1.clone(),
            epsilon: doc.epsilon,
            aco: AcoParams {
                alpha: doc.alpha,
                beta: doc.beta,
                rho: doc.rho,
                c1: doc.c1,
                tau0: doc.tau0,
                max_inner_iters: doc.max_inner_iters,
            },
            sense: senses[0],
            neighbor_scheme: parse_scheme(&doc.neighbor_scheme)?,
            seed: doc.seed,
            check_boundary: doc.check_boundary,
        };
        return Ok(ResolvedRun {
            function: doc.function.clone(),
            objective,
            senses,
            sense_label: doc.sense.clone(),
            cfg,
        });
    }

    let function_spec = if let Some(name) = &function.builtin {
        FunctionSpec::Builtin {
            builtin: name.clone(),
        }
    } else if let Some(expr) = &function.expr {
        let domain_text = function
            .domain
            .as_ref()
            .ok_or_else(|| CliError::usage("--expr requires --domain"))?;
        FunctionSpec::Expression {
            expr: expr.clone(),
            domain: parse_domain(domain_text)?,
        }
    } else {
        return Err(CliError::usage(
            "one of --builtin, --expr, or --config is required",
        ));
    };
    let objective = build_objective(&function_spec)?;
    let dim = objective.domain().dim();

    let sense_label = search_args
        .sense
        .clone()
        .ok_or_else(|| CliError::usage("--sense is required (min, max, or both)"))?;
    let senses = parse_sense(&sense_label)?;
    let n = parse_counts(
        search_args
            .n
            .as_deref()
            .ok_or_else(|| CliError::usage("--n is required"))?,
        dim,
        "n",
    )?;
    let n1 = parse_counts(
        search_args
            .n1
            .as_deref()
            .ok_or_else(|| CliError::usage("--n1 is required"))?,
        dim,
        "n1",
    )?;
    if n.iter().any(|&v| v == 0) {
        return Err(CliError::usage("--n entries must be >= 1"));
    }
    if n1.iter().any(|&v| v < 2) {
        return Err(CliError::usage("--n1 entries must be >= 2"));
    }

    let cfg = SearchConfig {
        n,
        n1,
        epsilon: search_args.epsilon,
        aco: AcoParams {
            alpha: search_args.alpha,
            beta: search_args.beta,
            rho: search_args.rho,
            c1: search_args.c1,
            tau0: search_args.tau0,
            max_inner_iters: search_args.max_inner_iters,
        },
        sense: senses[0],
        neighbor_scheme: parse_scheme(&search_args.neighbor_scheme)?,
        seed: search_args.seed,
        check_boundary: search_args.check_boundary,
    };
    Ok(ResolvedRun {
        function: function_spec,
        objective,
        senses,
        sense_label,
        cfg,
    })
}

fn run_passes(run: &ResolvedRun) -> Result<Vec<(Sense, RunReport)>, CliError> {
    run.senses
        .iter()
        .map(|&sense| {
            let cfg = SearchConfig {
                sense,
                ..run.cfg.clone()
            };
            search(&run.objective, &cfg)
                .map(|report| (sense, report))
                .map_err(CliError::runtime)
        })
        .collect()
}

fn cmd_extrema(args: ExtremaArgs) -> Result<i32, CliError> {
    let run = resolve_run(&args.function, &args.search)?;
    let reports = run_passes(&run)?;
    let doc = ReportDoc::from_runs(
        RunConfigDoc::from_search("extrema", run.function.clone(), &run.sense_label, &run.cfg),
        &reports.iter().map(|(s, r)| (*s, r)).collect::<Vec<_>>(),
    );

    println!(
        "{}: {} extrema ({} boundary) in {:.3}s, {} evaluations",
        run.objective.name(),
        doc.extrema.len(),
        doc.extrema.iter().filter(|e| e.on_boundary).count(),
        doc.stats.wall_time_s,
        doc.stats.evaluations,
    );
    for e in &doc.extrema {
        let coords: Vec<String> = e.point.iter().map(|x| format!("{x:.12}")).collect();
        println!(
            "  [{}]  f = {:.12}  ({}{})",
            coords.join(", "),
            e.value,
            e.sense,
            if e.on_boundary { ", boundary" } else { "" }
        );
    }

    if let Some(path) = &args.out {
        doc.write_json(path).map_err(CliError::runtime)?;
        println!("report written to {}", path.display());
    }
    if let Some(path) = &args.csv {
        doc.write_csv(path).map_err(CliError::runtime)?;
        println!("csv written to {}", path.display());
    }
    if let Some(dir) = &args.plot_dir {
        let flat: Vec<(ExtremumResult, Sense)> = reports
            .iter()
            .flat_map(|(sense, report)| report.extrema.iter().cloned().map(move |e| (e, *sense)))
            .collect();
        emit_plot_data(&run.objective, &flat, dir).map_err(CliError::runtime)?;
        println!("plot data written to {}", dir.display());
    }
    Ok(0)
}

fn read_cities(path: &Path) -> Result<CityGraph, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read --cities {}: {e}", path.display())))?;
    let mut coords = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = line.split(',').map(str::trim).collect();
        if parts.len() != 2 {
            return Err(CliError::usage(format!(
                "{}:{}: expected `x,y`, got `{line}`",
                path.display(),
                lineno + 1
            )));
        }
        match (parts[0].parse::<f64>(), parts[1].parse::<f64>()) {
            (Ok(x), Ok(y)) => coords.push([x, y]),
            _ if lineno == 0 => continue, // tolerate a header row
            _ => {
                return Err(CliError::usage(format!(
                    "{}:{}: bad coordinates `{line}`",
                    path.display(),
                    lineno + 1
                )))
            }
        }
    }
    CityGraph::from_coordinates(coords).map_err(|e| CliError::usage(e.to_string()))
}

fn cmd_tsp(args: TspArgs) -> Result<i32, CliError> {
    let graph = read_cities(&args.cities)?;
    let params = TspParams {
        ants: args.ants,
        q: args.q,
        alpha: args.alpha,
        beta: args.beta,
        rho: args.rho,
        tau0: args.tau0,
        t_max: args.iterations,
        marker_threshold: args.marker_threshold,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let start = std::time::Instant::now();
    let outcome = solve_tsp(&graph, &params, &mut rng).map_err(CliError::runtime)?;
    let wall = start.elapsed().as_secs_f64();

    println!(
        "best tour length {:.12} after {} iterations ({:.3}s)",
        outcome.best_length,
        outcome.iteration_lengths.len(),
        wall
    );
    println!(
        "tour: {}",
        outcome
            .best_tour
            .iter()
            .map(|c| c.to_string())
            .collect::<Vec<_>>()
            .join(" -> ")
    );

    if let Some(path) = &args.out {
        let markers = crate::tsp::convergence_marker(&outcome.iteration_lengths);
        let doc = serde_json::json!({
            "config": {
                "command": "tsp",
                "cities": args.cities.display().to_string(),
                "city_count": graph.len(),
                "iterations": args.iterations,
                "ants": args.ants,
                "alpha": args.alpha,
                "beta": args.beta,
                "rho": args.rho,
                "q": args.q,
                "tau0": args.tau0,
                "marker_threshold": args.marker_threshold,
                "seed": args.seed,
            },
            "best_tour": outcome.best_tour,
            "best_length": outcome.best_length,
            "iteration_lengths": outcome.iteration_lengths,
            "convergence_marker": markers,
            "wall_time_s": wall,
        });
        let text = serde_json::to_string_pretty(&doc).map_err(CliError::runtime)?;
        fs::write(path, text + "\n")
            .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))?;
        println!("report written to {}", path.display());
    }
    Ok(0)
}

fn cmd_verify(args: VerifyArgs) -> Result<i32, CliError> {
    let run = resolve_run(&args.function, &args.search)?;
    let dim = run.objective.domain().dim();
    let resolution = match &args.resolution {
        Some(text) => parse_counts(text, dim, "resolution")?,
        None => {
            if dim == 1 {
                vec![100_001]
            } else {
                vec![2001; dim]
            }
        }
    };
    let oracle_cfg = OracleConfig {
        resolution,
        refine_steps: args.refine_steps,
    };

    let reports = run_passes(&run)?;
    let mut rows = Vec::new();
    for (sense, report) in &reports {
        let oracle = grid_extrema(&run.objective, *sense, &oracle_cfg).map_err(CliError::runtime)?;
        for found in &report.extrema {
            let nearest = oracle.iter().min_by(|a, b| {
                dist(&a.point, &found.point)
                    .partial_cmp(&dist(&b.point, &found.point))
                    .unwrap()
            });
            rows.push((*sense, found.clone(), nearest.cloned()));
        }
        let matched = report
            .extrema
            .iter()
            .filter(|f| {
                oracle
                    .iter()
                    .any(|o| dist(&o.point, &f.point) <= 2.0 * diag(&f.cell_size))
            })
            .count();
        println!(
            "{} pass: search found {}, oracle found {}, matched within 2 cell diagonals: {}",
            sense.label(),
            report.extrema.len(),
            oracle.len(),
            matched
        );
    }

    println!(
        "{:>4}  {:>5}  {:>24}  {:>24}  {:>24}  {:>24}  {:>12}",
        "#", "sense", "oracle x", "oracle f", "calculated x", "calculated f", "error r"
    );
    for (i, (sense, found, nearest)) in rows.iter().enumerate() {
        let (ox, of, err) = match nearest {
            Some(o) => (
                point_str(&o.point),
                format!("{:.12}", o.value),
                error_ratio(o.value, found.value).to_string(),
            ),
            None => ("-".into(), "-".into(), "-".into()),
        };
        println!(
            "{:>4}  {:>5}  {:>24}  {:>24}  {:>24}  {:>24}  {:>12}",
            i + 1,
            sense.label(),
            ox,
            of,
            point_str(&found.point),
            format!("{:.12}", found.value),
            err
        );
    }

    if let Some(path) = &args.out {
        let rows_json: Vec<serde_json::Value> = rows
            .iter()
            .map(|(sense, found, nearest)| {
                serde_json::json!({
                    "sense": sense.label(),
                    "calculated": {
                        "point": found.point.iter().map(|&x| fmt17(x)).collect::<Vec<_>>(),
                        "value": fmt17(found.value),
                    },
                    "oracle": nearest.as_ref().map(|o| serde_json::json!({
                        "point": o.point.iter().map(|&x| fmt17(x)).collect::<Vec<_>>(),
                        "value": fmt17(o.value),
                        "on_boundary": o.on_boundary,
                    })),
                    "error_ratio": nearest.as_ref().map(|o| error_ratio(o.value, found.value).to_string()),
                })
            })
            .collect();
        let text = serde_json::to_string_pretty(&serde_json::json!({ "rows": rows_json }))
            .map_err(CliError::runtime)?;
        fs::write(path, text + "\n")
            .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))?;
        println!("verification written to {}", path.display());
    }
    Ok(0)
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn diag(cell: &[f64]) -> f64 {
    cell.iter().map(|d| d * d).sum::<f64>().sqrt()
}

fn point_str(p: &[f64]) -> String {
    let coords: Vec<String> = p.iter().map(|x| format!("{x:.9}")).collect();
    coords.join(", ")
}
