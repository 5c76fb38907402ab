//! Command-line front end: fitting, regularization paths, model selection,
//! irrepresentability analysis, simulation studies, and solver benchmarks,
//! all file-based.
//!
//! Exit codes: 0 success, 2 usage, 3 input parse, 4 numeric precondition
//! (non-positive-definite inputs and similar), 5 non-convergence. Failures
//! print a single JSON object to stderr and never leave partial output files
//! (writes are temp-file-plus-rename).

// Grid validation uses `!(x > 0.0)` on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use ndarray::Array2;

use pcglasso::fit::{fit, FitResult, SolverConfig};
use pcglasso::io;
use pcglasso::irr;
use pcglasso::matrix::{correlation_from_data, CorrelationMatrix, SampleData};
use pcglasso::select::{cross_validate, lambda_path, lambda_path_parallel, log_grid};
use pcglasso::sim::{self, Method, Selection, Structure, StudyConfig};
use pcglasso::Error;

const ENV_HELP: &str = "Environment overrides for solver defaults:
  PCGLASSO_OUTER_TOL       relative objective-change threshold (default 1e-8)
  PCGLASSO_OUTER_MAX_ITER  outer iteration cap (default 500)
  PCGLASSO_R_TOL           correlation-solve threshold (default: scaled from S)
  PCGLASSO_D_TOL           diagonal-solve objective-drop threshold (default 1e-10)
  PCGLASSO_STAT_TOL        stationarity target multiplier (default 1e-6)";

#[derive(Parser)]
#[command(
    name = "pcglasso",
    about = "Sparse precision matrix estimation with an l1 penalty on partial correlations",
    after_help = ENV_HELP,
    version
)]
struct Cli {
    /// Cap the worker thread count (default: available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit at one penalty level and write the result as JSON.
    Fit(FitArgs),
    /// Fit along a penalty grid with warm starts; write a score CSV.
    Path(PathArgs),
    /// Select the penalty by BIC, EBIC, or cross-validation.
    Select(SelectArgs),
    /// Irrepresentability values for a given precision matrix or hub.
    Irr(IrrArgs),
    /// Hub irrepresentability heatmap over an (a, c) grid.
    Heatmap(HeatmapArgs),
    /// Synthetic recovery study across methods and sample sizes.
    Simulate(SimulateArgs),
    /// Benchmark the diagonal vs exact Newton scaling solvers.
    BenchD(BenchArgs),
}

#[derive(Args)]
struct InputArgs {
    /// Dataset CSV (rows = observations, optional header).
    #[arg(long, value_name = "FILE")]
    data: Option<PathBuf>,
    /// Correlation matrix CSV (headerless).
    #[arg(long, value_name = "FILE")]
    corr: Option<PathBuf>,
}

/// Correlation matrix plus, when raw data was given, the scale vector,
/// sample count, and the data itself.
type LoadedInput = (
    CorrelationMatrix,
    Option<ndarray::Array1<f64>>,
    Option<usize>,
    Option<SampleData>,
);

impl InputArgs {
    /// Load either input form.
    fn load(&self) -> Result<LoadedInput, Error> {
        match (&self.data, &self.corr) {
            (Some(_), Some(_)) | (None, None) => Err(Error::InvalidConfig(
                "exactly one of --data and --corr is required".into(),
            )),
            (Some(path), None) => {
                let rows = io::read_dataset_csv(path)?;
                let data = SampleData::new(rows)?;
                let (chat, scale) = correlation_from_data(&data)?;
                let n = data.n();
                Ok((chat, Some(scale), Some(n), Some(data)))
            }
            (None, Some(path)) => {
                let entries = io::read_matrix_csv(path)?;
                Ok((CorrelationMatrix::from_entries(entries)?, None, None, None))
            }
        }
    }
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    lambda: f64,
    #[arg(long, default_value_t = 0.0)]
    alpha: f64,
    /// Random restarts with perturbed diagonals; best objective wins.
    #[arg(long, default_value_t = 1)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output JSON path (stdout when omitted).
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GridArgs {
    /// Explicit non-increasing penalty grid, comma-separated.
    #[arg(long, value_delimiter = ',', value_name = "L1,L2,...")]
    lambdas: Option<Vec<f64>>,
    /// Upper end of a log-spaced grid (default: scaled from the data).
    #[arg(long)]
    lambda_max: Option<f64>,
    /// Lower end of a log-spaced grid.
    #[arg(long, default_value_t = 0.01)]
    lambda_min: f64,
    /// Number of log-spaced grid points.
    #[arg(long, default_value_t = 30)]
    grid_size: usize,
}

impl GridArgs {
    fn build(&self, chat: &CorrelationMatrix, alpha: f64) -> Result<Vec<f64>, Error> {
        if let Some(grid) = &self.lambdas {
            return Ok(grid.clone());
        }
        let hi = self
            .lambda_max
            .unwrap_or_else(|| ((1.0 - alpha) * chat.max_abs_offdiag()).max(0.02));
        if !(hi > 0.0) || !(self.lambda_min > 0.0) || self.lambda_min > hi {
            return Err(Error::InvalidConfig(format!(
                "invalid grid range [{}, {hi}]",
                self.lambda_min
            )));
        }
        Ok(log_grid(self.lambda_min, hi, self.grid_size.max(1)))
    }
}

#[derive(Args)]
struct PathArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, default_value_t = 0.0)]
    alpha: f64,
    /// Sample count for the information criteria (required with --corr).
    #[arg(long)]
    n: Option<usize>,
    /// EBIC weight.
    #[arg(long, default_value_t = 0.5)]
    gamma: f64,
    /// Cold-start every grid point and fit them concurrently.
    #[arg(long)]
    parallel: bool,
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SelectArgs {
    /// Dataset CSV (selection needs raw observations).
    #[arg(long, value_name = "FILE")]
    data: PathBuf,
    #[command(flatten)]
    grid: GridArgs,
    /// Selection rule: bic, ebic, or cv.
    #[arg(long, default_value = "bic")]
    method: String,
    #[arg(long, default_value_t = 0.5)]
    gamma: f64,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, default_value_t = 0.0)]
    alpha: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct IrrArgs {
    /// Precision matrix CSV (headerless).
    #[arg(long, value_name = "FILE")]
    kstar: Option<PathBuf>,
    /// Hub parameters a,b,c,p.
    #[arg(long, value_name = "A,B,C,P")]
    hub: Option<String>,
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct HeatmapArgs {
    #[arg(long, default_value_t = 15)]
    p: usize,
    #[arg(long, default_value_t = 1.0)]
    b: f64,
    /// Center-weight grid as min,max,count.
    #[arg(long, default_value = "0.25,12,20", value_name = "MIN,MAX,COUNT")]
    a_grid: String,
    /// Tie-strength grid as min,max,count.
    #[arg(long, default_value = "0.02,0.7,20", value_name = "MIN,MAX,COUNT")]
    c_grid: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Structure: hub, block-hub, general-hub, or chain.
    #[arg(long, default_value = "hub")]
    structure: String,
    #[arg(long, default_value_t = 20)]
    p: usize,
    #[arg(long, default_value_t = 4)]
    blocks: usize,
    #[arg(long, default_value_t = 1.0)]
    hub_a: f64,
    #[arg(long, default_value_t = 1.0)]
    hub_b: f64,
    #[arg(long, default_value_t = 0.2)]
    hub_c: f64,
    #[arg(long, default_value_t = 0.4)]
    rho: f64,
    /// Sample sizes, comma-separated.
    #[arg(long, value_delimiter = ',', default_value = "500")]
    n: Vec<usize>,
    #[arg(long, default_value_t = 20)]
    reps: usize,
    /// Methods: pcglasso, glasso, corr-glasso (comma-separated).
    #[arg(long, value_delimiter = ',', default_value = "pcglasso,glasso")]
    methods: Vec<String>,
    /// Selection rule: bic, ebic, or cv.
    #[arg(long, default_value = "bic")]
    selection: String,
    #[arg(long, default_value_t = 0.5)]
    gamma: f64,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, default_value_t = 0.0)]
    alpha: f64,
    #[arg(long, default_value_t = 30)]
    grid_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Summary CSV output (stdout when omitted).
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Optional full JSON report (aggregates plus raw replicates).
    #[arg(long, value_name = "FILE")]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Problem dimensions, comma-separated.
    #[arg(long, value_delimiter = ',', default_value = "2,50,200")]
    p: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Also write a per-iteration trace of one solve at the largest p.
    #[arg(long, value_name = "FILE")]
    trace: Option<PathBuf>,
}

fn main() {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .is_err()
        {
            // Pool already initialized; proceed with the existing one.
        }
    }
    if let Err(e) = run(cli.command) {
        let code = match &e {
            Error::Parse(_) | Error::Io(_) => 3,
            Error::InvalidInput(_) | Error::NotPositiveDefinite(_) => 4,
            Error::NonConvergence(_) => 5,
            Error::InvalidConfig(_) => 2,
        };
        let kind = match &e {
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
            Error::InvalidInput(_) => "invalid_input",
            Error::NotPositiveDefinite(_) => "not_positive_definite",
            Error::NonConvergence(_) => "non_convergence",
            Error::InvalidConfig(_) => "invalid_config",
        };
        eprintln!(
            "{}",
            serde_json::json!({ "error": kind, "message": e.to_string(), "exit_code": code })
        );
        std::process::exit(code);
    }
}

fn solver_config(lambda: f64, alpha: f64) -> Result<SolverConfig, Error> {
    let mut cfg = SolverConfig::new(lambda, alpha);
    if let Some(v) = env_f64("PCGLASSO_OUTER_TOL")? {
        cfg.outer_tol = v;
    }
    if let Some(v) = env_f64("PCGLASSO_OUTER_MAX_ITER")? {
        cfg.outer_max_iter = v as usize;
    }
    if let Some(v) = env_f64("PCGLASSO_R_TOL")? {
        cfg.r_tol = Some(v);
    }
    if let Some(v) = env_f64("PCGLASSO_D_TOL")? {
        cfg.d_cfg.tol = v;
    }
    if let Some(v) = env_f64("PCGLASSO_STAT_TOL")? {
        cfg.stat_tol = v;
    }
    Ok(cfg)
}

fn env_f64(name: &str) -> Result<Option<f64>, Error> {
    match std::env::var(name) {
        Err(_) => Ok(None),
        Ok(s) => s
            .parse::<f64>()
            .map(Some)
            .map_err(|_| Error::InvalidConfig(format!("{name} must be numeric, got {s:?}"))),
    }
}

fn emit(out: &Option<PathBuf>, content: &str) -> Result<(), Error> {
    match out {
        Some(path) => io::atomic_write(path, content),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn run(cmd: Command) -> Result<(), Error> {
    match cmd {
        Command::Fit(args) => {
            let (chat, scale, _, _) = args.input.load()?;
            let mut cfg = solver_config(args.lambda, args.alpha)?;
            cfg.restarts = args.restarts;
            cfg.seed = args.seed;
            let result = fit(&chat, &cfg, scale.as_ref())?;
            let report = io::fit_report(&result, &cfg);
            let json =
                serde_json::to_string_pretty(&report).map_err(|e| Error::Parse(e.to_string()))?;
            emit(&args.out, &format!("{json}\n"))
        }
        Command::Path(args) => {
            let (chat, _, n_data, _) = args.input.load()?;
            let n = args.n.or(n_data).ok_or_else(|| {
                Error::InvalidConfig(
                    "--n is required when the input is a correlation matrix".into(),
                )
            })?;
            let grid = args.grid.build(&chat, args.alpha)?;
            let cfg = solver_config(0.0, args.alpha)?;
            let path = if args.parallel {
                lambda_path_parallel(&chat, &grid, args.alpha, &cfg, n, args.gamma)?
            } else {
                lambda_path(&chat, &grid, args.alpha, &cfg, n, args.gamma)?
            };
            emit(&args.out, &io::path_csv(&path))
        }
        Command::Select(args) => {
            let rows = io::read_dataset_csv(&args.data)?;
            let data = SampleData::new(rows)?;
            let (chat, scale) = correlation_from_data(&data)?;
            let grid = args.grid.build(&chat, args.alpha)?;
            let cfg = solver_config(0.0, args.alpha)?;
            let (criterion, selected, detail) = match args.method.as_str() {
                "bic" | "ebic" => {
                    let gamma = if args.method == "bic" {
                        0.0
                    } else {
                        args.gamma
                    };
                    let path = lambda_path(&chat, &grid, args.alpha, &cfg, data.n(), gamma)?;
                    let idx = if args.method == "bic" {
                        path.best_bic()
                    } else {
                        path.best_ebic()
                    }
                    .ok_or_else(|| Error::NonConvergence("no converged fit on the path".into()))?;
                    let scores: Vec<serde_json::Value> = path
                        .scores
                        .iter()
                        .zip(path.lambdas.iter())
                        .map(|(s, l)| match s {
                            Some(s) => serde_json::json!({
                                "lambda": l, "loglik": s.loglik, "bic": s.bic, "ebic": s.ebic
                            }),
                            None => serde_json::json!({ "lambda": l }),
                        })
                        .collect();
                    (
                        args.method.clone(),
                        grid[idx],
                        serde_json::json!({ "scores": scores }),
                    )
                }
                "cv" => {
                    let cv = cross_validate(&data, &grid, args.alpha, args.folds, &cfg, args.seed)?;
                    (
                        "cv".to_string(),
                        cv.selected_lambda,
                        serde_json::json!({
                            "folds": cv.folds,
                            "mean_heldout_loglik": cv.mean_heldout_loglik,
                            "lambdas": cv.lambda_grid,
                        }),
                    )
                }
                other => {
                    return Err(Error::InvalidConfig(format!(
                        "unknown selection method {other:?} (expected bic, ebic, or cv)"
                    )))
                }
            };
            let mut final_cfg = solver_config(selected, args.alpha)?;
            final_cfg.seed = args.seed;
            let best: FitResult = fit(&chat, &final_cfg, Some(&scale))?;
            let report = io::fit_report(&best, &final_cfg);
            let json = serde_json::json!({
                "criterion": criterion,
                "selected_lambda": selected,
                "detail": detail,
                "fit": report,
            });
            let body =
                serde_json::to_string_pretty(&json).map_err(|e| Error::Parse(e.to_string()))?;
            emit(&args.out, &format!("{body}\n"))
        }
        Command::Irr(args) => {
            let mut out = String::from(
                "source,a,b,c,p,irr_pcg,irr_glasso,pcg_satisfied,glasso_satisfied,pd\n",
            );
            match (&args.kstar, &args.hub) {
                (Some(_), Some(_)) | (None, None) => {
                    return Err(Error::InvalidConfig(
                        "exactly one of --kstar and --hub is required".into(),
                    ))
                }
                (Some(path), None) => {
                    let k: Array2<f64> = io::read_matrix_csv(path)?;
                    let rep = irr::irr_report(&k)?;
                    out.push_str(&format!(
                        "matrix,,,,{},{},{},{},{},{}\n",
                        k.nrows(),
                        rep.irr_pcg,
                        rep.irr_glasso,
                        rep.pcg_satisfied,
                        rep.glasso_satisfied,
                        rep.pd_input
                    ));
                }
                (None, Some(spec)) => {
                    let parts: Vec<&str> = spec.split(',').collect();
                    if parts.len() != 4 {
                        return Err(Error::InvalidConfig("--hub expects a,b,c,p".into()));
                    }
                    let a: f64 = parts[0].trim().parse().map_err(|_| {
                        Error::InvalidConfig(format!("bad hub parameter {:?}", parts[0]))
                    })?;
                    let b: f64 = parts[1].trim().parse().map_err(|_| {
                        Error::InvalidConfig(format!("bad hub parameter {:?}", parts[1]))
                    })?;
                    let c: f64 = parts[2].trim().parse().map_err(|_| {
                        Error::InvalidConfig(format!("bad hub parameter {:?}", parts[2]))
                    })?;
                    let p: usize = parts[3].trim().parse().map_err(|_| {
                        Error::InvalidConfig(format!("bad hub parameter {:?}", parts[3]))
                    })?;
                    let h = irr::hub_irr_closed_form(a, b, c, p);
                    if !h.pd {
                        return Err(Error::NotPositiveDefinite(format!(
                            "hub parameters are not positive definite (pd = false): (p-1)c^2 = {} >= ab = {}",
                            (p as f64 - 1.0) * c * c,
                            a * b
                        )));
                    }
                    // Cross-check against the generic path when feasible.
                    if p <= irr::MAX_GENERIC_DIM {
                        let k = sim::general_hub_precision(a, b, c, p)?;
                        let generic = irr::irr_pcglasso(&k)?;
                        if (generic - h.pcg).abs() > 1e-8 {
                            return Err(Error::NonConvergence(format!(
                                "closed form {} disagrees with generic value {generic}",
                                h.pcg
                            )));
                        }
                    }
                    out.push_str(&format!(
                        "hub,{a},{b},{c},{p},{},{},{},{},{}\n",
                        h.pcg,
                        h.glasso,
                        h.pcg < 1.0,
                        h.glasso < 1.0,
                        h.pd
                    ));
                }
            }
            emit(&args.out, &out)
        }
        Command::Heatmap(args) => {
            let a_grid = parse_grid(&args.a_grid)?;
            let c_grid = parse_grid(&args.c_grid)?;
            let cells = irr::irr_heatmap(&a_grid, &c_grid, args.b, args.p, args.seed)?;
            emit(&args.out, &io::heatmap_csv(&cells))
        }
        Command::Simulate(args) => {
            let structure = match args.structure.as_str() {
                "hub" => Structure::Hub { p: args.p },
                "block-hub" => Structure::BlockHub {
                    p: args.p,
                    blocks: args.blocks,
                },
                "general-hub" => Structure::GeneralHub {
                    a: args.hub_a,
                    b: args.hub_b,
                    c: args.hub_c,
                    p: args.p,
                },
                "chain" => Structure::Chain {
                    p: args.p,
                    rho: args.rho,
                },
                other => {
                    return Err(Error::InvalidConfig(format!(
                        "unknown structure {other:?} (expected hub, block-hub, general-hub, chain)"
                    )))
                }
            };
            let methods: Result<Vec<Method>, Error> = args
                .methods
                .iter()
                .map(|m| match m.as_str() {
                    "pcglasso" => Ok(Method::Pcglasso),
                    "glasso" => Ok(Method::Glasso),
                    "corr-glasso" | "corr_glasso" => Ok(Method::CorrGlasso),
                    other => Err(Error::InvalidConfig(format!("unknown method {other:?}"))),
                })
                .collect();
            let selection = match args.selection.as_str() {
                "bic" => Selection::Bic,
                "ebic" => Selection::Ebic { gamma: args.gamma },
                "cv" => Selection::Cv { folds: args.folds },
                other => return Err(Error::InvalidConfig(format!("unknown selection {other:?}"))),
            };
            let cfg = StudyConfig {
                structure,
                n_grid: args.n.clone(),
                replicates: args.reps,
                methods: methods?,
                selection,
                seed: args.seed,
                alpha: args.alpha,
                grid_size: args.grid_size,
            };
            let report = sim::run_study(&cfg)?;
            if let Some(json_path) = &args.json {
                let body = serde_json::to_string_pretty(&report)
                    .map_err(|e| Error::Parse(e.to_string()))?;
                io::atomic_write(json_path, &format!("{body}\n"))?;
            }
            emit(&args.out, &io::study_csv(&report))
        }
        Command::BenchD(args) => {
            let report = sim::bench_d_solvers(&args.p, args.reps, args.seed)?;
            if let Some(trace_path) = &args.trace {
                let p = *args.p.iter().max().expect("non-empty grid");
                let trace = sim::d_solver_trace(p, args.seed)?;
                io::atomic_write(trace_path, &io::d_trace_csv(&trace))?;
            }
            emit(&args.out, &io::timing_csv(&report))
        }
    }
}

fn parse_grid(spec: &str) -> Result<Vec<f64>, Error> {
    let parts: Vec<&str> = spec.split(',').collect();
    if parts.len() != 3 {
        return Err(Error::InvalidConfig(format!(
            "grid {spec:?} must be min,max,count"
        )));
    }
    let lo: f64 = parts[0]
        .trim()
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("bad grid bound {:?}", parts[0])))?;
    let hi: f64 = parts[1]
        .trim()
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("bad grid bound {:?}", parts[1])))?;
    let count: usize = parts[2]
        .trim()
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("bad grid count {:?}", parts[2])))?;
    if count == 0 || hi < lo {
        return Err(Error::InvalidConfig(format!(
            "grid {spec:?} is empty or reversed"
        )));
    }
    if count == 1 {
        return Ok(vec![lo]);
    }
    Ok((0..count)
        .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
        .collect())
}
