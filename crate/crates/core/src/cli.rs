//! Command-line front end. Every command writes CSV with a header row.
//!
//! Columns by command:
//!
//! - `estimate`, `compare`: `method,k,m,estimate,exact,relative_error,matvecs,seconds`
//! - `sweep-n`: `method,n,seeds,k,m,p10,p30,p50,p70,p90`
//! - `gmrf-bench`: `side,n,nugget,method,loglik,seconds`
//! - `gmrf-sweep`: `parameter,value,exact_loglik,maxent_loglik,difference`
//!
//! Empty cells mean "not available" (no exact value, or timing omitted).

use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gmrf::{build_precision, log_likelihood, log_likelihood_nugget, sample_gmrf, LatticeSpec, LogDetMethod};
use crate::logdet::{estimate, relative_error_of, EstimatorConfig, Method};
use crate::probe::{ProbeKind, Sampling};
use crate::quadrature::DEFAULT_QUAD_NODES;
use crate::sparse::{exact_logdet, load_matrix_market, synth_wishart_identity, SparseSymMatrix};

/// Thread count for the worker pool; unset or 0 lets rayon decide.
pub const THREADS_ENV: &str = "ENTLOGDET_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

pub const DEFAULT_KAPPA: f64 = 0.1;
pub const DEFAULT_TAU: f64 = 1.0;
pub const DEFAULT_BUDGETS: [usize; 6] = [5, 10, 15, 20, 25, 30];
pub const DEFAULT_SIZES: [usize; 10] = [100, 200, 300, 400, 500, 600, 700, 800, 900, 1000];
pub const DEFAULT_SWEEP_SEEDS: usize = 25;
pub const DEFAULT_BENCH_SIDES: [usize; 5] = [32, 64, 128, 256, 512];
pub const DEFAULT_BENCH_NUGGET: f64 = 0.5;
pub const DEFAULT_KAPPA_GRID: [f64; 15] =
    [0.02, 0.04, 0.06, 0.08, 0.10, 0.12, 0.14, 0.16, 0.18, 0.20, 0.22, 0.24, 0.26, 0.28, 0.30];
pub const DEFAULT_TAU_GRID: [f64; 16] =
    [0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 1.1, 1.2, 1.3, 1.4, 1.5, 1.6, 1.7, 1.8, 1.9, 2.0];
pub const PERCENTILES: [f64; 5] = [10.0, 30.0, 50.0, 70.0, 90.0];

#[derive(Debug, Parser)]
#[command(name = "entlogdet", version, about = "Matrix-free log-determinant estimation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the log determinant of one matrix.
    Estimate(EstimateArgs),
    /// Run every method at a ladder of moment budgets with shared probes.
    Compare(CompareArgs),
    /// Error percentiles of synthetic matrices over a ladder of sizes.
    SweepN(SweepNArgs),
    /// Time exact and entropic GMRF likelihoods over lattice sizes.
    GmrfBench(GmrfBenchArgs),
    /// Exact and entropic GMRF likelihoods over a kappa or tau grid.
    GmrfSweep(GmrfSweepArgs),
}

#[derive(Debug, Clone, Args)]
#[group(required = true, multiple = false)]
pub struct SourceArgs {
    /// Matrix Market file.
    #[arg(long, value_name = "PATH")]
    pub matrix: Option<PathBuf>,
    /// Synthetic Wishart-plus-identity matrix, e.g. `n=1000`.
    #[arg(long, value_name = "n=N")]
    pub synthetic: Option<SyntheticSpec>,
    /// Lattice GMRF precision, e.g. `64x64`.
    #[arg(long, value_name = "RxC")]
    pub lattice: Option<LatticeSize>,
}

#[derive(Debug, Clone, Args)]
pub struct EstimatorArgs {
    #[arg(long = "moments", short = 'k', default_value_t = 10)]
    pub moments: usize,
    #[arg(long = "probes", short = 'm', default_value_t = 30)]
    pub probes: usize,
    #[arg(long, value_enum, default_value_t = KindArg::Rademacher)]
    pub probe_kind: KindArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Moment-matching tolerance of the entropic fit.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = DEFAULT_QUAD_NODES)]
    pub quad_nodes: usize,
}

impl EstimatorArgs {
    pub fn config(&self, moments: usize, seed: u64) -> EstimatorConfig {
        EstimatorConfig {
            moments,
            sampling: Sampling::Probes { kind: self.probe_kind.into(), count: self.probes, seed },
            tol: self.tol,
            quad_nodes: self.quad_nodes,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct LatticeArgs {
    #[arg(long, default_value_t = DEFAULT_KAPPA, allow_negative_numbers = true)]
    pub kappa: f64,
    #[arg(long, default_value_t = DEFAULT_TAU, allow_negative_numbers = true)]
    pub tau: f64,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Write CSV here instead of standard output.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Leave timing cells empty so repeated runs are byte-identical.
    #[arg(long)]
    pub omit_timing: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ExactArgs {
    /// Exact log determinant. Without a value it is computed by Cholesky.
    #[arg(long, value_name = "V", num_args = 0..=1, allow_negative_numbers = true)]
    pub exact: Option<Option<f64>>,
    /// File holding the exact log determinant as its first token.
    #[arg(long, value_name = "PATH", conflicts_with = "exact")]
    pub exact_file: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[arg(long, default_value = "maxent")]
    pub method: MethodArg,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
    #[command(flatten)]
    pub lattice: LatticeArgs,
    #[command(flatten)]
    pub exact: ExactArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// Moment budgets, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_BUDGETS)]
    pub budgets: Vec<usize>,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
    #[command(flatten)]
    pub lattice: LatticeArgs,
    #[command(flatten)]
    pub exact: ExactArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SweepNArgs {
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_SIZES)]
    pub sizes: Vec<usize>,
    /// Matrices per size.
    #[arg(long, default_value_t = DEFAULT_SWEEP_SEEDS)]
    pub seeds: usize,
    #[arg(long, default_value = "maxent")]
    pub method: MethodArg,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct GmrfBenchArgs {
    /// Lattice sides; each lattice is side x side.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_BENCH_SIDES)]
    pub sides: Vec<usize>,
    /// Nugget variance of the second arm; 0 skips it.
    #[arg(long, value_name = "VAR", default_value_t = DEFAULT_BENCH_NUGGET)]
    pub nugget: f64,
    #[command(flatten)]
    pub lattice: LatticeArgs,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct GmrfSweepArgs {
    #[arg(long, value_name = "RxC", default_value = "64x64")]
    pub lattice: LatticeSize,
    #[arg(long, value_enum, default_value_t = Param::Kappa)]
    pub param: Param,
    /// Grid of the swept parameter, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub grid: Option<Vec<f64>>,
    /// Nugget variance; 0 means none.
    #[arg(long, value_name = "VAR", default_value_t = 0.0)]
    pub nugget: f64,
    /// Seed of the sampled field.
    #[arg(long, default_value_t = 0)]
    pub data_seed: u64,
    #[command(flatten)]
    pub lattice_params: LatticeArgs,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Rademacher,
    Gaussian,
    Sphere,
    Basis,
}

impl From<KindArg> for ProbeKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Rademacher => ProbeKind::Rademacher,
            KindArg::Gaussian => ProbeKind::Gaussian,
            KindArg::Sphere => ProbeKind::UnitSphere,
            KindArg::Basis => ProbeKind::FixedBasis,
        }
    }
}

/// `maxent`, `taylor`, `chebyshev`, or `all`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodArg {
    One(Method),
    All,
}

impl MethodArg {
    pub fn methods(self) -> Vec<Method> {
        match self {
            MethodArg::One(m) => vec![m],
            MethodArg::All => Method::ALL.to_vec(),
        }
    }
}

impl FromStr for MethodArg {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("all") {
            Ok(MethodArg::All)
        } else {
            s.parse().map(MethodArg::One)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Param {
    Kappa,
    Tau,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyntheticSpec {
    pub n: usize,
}

impl FromStr for SyntheticSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let n = s
            .strip_prefix("n=")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::InvalidArgument(format!("expected n=N, got `{s}`")))?;
        Ok(SyntheticSpec { n })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LatticeSize {
    pub rows: usize,
    pub cols: usize,
}

impl FromStr for LatticeSize {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("expected RxC, got `{s}`"));
        let (r, c) = s.split_once(['x', 'X']).ok_or_else(bad)?;
        let rows = r.trim().parse().map_err(|_| bad())?;
        let cols = c.trim().parse().map_err(|_| bad())?;
        Ok(LatticeSize { rows, cols })
    }
}

/// Parses arguments, runs the command and maps errors to exit codes.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return EXIT_INPUT;
    }
    match run(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_INPUT
    }
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("{THREADS_ENV} must be a thread count, got `{raw}`")))?;
    // a pool may already exist when called twice in one process
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    Ok(())
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Estimate(a) => cmd_estimate(&a),
        Command::Compare(a) => cmd_compare(&a),
        Command::SweepN(a) => cmd_sweep_n(&a),
        Command::GmrfBench(a) => cmd_gmrf_bench(&a),
        Command::GmrfSweep(a) => cmd_gmrf_sweep(&a),
    }
}

fn load_source(source: &SourceArgs, lattice: &LatticeArgs, seed: u64) -> Result<SparseSymMatrix> {
    if let Some(path) = &source.matrix {
        load_matrix_market(path)
    } else if let Some(spec) = source.synthetic {
        synth_wishart_identity(spec.n, seed)
    } else if let Some(size) = source.lattice {
        build_precision(&LatticeSpec::new(size.rows, size.cols, lattice.kappa, lattice.tau)?)
    } else {
        Err(Error::InvalidArgument("one of --matrix, --synthetic or --lattice is required".into()))
    }
}

fn read_exact_file(path: &Path) -> Result<f64> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_owned(), source })?;
    let token = text.split_whitespace().next().unwrap_or("");
    token
        .parse()
        .map_err(|_| Error::Parse { line: 1, message: format!("expected a number in {}, got `{token}`", path.display()) })
}

fn resolve_exact(args: &ExactArgs, a: &SparseSymMatrix, required: bool) -> Result<Option<f64>> {
    match (args.exact, &args.exact_file) {
        (Some(Some(v)), _) => Ok(Some(v)),
        (_, Some(path)) => read_exact_file(path).map(Some),
        (Some(None), None) => exact_logdet(a).map(Some),
        (None, None) if required => exact_logdet(a).map(Some),
        (None, None) => Ok(None),
    }
}

fn open_output(output: &OutputArgs) -> Result<csv::Writer<Box<dyn Write>>> {
    let sink: Box<dyn Write> = match &output.out {
        Some(path) => Box::new(File::create(path).map_err(|source| Error::Io { path: path.clone(), source })?),
        None => Box::new(io::stdout().lock()),
    };
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(sink))
}

fn write_rows(output: &OutputArgs, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let io_err = |e: csv::Error| {
        let path = output.out.clone().unwrap_or_else(|| PathBuf::from("<stdout>"));
        Error::Io { path, source: io::Error::other(e) }
    };
    let mut writer = open_output(output)?;
    writer.write_record(header).map_err(io_err)?;
    for row in rows {
        writer.write_record(row).map_err(io_err)?;
    }
    writer.flush().map_err(|source| Error::Io {
        path: output.out.clone().unwrap_or_else(|| PathBuf::from("<stdout>")),
        source,
    })
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn seconds(output: &OutputArgs, secs: f64) -> String {
    if output.omit_timing {
        String::new()
    } else {
        secs.to_string()
    }
}

pub const ESTIMATE_HEADER: [&str; 8] = ["method", "k", "m", "estimate", "exact", "relative_error", "matvecs", "seconds"];

fn estimate_row(
    a: &SparseSymMatrix,
    method: Method,
    cfg: &EstimatorConfig,
    exact: Option<f64>,
    output: &OutputArgs,
) -> Result<Vec<String>> {
    let r = estimate(a, method, cfg)?;
    let rel = exact.map(|e| relative_error_of(r.estimate, e)).transpose()?;
    Ok(vec![
        method.name().to_string(),
        r.moments.to_string(),
        r.probes.to_string(),
        r.estimate.to_string(),
        cell(exact),
        cell(rel),
        r.matvecs.to_string(),
        seconds(output, r.wall_time.as_secs_f64()),
    ])
}

pub fn cmd_estimate(args: &EstimateArgs) -> Result<()> {
    let seed = args.estimator.seed;
    let a = load_source(&args.source, &args.lattice, seed)?;
    let exact = resolve_exact(&args.exact, &a, false)?;
    let cfg = args.estimator.config(args.estimator.moments, seed);
    let rows = args
        .method
        .methods()
        .into_iter()
        .map(|m| estimate_row(&a, m, &cfg, exact, &args.output))
        .collect::<Result<Vec<_>>>()?;
    write_rows(&args.output, &ESTIMATE_HEADER, &rows)
}

pub fn cmd_compare(args: &CompareArgs) -> Result<()> {
    let seed = args.estimator.seed;
    let a = load_source(&args.source, &args.lattice, seed)?;
    let exact = resolve_exact(&args.exact, &a, true)?;
    let mut rows = Vec::new();
    for &k in &args.budgets {
        let cfg = args.estimator.config(k, seed);
        for method in Method::ALL {
            rows.push(estimate_row(&a, method, &cfg, exact, &args.output)?);
        }
    }
    write_rows(&args.output, &ESTIMATE_HEADER, &rows)
}

/// Seed of grid point `index` derived from the base seed.
pub fn point_seed(base: u64, index: u64) -> u64 {
    base.wrapping_add(index)
}

/// Linearly interpolated percentile of sorted data, `p` in `[0, 100]`.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    let pos = p / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub const SWEEP_N_HEADER: [&str; 10] = ["method", "n", "seeds", "k", "m", "p10", "p30", "p50", "p70", "p90"];

pub fn cmd_sweep_n(args: &SweepNArgs) -> Result<()> {
    if args.seeds == 0 || args.sizes.is_empty() {
        return Err(Error::InvalidArgument("sweep-n needs at least one size and one seed".into()));
    }
    let methods = args.method.methods();
    let points: Vec<(usize, u64)> = args
        .sizes
        .iter()
        .flat_map(|&n| (0..args.seeds as u64).map(move |r| (n, r)))
        .collect();
    let errors: Vec<Vec<f64>> = points
        .par_iter()
        .map(|&(n, r)| {
            let seed = point_seed(args.estimator.seed, r);
            let a = synth_wishart_identity(n, seed)?;
            let exact = exact_logdet(&a)?;
            let cfg = args.estimator.config(args.estimator.moments, seed);
            methods
                .iter()
                .map(|&m| relative_error_of(estimate(&a, m, &cfg)?.estimate, exact))
                .collect()
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    for (mi, method) in methods.iter().enumerate() {
        for (si, &n) in args.sizes.iter().enumerate() {
            let mut errs: Vec<f64> = errors[si * args.seeds..(si + 1) * args.seeds].iter().map(|e| e[mi]).collect();
            errs.sort_by(f64::total_cmp);
            let mut row = vec![
                method.name().to_string(),
                n.to_string(),
                args.seeds.to_string(),
                args.estimator.moments.to_string(),
                args.estimator.probes.to_string(),
            ];
            row.extend(PERCENTILES.iter().map(|&p| percentile(&errs, p).to_string()));
            rows.push(row);
        }
    }
    write_rows(&args.output, &SWEEP_N_HEADER, &rows)
}

pub const GMRF_BENCH_HEADER: [&str; 6] = ["side", "n", "nugget", "method", "loglik", "seconds"];

pub fn cmd_gmrf_bench(args: &GmrfBenchArgs) -> Result<()> {
    let cfg = args.estimator.config(args.estimator.moments, args.estimator.seed);
    let mut nuggets = vec![0.0];
    if args.nugget > 0.0 {
        nuggets.push(args.nugget);
    }
    let methods = [("exact", LogDetMethod::Exact), ("maxent", LogDetMethod::Entropic(cfg))];
    let mut rows = Vec::new();
    for &side in &args.sides {
        let spec = LatticeSpec::new(side, side, args.lattice.kappa, args.lattice.tau)?;
        let q = build_precision(&spec)?;
        let x = sample_gmrf(&q, args.estimator.seed)?;
        for &nugget in &nuggets {
            for (name, method) in &methods {
                let start = Instant::now();
                let ll = if nugget > 0.0 {
                    log_likelihood_nugget(&q, &x, nugget, method)?
                } else {
                    log_likelihood(&q, &x, method)?
                };
                let secs = start.elapsed().as_secs_f64();
                rows.push(vec![
                    side.to_string(),
                    spec.dim().to_string(),
                    nugget.to_string(),
                    name.to_string(),
                    ll.to_string(),
                    seconds(&args.output, secs),
                ]);
            }
        }
    }
    write_rows(&args.output, &GMRF_BENCH_HEADER, &rows)
}

pub const GMRF_SWEEP_HEADER: [&str; 5] = ["parameter", "value", "exact_loglik", "maxent_loglik", "difference"];

/// One point of a likelihood surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfacePoint {
    pub value: f64,
    pub exact: f64,
    pub maxent: f64,
}

/// Exact and entropic log likelihoods of `x` over a grid of one parameter,
/// the other held at its value in `base`.
pub fn likelihood_surface(
    base: &LatticeSpec,
    param: Param,
    grid: &[f64],
    x: &[f64],
    cfg: &EstimatorConfig,
) -> Result<Vec<SurfacePoint>> {
    grid.par_iter()
        .map(|&value| {
            let spec = match param {
                Param::Kappa => LatticeSpec { kappa: value, ..*base },
                Param::Tau => LatticeSpec { tau: value, ..*base },
            };
            spec.check()?;
            let q = build_precision(&spec)?;
            let eval = |method: &LogDetMethod| {
                if spec.nugget_variance > 0.0 {
                    log_likelihood_nugget(&q, x, spec.nugget_variance, method)
                } else {
                    log_likelihood(&q, x, method)
                }
            };
            Ok(SurfacePoint { value, exact: eval(&LogDetMethod::Exact)?, maxent: eval(&LogDetMethod::Entropic(*cfg))? })
        })
        .collect()
}

pub fn cmd_gmrf_sweep(args: &GmrfSweepArgs) -> Result<()> {
    let base = LatticeSpec::new(args.lattice.rows, args.lattice.cols, args.lattice_params.kappa, args.lattice_params.tau)?
        .with_nugget(args.nugget)?;
    let grid = match (&args.grid, args.param) {
        (Some(g), _) => g.clone(),
        (None, Param::Kappa) => DEFAULT_KAPPA_GRID.to_vec(),
        (None, Param::Tau) => DEFAULT_TAU_GRID.to_vec(),
    };
    let x = sample_gmrf(&build_precision(&base)?, args.data_seed)?;
    let cfg = args.estimator.config(args.estimator.moments, args.estimator.seed);
    let surface = likelihood_surface(&base, args.param, &grid, &x, &cfg)?;
    let name = match args.param {
        Param::Kappa => "kappa",
        Param::Tau => "tau",
    };
    let rows: Vec<Vec<String>> = surface
        .iter()
        .map(|p| {
            vec![
                name.to_string(),
                p.value.to_string(),
                p.exact.to_string(),
                p.maxent.to_string(),
                (p.maxent - p.exact).to_string(),
            ]
        })
        .collect();
    write_rows(&args.output, &GMRF_SWEEP_HEADER, &rows)
}
